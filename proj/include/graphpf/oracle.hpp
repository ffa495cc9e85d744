#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphpf/caseio.hpp"

namespace graphpf::oracle {

using Complex = std::complex<double>;

/// Full bus admittance matrix assembled with branch incidence matrices,
/// Y = Cf^T Yf + Ct^T Yt + diag(Ysh), rows and columns in case bus order.
/// Throws SingularBranchError for an in-service branch with r = x = 0.
Eigen::MatrixXcd dense_admittance(const RawCase& c);

enum class NewtonStatus { Converged, MaxIterations, SingularJacobian };

struct DenseSolution {
    NewtonStatus status = NewtonStatus::MaxIterations;
    bool converged = false;
    std::vector<int> bus_ids;
    std::vector<Complex> v;
    std::size_t iterations = 0;
    double max_mismatch = 0.0;
    std::vector<double> q_gen;  // generator reactive output in pu at PV and slack buses, 0 elsewhere
};

/// Polar Newton-Raphson with the full dense Jacobian and partial-pivoting LU solves.
/// Flat start puts every non-slack bus at its island slack's case angle, PQ magnitudes
/// at 1 and PV magnitudes at the generator setpoint; otherwise the case Vm/Va are used.
DenseSolution newton_solve(const RawCase& c, double tol = 1e-8, std::size_t max_iter = 20, bool flat_start = true);

struct VoltageProfile {
    std::vector<int> bus_ids;
    std::vector<Complex> v;
};

struct SolutionDiff {
    double max_angle_diff = 0.0;  // radians, wrapped to (-pi, pi] before the absolute value
    double max_mag_diff = 0.0;    // pu
    int argmax_bus_angle = 0;
    int argmax_bus_mag = 0;
};

/// Throws std::invalid_argument unless both profiles cover the same bus ids.
SolutionDiff diff_solutions(const VoltageProfile& a, const VoltageProfile& b);

const char* to_string(NewtonStatus s) noexcept;

}  // namespace graphpf::oracle
