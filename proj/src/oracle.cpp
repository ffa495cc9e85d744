#include "graphpf/oracle.hpp"

#include <Eigen/LU>
#include <Eigen/Sparse>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "graphpf/netgraph.hpp"

namespace graphpf::oracle {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::unordered_map<int, Eigen::Index> bus_index(const RawCase& c) {
    std::unordered_map<int, Eigen::Index> idx;
    for (std::size_t i = 0; i < c.buses.size(); ++i) idx.emplace(c.buses[i].id, static_cast<Eigen::Index>(i));
    return idx;
}

Eigen::Index lookup(const std::unordered_map<int, Eigen::Index>& idx, int id) {
    const auto it = idx.find(id);
    if (it == idx.end()) throw std::invalid_argument("oracle: unknown bus " + std::to_string(id));
    return it->second;
}

}  // namespace

Eigen::MatrixXcd dense_admittance(const RawCase& c) {
    using Sparse = Eigen::SparseMatrix<Complex>;
    const auto idx = bus_index(c);
    const auto nb = static_cast<Eigen::Index>(c.buses.size());

    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        if (c.branches[k].in_service) live.push_back(k);
    }
    const auto nl = static_cast<Eigen::Index>(live.size());

    Eigen::VectorXcd yff(nl), yft(nl), ytf(nl), ytt(nl);
    std::vector<Eigen::Triplet<Complex>> cf_t, ct_t;
    for (Eigen::Index l = 0; l < nl; ++l) {
        const auto& br = c.branches[live[l]];
        if (br.r == 0.0 && br.x == 0.0) {
            throw SingularBranchError("branch #" + std::to_string(live[l]) + " has zero impedance", live[l]);
        }
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex tap = std::polar(br.tap != 0.0 ? br.tap : 1.0, br.shift * kDeg);
        ytt(l) = ys + Complex(0.0, br.b / 2.0);
        yff(l) = ytt(l) / (tap * std::conj(tap));
        yft(l) = -ys / std::conj(tap);
        ytf(l) = -ys / tap;
        cf_t.emplace_back(l, lookup(idx, br.from_bus), 1.0);
        ct_t.emplace_back(l, lookup(idx, br.to_bus), 1.0);
    }
    Sparse cf(nl, nb), ct(nl, nb);
    cf.setFromTriplets(cf_t.begin(), cf_t.end());
    ct.setFromTriplets(ct_t.begin(), ct_t.end());

    const Sparse yf = Sparse(yff.asDiagonal() * cf) + Sparse(yft.asDiagonal() * ct);
    const Sparse yt = Sparse(ytf.asDiagonal() * cf) + Sparse(ytt.asDiagonal() * ct);
    const Sparse ybranch = Sparse(cf.transpose() * yf) + Sparse(ct.transpose() * yt);

    Eigen::VectorXcd ysh(nb);
    for (Eigen::Index i = 0; i < nb; ++i) ysh(i) = Complex(c.buses[i].gs, c.buses[i].bs) / c.base_mva;

    Eigen::MatrixXcd y = Eigen::MatrixXcd(ybranch);
    y.diagonal() += ysh;
    return y;
}

DenseSolution newton_solve(const RawCase& c, double tol, std::size_t max_iter, bool flat_start) {
    const auto idx = bus_index(c);
    const auto n = static_cast<Eigen::Index>(c.buses.size());
    const Eigen::MatrixXcd ybus = dense_admittance(c);

    Eigen::VectorXcd sbus = Eigen::VectorXcd::Zero(n);
    Eigen::VectorXd vm(n), va(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = c.buses[i];
        sbus(i) = Complex(-b.pd, -b.qd) / c.base_mva;
        vm(i) = b.vm > 0.0 ? b.vm : 1.0;
        va(i) = b.va * kDeg;
    }
    for (const auto& g : c.gens) {
        if (!g.in_service) continue;
        const auto i = lookup(idx, g.bus_id);
        sbus(i) += Complex(g.pg, g.qg) / c.base_mva;
        if (c.buses[i].bus_type != BusType::PQ) vm(i) = g.vg;
    }

    std::vector<Eigen::Index> pv, pq;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (c.buses[i].bus_type == BusType::PV) pv.push_back(i);
        if (c.buses[i].bus_type == BusType::PQ) pq.push_back(i);
    }
    if (flat_start) {
        const auto label = component_labels(c);
        std::unordered_map<std::size_t, double> slack_angle;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (c.buses[i].bus_type == BusType::Slack) slack_angle[label[i]] = va(i);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (c.buses[i].bus_type == BusType::Slack) continue;
            const auto it = slack_angle.find(label[i]);
            va(i) = it == slack_angle.end() ? 0.0 : it->second;
            if (c.buses[i].bus_type == BusType::PQ) vm(i) = 1.0;
        }
    }

    std::vector<Eigen::Index> pvpq(pv);
    pvpq.insert(pvpq.end(), pq.begin(), pq.end());
    const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());

    auto voltage = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
        return v;
    };
    auto residual = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd mis = v.cwiseProduct((ybus * v).conjugate()) - sbus;
        Eigen::VectorXd f(npvpq + npq);
        for (Eigen::Index k = 0; k < npvpq; ++k) f(k) = mis(pvpq[k]).real();
        for (Eigen::Index k = 0; k < npq; ++k) f(npvpq + k) = mis(pq[k]).imag();
        return f;
    };

    DenseSolution sol;
    Eigen::VectorXcd v = voltage();
    Eigen::VectorXd f = residual(v);
    double norm_f = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    std::size_t it = 0;
    bool singular = false;
    while (norm_f >= tol && it < max_iter) {
        const Eigen::VectorXcd ibus = ybus * v;
        const Eigen::VectorXcd vnorm = v.cwiseQuotient(v.cwiseAbs().cast<Complex>());
        // dS/dVm and dS/dVa in polar form.
        const Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
                                        Eigen::MatrixXcd(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        Eigen::MatrixXcd ds_dva = -(ybus * v.asDiagonal());
        ds_dva.diagonal() += ibus;
        ds_dva = Complex(0.0, 1.0) * (v.asDiagonal() * ds_dva.conjugate());

        Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
        for (Eigen::Index r = 0; r < npvpq; ++r) {
            for (Eigen::Index k = 0; k < npvpq; ++k) jac(r, k) = ds_dva(pvpq[r], pvpq[k]).real();
            for (Eigen::Index k = 0; k < npq; ++k) jac(r, npvpq + k) = ds_dvm(pvpq[r], pq[k]).real();
        }
        for (Eigen::Index r = 0; r < npq; ++r) {
            for (Eigen::Index k = 0; k < npvpq; ++k) jac(npvpq + r, k) = ds_dva(pq[r], pvpq[k]).imag();
            for (Eigen::Index k = 0; k < npq; ++k) jac(npvpq + r, npvpq + k) = ds_dvm(pq[r], pq[k]).imag();
        }

        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) {
            singular = true;
            break;
        }
        const Eigen::VectorXd dx = -lu.solve(f);
        if (!dx.allFinite()) {
            singular = true;
            break;
        }
        for (Eigen::Index k = 0; k < npvpq; ++k) va(pvpq[k]) += dx(k);
        for (Eigen::Index k = 0; k < npq; ++k) vm(pq[k]) += dx(npvpq + k);
        v = voltage();
        f = residual(v);
        norm_f = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
        ++it;
    }

    sol.iterations = it;
    sol.max_mismatch = norm_f;
    if (singular) {
        sol.status = NewtonStatus::SingularJacobian;
    } else if (norm_f < tol) {
        sol.status = NewtonStatus::Converged;
    }
    sol.converged = sol.status == NewtonStatus::Converged;

    const Eigen::VectorXcd s_calc = v.cwiseProduct((ybus * v).conjugate());
    sol.bus_ids.reserve(n);
    sol.v.reserve(n);
    sol.q_gen.assign(n, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        sol.bus_ids.push_back(c.buses[i].id);
        sol.v.push_back(v(i));
        if (c.buses[i].bus_type != BusType::PQ) sol.q_gen[i] = s_calc(i).imag() + c.buses[i].qd / c.base_mva;
    }
    return sol;
}

SolutionDiff diff_solutions(const VoltageProfile& a, const VoltageProfile& b) {
    if (a.bus_ids.size() != a.v.size() || b.bus_ids.size() != b.v.size()) {
        throw std::invalid_argument("diff_solutions: ids and voltages differ in length");
    }
    if (a.bus_ids.size() != b.bus_ids.size()) throw std::invalid_argument("diff_solutions: bus sets differ");
    std::unordered_map<int, std::size_t> in_b;
    for (std::size_t k = 0; k < b.bus_ids.size(); ++k) in_b.emplace(b.bus_ids[k], k);

    SolutionDiff d;
    bool first = true;
    for (std::size_t k = 0; k < a.bus_ids.size(); ++k) {
        const auto it = in_b.find(a.bus_ids[k]);
        if (it == in_b.end()) throw std::invalid_argument("diff_solutions: bus sets differ");
        const Complex va = a.v[k];
        const Complex vb = b.v[it->second];
        double dang = std::remainder(std::arg(va) - std::arg(vb), 2.0 * std::numbers::pi);
        dang = std::abs(dang);
        const double dmag = std::abs(std::abs(va) - std::abs(vb));
        if (first || dang > d.max_angle_diff) {
            d.max_angle_diff = dang;
            d.argmax_bus_angle = a.bus_ids[k];
        }
        if (first || dmag > d.max_mag_diff) {
            d.max_mag_diff = dmag;
            d.argmax_bus_mag = a.bus_ids[k];
        }
        first = false;
    }
    return d;
}

const char* to_string(NewtonStatus s) noexcept {
    switch (s) {
        case NewtonStatus::Converged: return "converged";
        case NewtonStatus::MaxIterations: return "max-iterations";
        case NewtonStatus::SingularJacobian: return "singular-jacobian";
    }
    return "unknown";
}

}  // namespace graphpf::oracle
