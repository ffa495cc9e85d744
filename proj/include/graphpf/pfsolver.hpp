#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphpf/engine.hpp"
#include "graphpf/netgraph.hpp"

namespace graphpf {

enum class StopCriterion { VoltageDelta, PowerMismatch };

struct SolverConfig {
    double damping = 1.0;  // weight of the new iterate, in (0, 1]
    double tol_v = 3e-5;   // pu, max |V_new - V_old|
    double tol_s = 1e-6;   // pu, max |dP|, |dQ|
    StopCriterion criterion = StopCriterion::VoltageDelta;
    std::size_t block_size = 128;
    std::size_t max_iter = 5000;
    bool flat_start = true;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// Level-2 blocks over the non-slack vertices. Blocks run concurrently against the
/// snapshot; vertices inside a block run in order against fresh values.
struct LevelPartition {
    static constexpr std::size_t kNoBlock = std::numeric_limits<std::size_t>::max();

    std::vector<std::vector<VertexId>> blocks;
    std::vector<std::size_t> block_of;  // kNoBlock for slack vertices
};

struct IterationRecord {
    std::size_t iter = 0;
    double max_dv = 0.0;
    double max_dp = 0.0;
    double max_dq = 0.0;
    double wall_ms = 0.0;
};

struct SolverState {
    std::vector<Complex> v;
    std::vector<double> q_pv;  // net reactive injection, tracked for PV vertices
    std::size_t iter = 0;
    std::vector<IterationRecord> trace;
};

/// Branch end powers in MW / MVAr.
struct BranchFlow {
    std::size_t branch_index = 0;
    int from_bus = 0;
    int to_bus = 0;
    double p_from = 0.0;
    double q_from = 0.0;
    double p_to = 0.0;
    double q_to = 0.0;
    Complex loss{};  // S_from + S_to
};

enum class SolveStatus { Converged, MaxIterations, Diverged };

struct SolveReport {
    SolveStatus status = SolveStatus::MaxIterations;
    bool converged = false;
    StopCriterion criterion = StopCriterion::VoltageDelta;
    std::size_t iterations = 0;
    double elapsed_ms = 0.0;
    std::vector<Complex> final_v;
    std::vector<double> q_pv;
    double mismatch_final = 0.0;
    std::vector<BranchFlow> branch_flows;
    std::vector<IterationRecord> trace;
    std::optional<int> collapsed_bus;  // external id, set when Diverged
    std::string message;
};

/// Raised when a bus voltage magnitude falls below kCollapseThreshold or stops being finite.
class NumericCollapse : public std::runtime_error {
public:
    NumericCollapse(VertexId vertex, int external_id)
        : std::runtime_error("voltage collapse at bus " + std::to_string(external_id)),
          vertex_(vertex),
          external_id_(external_id) {}
    VertexId vertex() const noexcept { return vertex_; }
    int external_id() const noexcept { return external_id_; }

private:
    VertexId vertex_;
    int external_id_;
};

inline constexpr double kCollapseThreshold = 1e-6;

SolverState init_state(const NetworkGraph& g, const SolverConfig& config);

LevelPartition partition_levels(const NetworkGraph& g, std::size_t block_size);

/// Sum over incident edges of Y_ij * V_j, with V_j = read(j). This is the edge phase of
/// every per-bus computation below.
template <class Read>
Complex mutual_sum(const NetworkGraph& g, VertexId i, Read&& read) {
    Complex s{};
    for (const auto& inc : g.incident(i)) s += g.mutual(inc) * read(inc.other);
    return s;
}

/// Gauss-Seidel/Jacobi voltage candidate:
///   V = ((P - jQ) / conj(V_i) - sum_j Y_ij V_j) / Y_ii
/// `q` is the reactive injection to use (tracked value for PV, scheduled for PQ).
Complex gs_update_bus(const BusVertex& bus, Complex v_i, double q, Complex mutual);

inline Complex apply_damping(Complex v_old, Complex v_cand, double alpha) {
    return (1.0 - alpha) * v_old + alpha * v_cand;
}

/// Reactive injection implied by the present iterate, self term included.
inline double pv_reactive_injection(const BusVertex& bus, Complex v_i, Complex mutual) {
    return -std::imag(std::conj(v_i) * (mutual + bus.y_self * v_i));
}

/// Same angle, magnitude pinned to the setpoint.
inline Complex rescale_to_setpoint(Complex v, double v_set) {
    return std::polar(v_set, std::arg(v));
}

struct Mismatch {
    double dp = 0.0;
    double dq = 0.0;
};

/// dP for PV and PQ, dQ for PQ only; slack reports zeros.
Mismatch compute_mismatch(const BusVertex& bus, Complex v_i, Complex mutual);

/// One outer iteration (one superstep). Returns max |V_new - V_old|. Throws NumericCollapse.
double bilevel_sweep(const NetworkGraph& g, const LevelPartition& partition, SolverState& state,
                     const SolverConfig& config, WorkerPool& pool);

struct MismatchSummary {
    double max_dp = 0.0;
    double max_dq = 0.0;
    double max() const noexcept { return std::max(max_dp, max_dq); }
};

MismatchSummary evaluate_mismatch(const NetworkGraph& g, std::span<const Complex> v, WorkerPool* pool = nullptr);

/// Full solve. Never throws for numeric trouble: divergence and iteration caps are
/// reported through SolveReport::status.
SolveReport solve(const NetworkGraph& g, const SolverConfig& config, const EngineConfig& engine = {});

std::vector<BranchFlow> branch_flows(const NetworkGraph& g, std::span<const Complex> v);

/// Net injection per bus in pu, from the admittance rows: V_i * conj(Y_ii V_i + sum Y_ij V_j).
std::vector<Complex> bus_injections(const NetworkGraph& g, std::span<const Complex> v);

/// System totals in pu. generation is injection plus load at every bus; losses and shunt
/// come from the branch flows and the bus shunts.
struct PowerBalance {
    Complex generation{};
    Complex load{};
    Complex losses{};
    Complex shunt{};
    Complex residual() const noexcept { return generation - load - losses - shunt; }
};

PowerBalance power_balance(const NetworkGraph& g, std::span<const Complex> v, std::span<const BranchFlow> flows);

/// Results file: `bus,<id>,<vm pu>,<va deg>` lines then
/// `branch,<from>,<to>,<P_from>,<Q_from>,<P_to>,<Q_to>` lines, each block under a `#` header.
void write_results(std::ostream& out, const NetworkGraph& g, std::span<const Complex> v,
                   std::span<const BranchFlow> flows);

/// iter,max_dv,max_dp,max_dq,ms
void write_trace_csv(std::ostream& out, std::span<const IterationRecord> trace);

const char* to_string(SolveStatus s) noexcept;
const char* to_string(StopCriterion c) noexcept;

}  // namespace graphpf
