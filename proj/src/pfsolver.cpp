#include "graphpf/pfsolver.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <numbers>
#include <ostream>

#include "graphpf/worker_pool.hpp"

namespace graphpf {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Case angle of the slack bus governing each vertex's island (0 where none is reachable).
std::vector<double> island_reference_angles(const NetworkGraph& g) {
    std::vector<double> ref(g.num_vertices(), 0.0);
    std::vector<bool> seen(g.num_vertices(), false);
    std::deque<VertexId> queue;
    for (const auto& bus : g.vertices) {
        if (bus.kind != BusType::Slack || seen[bus.id]) continue;
        seen[bus.id] = true;
        queue.push_back(bus.id);
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            ref[u] = bus.va_case;
            for (const auto& inc : g.incident(u)) {
                if (!seen[inc.other]) {
                    seen[inc.other] = true;
                    queue.push_back(inc.other);
                }
            }
        }
    }
    return ref;
}

}  // namespace

void SolverConfig::validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
    if (!(tol_v > 0.0)) throw std::invalid_argument("tol_v must be positive");
    if (!(tol_s > 0.0)) throw std::invalid_argument("tol_s must be positive");
    if (block_size == 0) throw std::invalid_argument("block_size must be at least 1");
    if (max_iter == 0) throw std::invalid_argument("max_iter must be at least 1");
}

SolverState init_state(const NetworkGraph& g, const SolverConfig& config) {
    SolverState s;
    const std::size_t n = g.num_vertices();
    s.v.resize(n);
    s.q_pv.assign(n, 0.0);

    std::vector<double> ref;
    if (config.flat_start) ref = island_reference_angles(g);

    for (const auto& bus : g.vertices) {
        if (bus.kind == BusType::PV) s.q_pv[bus.id] = bus.q_sched;
        if (bus.kind == BusType::Slack) {
            s.v[bus.id] = std::polar(bus.v_set, bus.va_case);
        } else if (config.flat_start) {
            s.v[bus.id] = std::polar(bus.kind == BusType::PV ? bus.v_set : 1.0, ref[bus.id]);
        } else {
            s.v[bus.id] = bus.v_start;
        }
    }
    return s;
}

LevelPartition partition_levels(const NetworkGraph& g, std::size_t block_size) {
    if (block_size == 0) throw std::invalid_argument("partition_levels: block_size must be at least 1");
    LevelPartition p;
    p.block_of.assign(g.num_vertices(), LevelPartition::kNoBlock);
    for (const auto& bus : g.vertices) {
        if (bus.kind == BusType::Slack) continue;
        if (p.blocks.empty() || p.blocks.back().size() == block_size) p.blocks.emplace_back();
        p.blocks.back().push_back(bus.id);
        p.block_of[bus.id] = p.blocks.size() - 1;
    }
    return p;
}

Complex gs_update_bus(const BusVertex& bus, Complex v_i, double q, Complex mutual) {
    if (!finite(v_i) || std::abs(v_i) < kCollapseThreshold) throw NumericCollapse(bus.id, bus.external_id);
    const Complex cand = (Complex(bus.p_sched, -q) / std::conj(v_i) - mutual) / bus.y_self;
    if (!finite(cand)) throw NumericCollapse(bus.id, bus.external_id);
    return cand;
}

Mismatch compute_mismatch(const BusVertex& bus, Complex v_i, Complex mutual) {
    if (bus.kind == BusType::Slack) return {};
    const Complex s = v_i * std::conj(mutual + bus.y_self * v_i);
    Mismatch m;
    m.dp = bus.p_sched - s.real();
    if (bus.kind == BusType::PQ) m.dq = bus.q_sched - s.imag();
    return m;
}

double bilevel_sweep(const NetworkGraph& g, const LevelPartition& partition, SolverState& state,
                     const SolverConfig& config, WorkerPool& pool) {
    const std::vector<Complex>& snapshot = state.v;
    std::vector<Complex> fresh(snapshot);
    std::vector<double> block_dv(partition.blocks.size(), 0.0);
    const double alpha = config.damping;

    pool.for_ranges(partition.blocks.size(), [&](IndexRange range, unsigned) {
        for (std::size_t b = range.begin; b < range.end; ++b) {
            // In-block neighbours are read from `fresh` (already updated when earlier in
            // the block), everything else from the snapshot.
            auto read = [&](VertexId j) { return partition.block_of[j] == b ? fresh[j] : snapshot[j]; };
            double dv = 0.0;
            for (const VertexId i : partition.blocks[b]) {
                const auto& bus = g.vertices[i];
                const Complex v_old = fresh[i];
                const Complex sum = mutual_sum(g, i, read);
                double q = bus.q_sched;
                if (bus.kind == BusType::PV) {
                    q = pv_reactive_injection(bus, v_old, sum);
                    state.q_pv[i] = q;
                }
                Complex v = apply_damping(v_old, gs_update_bus(bus, v_old, q, sum), alpha);
                if (bus.kind == BusType::PV) v = rescale_to_setpoint(v, bus.v_set);
                fresh[i] = v;
                dv = std::max(dv, std::abs(v - v_old));
            }
            block_dv[b] = dv;
        }
    });

    state.v.swap(fresh);
    ++state.iter;
    return block_dv.empty() ? 0.0 : *std::max_element(block_dv.begin(), block_dv.end());
}

MismatchSummary evaluate_mismatch(const NetworkGraph& g, std::span<const Complex> v, WorkerPool* pool) {
    auto scan = [&](IndexRange r) {
        MismatchSummary s;
        for (std::size_t i = r.begin; i < r.end; ++i) {
            const auto id = static_cast<VertexId>(i);
            const auto m = compute_mismatch(g.vertices[i], v[i], mutual_sum(g, id, [&](VertexId j) { return v[j]; }));
            s.max_dp = std::max(s.max_dp, std::abs(m.dp));
            s.max_dq = std::max(s.max_dq, std::abs(m.dq));
        }
        return s;
    };
    if (!pool) return scan({0, g.num_vertices()});

    std::vector<MismatchSummary> parts(pool->size());
    pool->for_ranges(g.num_vertices(), [&](IndexRange r, unsigned w) { parts[w] = scan(r); });
    MismatchSummary total;
    for (const auto& p : parts) {
        total.max_dp = std::max(total.max_dp, p.max_dp);
        total.max_dq = std::max(total.max_dq, p.max_dq);
    }
    return total;
}

SolveReport solve(const NetworkGraph& g, const SolverConfig& config, const EngineConfig& engine) {
    config.validate();
    if (!g.admittance_ready) throw std::invalid_argument("solve: admittance has not been computed");

    const auto t0 = Clock::now();
    WorkerPool pool(engine.workers);
    SolverState state = init_state(g, config);
    const LevelPartition partition = partition_levels(g, config.block_size);

    SolveReport report;
    report.criterion = config.criterion;
    MismatchSummary mm;
    for (std::size_t it = 1; it <= config.max_iter; ++it) {
        const auto t_it = Clock::now();
        double dv = 0.0;
        try {
            dv = bilevel_sweep(g, partition, state, config, pool);
        } catch (const NumericCollapse& e) {
            report.status = SolveStatus::Diverged;
            report.collapsed_bus = e.external_id();
            report.message = e.what();
            break;
        }
        mm = evaluate_mismatch(g, state.v, &pool);
        state.trace.push_back({it, dv, mm.max_dp, mm.max_dq, ms_since(t_it)});

        const bool done = config.criterion == StopCriterion::VoltageDelta ? dv < config.tol_v : mm.max() < config.tol_s;
        if (done) {
            report.status = SolveStatus::Converged;
            break;
        }
    }

    report.converged = report.status == SolveStatus::Converged;
    report.iterations = state.iter;
    report.mismatch_final = mm.max();
    report.final_v = state.v;
    report.q_pv = state.q_pv;
    if (report.status != SolveStatus::Diverged) report.branch_flows = branch_flows(g, state.v);
    if (report.status == SolveStatus::MaxIterations) {
        report.message = "no convergence within " + std::to_string(config.max_iter) + " iterations";
    }
    report.trace = std::move(state.trace);
    report.elapsed_ms = ms_since(t0);
    return report;
}

std::vector<BranchFlow> branch_flows(const NetworkGraph& g, std::span<const Complex> v) {
    std::vector<BranchFlow> flows;
    flows.reserve(g.num_edges());
    for (const auto& e : g.edges) {
        const Complex vf = v[e.from_v];
        const Complex vt = v[e.to_v];
        const Complex s_from = vf * std::conj(e.y_ff_contrib * vf + e.y_ft * vt) * g.base_mva;
        const Complex s_to = vt * std::conj(e.y_tf * vf + e.y_tt_contrib * vt) * g.base_mva;
        flows.push_back({e.branch_index, g.vertices[e.from_v].external_id, g.vertices[e.to_v].external_id,
                         s_from.real(), s_from.imag(), s_to.real(), s_to.imag(), s_from + s_to});
    }
    return flows;
}

std::vector<Complex> bus_injections(const NetworkGraph& g, std::span<const Complex> v) {
    std::vector<Complex> s(g.num_vertices());
    for (VertexId i = 0; i < g.num_vertices(); ++i) {
        const Complex sum = mutual_sum(g, i, [&](VertexId j) { return v[j]; });
        s[i] = v[i] * std::conj(sum + g.vertices[i].y_self * v[i]);
    }
    return s;
}

PowerBalance power_balance(const NetworkGraph& g, std::span<const Complex> v, std::span<const BranchFlow> flows) {
    PowerBalance pb;
    const auto inj = bus_injections(g, v);
    for (const auto& bus : g.vertices) {
        const Complex load(bus.p_load, bus.q_load);
        pb.load += load;
        pb.generation += inj[bus.id] + load;
        pb.shunt += std::norm(v[bus.id]) * std::conj(bus.y_shunt);
    }
    for (const auto& f : flows) pb.losses += f.loss / g.base_mva;
    return pb;
}

void write_results(std::ostream& out, const NetworkGraph& g, std::span<const Complex> v,
                   std::span<const BranchFlow> flows) {
    const auto old_precision = out.precision(12);
    out << "# bus,external_id,vm_pu,va_deg\n";
    for (const auto& bus : g.vertices) {
        out << "bus," << bus.external_id << ',' << std::abs(v[bus.id]) << ','
            << std::arg(v[bus.id]) * 180.0 / std::numbers::pi << '\n';
    }
    out << "# branch,from,to,p_from_mw,q_from_mvar,p_to_mw,q_to_mvar\n";
    for (const auto& f : flows) {
        out << "branch," << f.from_bus << ',' << f.to_bus << ',' << f.p_from << ',' << f.q_from << ',' << f.p_to << ','
            << f.q_to << '\n';
    }
    out.precision(old_precision);
}

void write_trace_csv(std::ostream& out, std::span<const IterationRecord> trace) {
    const auto old_precision = out.precision(12);
    out << "iter,max_dv,max_dp,max_dq,ms\n";
    for (const auto& r : trace) {
        out << r.iter << ',' << r.max_dv << ',' << r.max_dp << ',' << r.max_dq << ',' << r.wall_ms << '\n';
    }
    out.precision(old_precision);
}

const char* to_string(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIterations: return "max-iterations";
        case SolveStatus::Diverged: return "diverged";
    }
    return "unknown";
}

const char* to_string(StopCriterion c) noexcept {
    return c == StopCriterion::VoltageDelta ? "voltage" : "mismatch";
}

}  // namespace graphpf
