#pragma once

#include <algorithm>
#include <any>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphpf/worker_pool.hpp"

namespace graphpf {

using VertexId = std::uint32_t;

/// One entry of a vertex's edge list as seen by the edge phase.
struct EdgeRef {
    VertexId neighbor = 0;
    std::uint32_t edge = 0;
};

/// CSR edge lists: for each vertex, the edges its edge phase visits. `owner` maps each
/// entry back to its vertex so entries can also be split across workers directly.
struct Topology {
    std::vector<std::size_t> offsets;
    std::vector<EdgeRef> refs;
    std::vector<VertexId> owner;

    std::size_t num_vertices() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::span<const EdgeRef> edges_of(VertexId v) const noexcept {
        return {refs.data() + offsets[v], refs.data() + offsets[v + 1]};
    }

    enum class Gather { In, Out, Both };

    /// Edge i of `edges` is (src, dst). Gather::In lists, for each vertex, the sources of
    /// its incoming edges; Out lists destinations; Both lists both. Entries keep edge order.
    static Topology from_edges(std::size_t n, std::span<const std::pair<VertexId, VertexId>> edges, Gather gather);
};

struct EngineConfig {
    unsigned workers = 1;
    std::size_t max_supersteps = 10000;
    bool deterministic_reduction = true;
    std::chrono::milliseconds superstep_budget{0};  // 0 disables the timeout
};

template <class Value>
struct VertexUpdate {
    Value value;
    bool changed = false;
};

/// Map (edge_phase, folded per vertex) plus reduce (vertex_phase). `combine` must be
/// commutative and associative with `accumulator_identity` as its unit; it is used when
/// edge lists are split across workers.
template <class Value, class Acc>
struct VertexProgram {
    Acc accumulator_identity{};
    std::function<Acc(VertexId self, const Value& self_value, const EdgeRef& edge, const Value& neighbor_value,
                      Acc acc)>
        edge_phase;
    std::function<Acc(const Acc&, const Acc&)> combine;
    std::function<VertexUpdate<Value>(VertexId self, const Value& self_value, const Acc& acc)> vertex_phase;
};

struct SuperstepRecord {
    std::size_t index = 0;
    std::size_t changed = 0;
    double metric = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0.0;
};

void write_superstep_trace_csv(std::ostream& out, std::span<const SuperstepRecord> trace);

class SuperstepTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(std::size_t supersteps, double last_metric)
        : std::runtime_error("no convergence after " + std::to_string(supersteps) + " supersteps (last metric " +
                             std::to_string(last_metric) + ")"),
          supersteps_(supersteps),
          last_metric_(last_metric) {}
    std::size_t supersteps() const noexcept { return supersteps_; }
    double last_metric() const noexcept { return last_metric_; }

private:
    std::size_t supersteps_;
    double last_metric_;
};

/// Bulk-synchronous vertex-centric executor. Values are double-buffered: every edge
/// phase in a superstep reads the pre-superstep snapshot, and new values are published
/// only at the barrier.
template <class Value>
class BspEngine {
public:
    using StopPredicate = std::function<bool(std::size_t superstep, std::span<const VertexId> changed, double metric)>;
    using Metric = std::function<double(std::span<const Value> before, std::span<const Value> after)>;

    BspEngine(const Topology& topology, std::vector<Value> initial, EngineConfig config = {})
        : topo_(topology), config_(config), pool_(config.workers), current_(std::move(initial)) {
        if (current_.size() != topo_.num_vertices()) {
            throw std::invalid_argument("BspEngine: value count does not match vertex count");
        }
        next_ = current_;
    }

    const std::vector<Value>& values() const noexcept { return current_; }
    const std::vector<SuperstepRecord>& trace() const noexcept { return trace_; }
    const EngineConfig& config() const noexcept { return config_; }
    std::size_t supersteps_run() const noexcept { return trace_.size(); }

    /// One superstep over every vertex. Returns the ascending list of changed vertices.
    template <class Acc>
    std::vector<VertexId> run_superstep(const VertexProgram<Value, Acc>& program) {
        return step(program, {}, true);
    }

    /// One superstep over `active` (ascending, non-empty). Inactive vertices keep their value.
    template <class Acc>
    std::vector<VertexId> run_superstep(const VertexProgram<Value, Acc>& program, std::span<const VertexId> active) {
        if (active.empty()) throw std::invalid_argument("run_superstep: active set is empty");
        if (!std::is_sorted(active.begin(), active.end())) {
            throw std::invalid_argument("run_superstep: active set must be ascending");
        }
        return step(program, active, false);
    }

    /// Supersteps over all vertices until `stop` holds. The metric and predicate run on the
    /// calling thread between supersteps. Throws NonConvergence at max_supersteps.
    template <class Acc>
    std::size_t run_until(const VertexProgram<Value, Acc>& program, const StopPredicate& stop,
                          const Metric& metric = {}) {
        std::vector<Value> before;
        double last_metric = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t s = 0; s < config_.max_supersteps; ++s) {
            if (metric) before = current_;
            const auto changed = run_superstep(program);
            if (metric) {
                last_metric = metric(before, current_);
                trace_.back().metric = last_metric;
            }
            if (stop(s, changed, last_metric)) return s + 1;
        }
        throw NonConvergence(config_.max_supersteps, last_metric);
    }

private:
    using Clock = std::chrono::steady_clock;

    template <class Acc>
    std::vector<VertexId> step(const VertexProgram<Value, Acc>& program, std::span<const VertexId> active, bool all) {
        const auto t0 = Clock::now();
        const unsigned workers = pool_.size();
        std::vector<std::vector<VertexId>> changed_parts(workers);
        const std::size_t n = current_.size();

        auto reduce_vertex = [&](VertexId v, const Acc& acc, std::vector<VertexId>& changed) {
            auto upd = program.vertex_phase(v, current_[v], acc);
            if (upd.changed) changed.push_back(v);
            next_[v] = std::move(upd.value);
        };
        auto gather = [&](VertexId v) {
            Acc acc = program.accumulator_identity;
            for (const auto& e : topo_.edges_of(v)) {
                acc = program.edge_phase(v, current_[v], e, current_[e.neighbor], std::move(acc));
            }
            return acc;
        };

        if (!all) {
            next_ = current_;
            pool_.for_ranges(active.size(), [&](IndexRange r, unsigned w) {
                for (std::size_t k = r.begin; k < r.end; ++k) reduce_vertex(active[k], gather(active[k]), changed_parts[w]);
            });
        } else if (config_.deterministic_reduction || workers == 1) {
            pool_.for_ranges(n, [&](IndexRange r, unsigned w) {
                for (std::size_t v = r.begin; v < r.end; ++v) {
                    reduce_vertex(static_cast<VertexId>(v), gather(static_cast<VertexId>(v)), changed_parts[w]);
                }
            });
        } else {
            // Edge entries are split evenly across workers regardless of vertex boundaries;
            // each worker folds into private partials that are combined per vertex.
            auto& parts = partials<Acc>(program.accumulator_identity);
            pool_.for_ranges(topo_.refs.size(), [&](IndexRange r, unsigned w) {
                auto& acc = parts[w];
                for (std::size_t k = r.begin; k < r.end; ++k) {
                    const VertexId v = topo_.owner[k];
                    const auto& e = topo_.refs[k];
                    acc[v] = program.edge_phase(v, current_[v], e, current_[e.neighbor], std::move(acc[v]));
                }
            });
            pool_.for_ranges(n, [&](IndexRange r, unsigned w) {
                for (std::size_t v = r.begin; v < r.end; ++v) {
                    Acc acc = program.accumulator_identity;
                    for (auto& part : parts) {
                        acc = program.combine(acc, part[v]);
                        part[v] = program.accumulator_identity;
                    }
                    reduce_vertex(static_cast<VertexId>(v), acc, changed_parts[w]);
                }
            });
        }

        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        if (config_.superstep_budget.count() > 0 && ms > static_cast<double>(config_.superstep_budget.count())) {
            throw SuperstepTimeout("superstep " + std::to_string(trace_.size()) + " took " + std::to_string(ms) +
                                   " ms, budget " + std::to_string(config_.superstep_budget.count()) + " ms");
        }
        current_.swap(next_);

        std::vector<VertexId> changed;
        for (auto& part : changed_parts) changed.insert(changed.end(), part.begin(), part.end());
        trace_.push_back({trace_.size(), changed.size(), std::numeric_limits<double>::quiet_NaN(), ms});
        return changed;
    }

    // Per-worker partial accumulators for the split-edge reduction. Stored type-erased so
    // one engine can run programs with different accumulator types.
    template <class Acc>
    std::vector<std::vector<Acc>>& partials(const Acc& identity) {
        auto* typed = std::any_cast<std::vector<std::vector<Acc>>>(&partial_store_);
        if (!typed) {
            partial_store_ = std::vector<std::vector<Acc>>(pool_.size(), std::vector<Acc>(current_.size(), identity));
            typed = std::any_cast<std::vector<std::vector<Acc>>>(&partial_store_);
        }
        return *typed;
    }

    const Topology& topo_;
    EngineConfig config_;
    WorkerPool pool_;
    std::vector<Value> current_;
    std::vector<Value> next_;
    std::vector<SuperstepRecord> trace_;
    std::any partial_store_;
};

}  // namespace graphpf
