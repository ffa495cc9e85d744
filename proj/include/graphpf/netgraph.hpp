#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphpf/caseio.hpp"

namespace graphpf {

class WorkerPool;

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;
using Complex = std::complex<double>;

/// Bus vertex of the network property graph. All electrical quantities are per unit.
struct BusVertex {
    VertexId id = 0;
    int external_id = 0;
    BusType kind = BusType::PQ;
    double p_sched = 0.0;  // generation minus load
    double q_sched = 0.0;
    double p_load = 0.0;
    double q_load = 0.0;
    double v_set = 1.0;    // meaningful for PV and slack buses
    double va_case = 0.0;  // radians
    Complex y_shunt{};
    Complex y_self{};
    Complex v_start{1.0, 0.0};
};

/// Branch edge. `from_v`/`to_v` keep the case orientation, which matters for transformers.
struct BranchEdge {
    VertexId from_v = 0;
    VertexId to_v = 0;
    std::size_t branch_index = 0;  // row in RawCase::branches
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0;
    Complex tap{1.0, 0.0};  // ratio * e^{j shift}
    Complex y_series{};
    Complex y_ft{};  // Y(from, to)
    Complex y_tf{};  // Y(to, from)
    Complex y_ff_contrib{};
    Complex y_tt_contrib{};
};

enum class EdgeEnd : std::uint8_t { From, To };

/// One adjacency entry: the edge, the vertex at its other end, and which end the owner sits on.
struct Incidence {
    EdgeId edge = 0;
    VertexId other = 0;
    EdgeEnd end = EdgeEnd::From;
};

struct NetworkGraph {
    std::vector<BusVertex> vertices;
    std::vector<BranchEdge> edges;
    std::vector<std::size_t> adj_offsets;  // CSR offsets, size vertices + 1
    std::vector<Incidence> adj;
    double base_mva = 100.0;
    std::unordered_map<int, VertexId> index_of_external;
    bool admittance_ready = false;

    std::size_t num_vertices() const noexcept { return vertices.size(); }
    std::size_t num_edges() const noexcept { return edges.size(); }

    std::span<const Incidence> incident(VertexId v) const noexcept {
        return {adj.data() + adj_offsets[v], adj.data() + adj_offsets[v + 1]};
    }

    /// Y(v, other) for one adjacency entry of v.
    Complex mutual(const Incidence& inc) const noexcept {
        const auto& e = edges[inc.edge];
        return inc.end == EdgeEnd::From ? e.y_ft : e.y_tf;
    }

    VertexId vertex_of(int external_id) const;
};

class BuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularBranchError : public std::runtime_error {
public:
    SingularBranchError(const std::string& what, std::size_t branch_index)
        : std::runtime_error(what), branch_index_(branch_index) {}
    std::size_t branch_index() const noexcept { return branch_index_; }

private:
    std::size_t branch_index_;
};

/// One vertex per bus (case order), one edge per in-service branch. Loads, generation
/// and shunts are converted to per unit on base_mva. Admittance attributes are left
/// empty until compute_admittance runs.
NetworkGraph build_graph(const RawCase& c);

/// Fills the edge admittance terms (edge phase) and then every vertex's y_self (vertex
/// phase). With a pool, each phase is split over the pool's workers.
void compute_admittance(NetworkGraph& g, WorkerPool* pool = nullptr);

/// build_graph followed by compute_admittance.
NetworkGraph make_network(const RawCase& c, WorkerPool* pool = nullptr);

/// y_self_i plus the sum of the row's off-diagonal terms.
std::vector<Complex> row_sum_residual(const NetworkGraph& g);

/// Row-major dense Y reassembled from the graph attributes.
std::vector<Complex> assemble_dense(const NetworkGraph& g);

/// Debug dumps for diffing against the dense reference.
void write_vertex_admittance_csv(std::ostream& out, const NetworkGraph& g);
void write_edge_admittance_csv(std::ostream& out, const NetworkGraph& g);

}  // namespace graphpf
