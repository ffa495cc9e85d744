#include "graphpf/netgraph.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "graphpf/worker_pool.hpp"

namespace graphpf {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

template <class Body>
void split(WorkerPool* pool, std::size_t n, Body&& body) {
    if (pool) {
        pool->for_ranges(n, [&](IndexRange r, unsigned) { body(r); });
    } else {
        body(IndexRange{0, n});
    }
}

void fill_edge(BranchEdge& e) {
    if (e.r == 0.0 && e.x == 0.0) {
        throw SingularBranchError("branch #" + std::to_string(e.branch_index) + " has zero impedance (r = x = 0)",
                                  e.branch_index);
    }
    const Complex y = 1.0 / Complex(e.r, e.x);
    const Complex y_tt = y + Complex(0.0, e.b_charge / 2.0);
    e.y_series = y;
    e.y_tt_contrib = y_tt;
    e.y_ff_contrib = y_tt / std::norm(e.tap);
    e.y_ft = -y / std::conj(e.tap);
    e.y_tf = -y / e.tap;
}

}  // namespace

VertexId NetworkGraph::vertex_of(int external_id) const {
    const auto it = index_of_external.find(external_id);
    if (it == index_of_external.end()) throw std::out_of_range("no bus " + std::to_string(external_id));
    return it->second;
}

NetworkGraph build_graph(const RawCase& c) {
    NetworkGraph g;
    g.base_mva = c.base_mva;
    if (!(c.base_mva > 0.0)) throw BuildError("baseMVA must be positive");

    const double base = c.base_mva;
    g.vertices.reserve(c.buses.size());
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& b = c.buses[i];
        if (!g.index_of_external.emplace(b.id, static_cast<VertexId>(i)).second) {
            throw BuildError("duplicate bus id " + std::to_string(b.id));
        }
        BusVertex v;
        v.id = static_cast<VertexId>(i);
        v.external_id = b.id;
        v.kind = b.bus_type;
        v.p_sched = -b.pd / base;
        v.q_sched = -b.qd / base;
        v.p_load = b.pd / base;
        v.q_load = b.qd / base;
        v.y_shunt = Complex(b.gs, b.bs) / base;
        v.v_set = b.vm > 0.0 ? b.vm : 1.0;
        v.va_case = b.va * kDegToRad;
        g.vertices.push_back(v);
    }

    for (const auto& gen : c.gens) {
        if (!gen.in_service) continue;
        const auto it = g.index_of_external.find(gen.bus_id);
        if (it == g.index_of_external.end()) {
            throw BuildError("generator at unknown bus " + std::to_string(gen.bus_id));
        }
        auto& v = g.vertices[it->second];
        v.p_sched += gen.pg / base;
        v.q_sched += gen.qg / base;
        if (v.kind != BusType::PQ) v.v_set = gen.vg;  // last in-service generator wins
    }
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        auto& v = g.vertices[i];
        const double mag = v.kind == BusType::PQ ? (c.buses[i].vm > 0.0 ? c.buses[i].vm : 1.0) : v.v_set;
        v.v_start = std::polar(mag, v.va_case);
    }

    std::vector<std::size_t> degree(g.vertices.size(), 0);
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        if (!br.in_service) continue;
        const auto f = g.index_of_external.find(br.from_bus);
        const auto t = g.index_of_external.find(br.to_bus);
        if (f == g.index_of_external.end() || t == g.index_of_external.end()) {
            throw BuildError("in-service branch #" + std::to_string(k) + " (" + std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus) + ") references a bus that is not in service");
        }
        if (f->second == t->second) throw BuildError("branch #" + std::to_string(k) + " is a self-loop");
        BranchEdge e;
        e.from_v = f->second;
        e.to_v = t->second;
        e.branch_index = k;
        e.r = br.r;
        e.x = br.x;
        e.b_charge = br.b;
        e.tap = std::polar(br.tap == 0.0 ? 1.0 : br.tap, br.shift * kDegToRad);
        g.edges.push_back(e);
        ++degree[e.from_v];
        ++degree[e.to_v];
    }

    g.adj_offsets.assign(g.vertices.size() + 1, 0);
    for (std::size_t v = 0; v < degree.size(); ++v) g.adj_offsets[v + 1] = g.adj_offsets[v] + degree[v];
    g.adj.resize(g.adj_offsets.back());
    std::vector<std::size_t> cursor(g.adj_offsets.begin(), g.adj_offsets.end() - 1);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        g.adj[cursor[e.from_v]++] = {static_cast<EdgeId>(k), e.to_v, EdgeEnd::From};
        g.adj[cursor[e.to_v]++] = {static_cast<EdgeId>(k), e.from_v, EdgeEnd::To};
    }
    return g;
}

void compute_admittance(NetworkGraph& g, WorkerPool* pool) {
    // Edge phase: every branch independently.
    split(pool, g.edges.size(), [&](IndexRange r) {
        for (std::size_t k = r.begin; k < r.end; ++k) fill_edge(g.edges[k]);
    });
    // Vertex phase: each bus folds its own incident edges.
    split(pool, g.vertices.size(), [&](IndexRange r) {
        for (std::size_t v = r.begin; v < r.end; ++v) {
            Complex y = g.vertices[v].y_shunt;
            for (const auto& inc : g.incident(static_cast<VertexId>(v))) {
                const auto& e = g.edges[inc.edge];
                y += inc.end == EdgeEnd::From ? e.y_ff_contrib : e.y_tt_contrib;
            }
            g.vertices[v].y_self = y;
        }
    });
    g.admittance_ready = true;
}

NetworkGraph make_network(const RawCase& c, WorkerPool* pool) {
    auto g = build_graph(c);
    compute_admittance(g, pool);
    return g;
}

std::vector<Complex> row_sum_residual(const NetworkGraph& g) {
    std::vector<Complex> res(g.num_vertices());
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        Complex s = g.vertices[v].y_self;
        for (const auto& inc : g.incident(v)) s += g.mutual(inc);
        res[v] = s;
    }
    return res;
}

std::vector<Complex> assemble_dense(const NetworkGraph& g) {
    const std::size_t n = g.num_vertices();
    std::vector<Complex> y(n * n);
    for (VertexId v = 0; v < n; ++v) {
        y[v * n + v] = g.vertices[v].y_self;
        for (const auto& inc : g.incident(v)) y[v * n + inc.other] += g.mutual(inc);
    }
    return y;
}

void write_vertex_admittance_csv(std::ostream& out, const NetworkGraph& g) {
    const auto old_precision = out.precision(17);
    out << "vertex_id,external_id,y_self_re,y_self_im\n";
    for (const auto& v : g.vertices) {
        out << v.id << ',' << v.external_id << ',' << v.y_self.real() << ',' << v.y_self.imag() << '\n';
    }
    out.precision(old_precision);
}

void write_edge_admittance_csv(std::ostream& out, const NetworkGraph& g) {
    const auto old_precision = out.precision(17);
    out << "edge,from,to,y_ft_re,y_ft_im,y_tf_re,y_tf_im,y_ff_re,y_ff_im,y_tt_re,y_tt_im\n";
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const auto& e = g.edges[k];
        out << k << ',' << g.vertices[e.from_v].external_id << ',' << g.vertices[e.to_v].external_id << ','
            << e.y_ft.real() << ',' << e.y_ft.imag() << ',' << e.y_tf.real() << ',' << e.y_tf.imag() << ','
            << e.y_ff_contrib.real() << ',' << e.y_ff_contrib.imag() << ',' << e.y_tt_contrib.real() << ','
            << e.y_tt_contrib.imag() << '\n';
    }
    out.precision(old_precision);
}

}  // namespace graphpf
