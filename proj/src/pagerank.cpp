#include "graphpf/pagerank.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "graphpf/caseio.hpp"

namespace graphpf {

PageRankResult pagerank(const DirectedGraph& g, double d, double tol, std::size_t max_iter, EngineConfig config) {
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("pagerank: damping must lie in (0, 1)");
    if (g.n == 0) throw std::invalid_argument("pagerank: graph is empty");
    if (max_iter == 0) throw std::invalid_argument("pagerank: max_iter must be positive");

    const auto topo = Topology::from_edges(g.n, g.edges, Topology::Gather::In);
    std::vector<std::size_t> out_degree(g.n, 0);
    for (const auto& [src, dst] : g.edges) ++out_degree[src];

    const double n = static_cast<double>(g.n);
    const double teleport = (1.0 - d) / n;

    VertexProgram<double, double> program;
    program.accumulator_identity = 0.0;
    program.edge_phase = [&](VertexId, const double&, const EdgeRef& e, const double& nbr, double acc) {
        // Any in-neighbour has out-degree >= 1 by construction.
        return acc + nbr / static_cast<double>(out_degree[e.neighbor]);
    };
    program.combine = [](const double& a, const double& b) { return a + b; };
    program.vertex_phase = [&](VertexId, const double& old, const double& acc) {
        const double next = teleport + d * acc;
        return VertexUpdate<double>{next, next != old};
    };

    config.max_supersteps = max_iter;
    BspEngine<double> engine(topo, std::vector<double>(g.n, 1.0 / n), config);

    auto max_delta = [](std::span<const double> before, std::span<const double> after) {
        double m = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) m = std::max(m, std::abs(after[i] - before[i]));
        return m;
    };

    PageRankResult result;
    try {
        result.iterations = engine.run_until(
            program, [tol](std::size_t, std::span<const VertexId>, double metric) { return metric < tol; }, max_delta);
        result.converged = true;
    } catch (const NonConvergence& e) {
        result.iterations = e.supersteps();
        result.converged = false;
    }
    result.state.scores = engine.values();
    result.state.damping = d;
    result.state.n = g.n;
    result.state.out_degree = std::move(out_degree);
    result.trace = engine.trace();
    result.last_delta = result.trace.empty() ? 0.0 : result.trace.back().metric;
    return result;
}

DirectedGraph parse_edge_list(std::string_view text) {
    std::vector<std::pair<long long, long long>> raw;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (const auto c = line.find_first_of("#%"); c != std::string_view::npos) line = line.substr(0, c);

        long long ids[2];
        int found = 0;
        std::size_t i = 0;
        while (i < line.size()) {
            if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == ',') {
                ++i;
                continue;
            }
            const auto end = line.find_first_of(" \t\r,", i);
            const auto tok = line.substr(i, end == std::string_view::npos ? line.size() - i : end - i);
            long long v = 0;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0 || found == 2) {
                throw ParseError("line " + std::to_string(line_no) + ": expected 'src dst' with non-negative integer ids",
                                 line_no);
            }
            ids[found++] = v;
            i += tok.size();
        }
        if (found == 0) continue;
        if (found != 2) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'src dst' with non-negative integer ids",
                             line_no);
        }
        raw.emplace_back(ids[0], ids[1]);
    }

    std::map<long long, VertexId> dense;
    for (const auto& [a, b] : raw) {
        dense.emplace(a, 0);
        dense.emplace(b, 0);
    }
    DirectedGraph g;
    g.n = dense.size();
    g.labels.reserve(g.n);
    VertexId next = 0;
    for (auto& [label, id] : dense) {
        id = next++;
        g.labels.push_back(label);
    }
    g.edges.reserve(raw.size());
    for (const auto& [a, b] : raw) g.edges.emplace_back(dense[a], dense[b]);
    return g;
}

DirectedGraph graph_from_case(const RawCase& c) {
    DirectedGraph g;
    g.n = c.buses.size();
    std::unordered_map<int, VertexId> index;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        index.emplace(c.buses[i].id, static_cast<VertexId>(i));
        g.labels.push_back(c.buses[i].id);
    }
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const auto f = index.find(br.from_bus);
        const auto t = index.find(br.to_bus);
        if (f == index.end() || t == index.end()) throw ValidationError("branch references a missing bus");
        g.edges.emplace_back(f->second, t->second);
        g.edges.emplace_back(t->second, f->second);
    }
    return g;
}

}  // namespace graphpf
