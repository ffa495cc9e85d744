#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "graphpf/engine.hpp"

namespace graphpf {

struct RawCase;

/// Directed multigraph on vertices 0..n-1. `labels` optionally carries the external id of
/// each vertex (edge-list files and case files use arbitrary ids).
struct DirectedGraph {
    std::size_t n = 0;
    std::vector<std::pair<VertexId, VertexId>> edges;
    std::vector<long long> labels;
};

struct PageRankState {
    std::vector<double> scores;
    double damping = 0.85;
    std::size_t n = 0;
    std::vector<std::size_t> out_degree;
};

struct PageRankResult {
    PageRankState state;
    std::size_t iterations = 0;
    bool converged = false;
    double last_delta = 0.0;
    std::vector<SuperstepRecord> trace;
};

/// Classic synchronous PageRank from a uniform 1/N start:
///   PR_i <- (1 - d)/N + d * sum_{j -> i} PR_j / outdeg(j)
/// Every vertex reads only the previous superstep's scores. Dangling vertices pass no
/// mass on. Stops once max |delta PR| < tol, or after max_iter supersteps.
PageRankResult pagerank(const DirectedGraph& g, double d, double tol, std::size_t max_iter,
                        EngineConfig config = {});

/// `src dst` pairs, one per line; `#` and `%` start comments. Vertex ids are arbitrary
/// non-negative integers, densified in ascending order. Throws ParseError with the line.
DirectedGraph parse_edge_list(std::string_view text);

/// Each in-service branch becomes two opposite directed edges; vertices follow bus order.
DirectedGraph graph_from_case(const RawCase& c);

}  // namespace graphpf
