#include "graphpf/engine.hpp"

#include <ostream>

namespace graphpf {

Topology Topology::from_edges(std::size_t n, std::span<const std::pair<VertexId, VertexId>> edges, Gather gather) {
    Topology t;
    t.offsets.assign(n + 1, 0);
    auto check = [n](VertexId v) {
        if (v >= n) throw std::out_of_range("Topology: vertex " + std::to_string(v) + " out of range");
    };
    for (const auto& [src, dst] : edges) {
        check(src);
        check(dst);
        if (gather != Gather::Out) ++t.offsets[dst + 1];
        if (gather != Gather::In) ++t.offsets[src + 1];
    }
    for (std::size_t v = 0; v < n; ++v) t.offsets[v + 1] += t.offsets[v];
    t.refs.resize(t.offsets.back());
    t.owner.resize(t.offsets.back());
    std::vector<std::size_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto [src, dst] = edges[k];
        const auto id = static_cast<std::uint32_t>(k);
        if (gather != Gather::Out) {
            t.owner[cursor[dst]] = dst;
            t.refs[cursor[dst]++] = {src, id};
        }
        if (gather != Gather::In) {
            t.owner[cursor[src]] = src;
            t.refs[cursor[src]++] = {dst, id};
        }
    }
    return t;
}

void write_superstep_trace_csv(std::ostream& out, std::span<const SuperstepRecord> trace) {
    const auto old_precision = out.precision(17);
    out << "superstep,changed,metric,ms\n";
    for (const auto& r : trace) out << r.index << ',' << r.changed << ',' << r.metric << ',' << r.wall_ms << '\n';
    out.precision(old_precision);
}

}  // namespace graphpf
