#include "sqmatch/graph.hpp"

#include "sqmatch/common.hpp"

#include <algorithm>
#include <queue>

namespace sqmatch {

Graph graph_from_mesh(const TriMesh& mesh) {
    Graph g;
    g.n = mesh.n_vertices();
    g.offsets = mesh.vtx_offsets;
    g.nbrs = mesh.vtx_nbrs;
    g.len.resize(g.nbrs.size());
    for (int v = 0; v < g.n; ++v)
        for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e)
            g.len[e] = (mesh.vertices[v] - mesh.vertices[g.nbrs[e]]).norm();
    return g;
}

std::vector<int> ring_members(const Graph& g, int center, int depth) {
    if (center < 0 || center >= g.n)
        throw Error("geometry.bad_vertex", "ring center out of range");
    if (depth < 1)
        throw Error("geometry.bad_depth", "ring depth must be >= 1");
    std::vector<int> members{center};
    std::vector<int> frontier{center};
    std::vector<char> seen(g.n, 0);
    seen[center] = 1;
    for (int d = 0; d < depth && !frontier.empty(); ++d) {
        std::vector<int> next;
        for (int v : frontier) {
            for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                int u = g.nbrs[e];
                if (!seen[u]) {
                    seen[u] = 1;
                    next.push_back(u);
                    members.push_back(u);
                }
            }
        }
        frontier = std::move(next);
    }
    std::sort(members.begin(), members.end());
    return members;
}

namespace {

using HeapItem = std::pair<double, int>;
using MinHeap = std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>>;

} // namespace

std::vector<double> dijkstra(const Graph& g, int source, double cutoff) {
    if (source < 0 || source >= g.n)
        throw Error("geometry.bad_vertex", "dijkstra source out of range");
    if (!(cutoff > 0))
        throw Error("geometry.bad_cutoff", "cutoff must be positive");
    std::vector<double> dist(g.n, kInf);
    dist[source] = 0.0;
    MinHeap heap;
    heap.push({0.0, source});
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
            int u = g.nbrs[e];
            double nd = d + g.len[e];
            if (nd < dist[u] && nd <= cutoff) {
                dist[u] = nd;
                heap.push({nd, u});
            }
        }
    }
    if (cutoff < kInf)
        for (auto& d : dist)
            if (d > cutoff) d = kInf;
    return dist;
}

std::vector<double> dijkstra_targets(const Graph& g, int source, std::span<const int> targets) {
    std::vector<double> dist(g.n, kInf);
    std::vector<char> wanted(g.n, 0);
    int remaining = 0;
    for (int t : targets)
        if (!wanted[t]) {
            wanted[t] = 1;
            ++remaining;
        }
    dist[source] = 0.0;
    if (wanted[source]) {
        wanted[source] = 0;
        --remaining;
    }
    MinHeap heap;
    heap.push({0.0, source});
    while (!heap.empty() && remaining > 0) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        for (int e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
            int u = g.nbrs[e];
            double nd = d + g.len[e];
            if (nd < dist[u]) {
                dist[u] = nd;
                heap.push({nd, u});
            }
        }
        if (wanted[v]) {
            wanted[v] = 0;
            --remaining;
        }
    }
    std::vector<double> out;
    out.reserve(targets.size());
    for (int t : targets) out.push_back(dist[t]);
    return out;
}

double geodesic_diameter(const Graph& g, int samples) {
    if (samples < 1) throw Error("geometry.bad_samples", "samples must be >= 1");
    samples = std::min(samples, g.n);
    double best = 0.0;
    int source = 0;
    std::vector<double> min_dist(g.n, kInf); // for farthest-point sampling
    for (int s = 0; s < samples; ++s) {
        auto dist = dijkstra(g, source);
        int far = source;
        double far_min = -1.0;
        for (int v = 0; v < g.n; ++v) {
            if (dist[v] < kInf) {
                best = std::max(best, dist[v]);
                min_dist[v] = std::min(min_dist[v], dist[v]);
            }
            double md = min_dist[v] == kInf ? -1.0 : min_dist[v];
            if (md > far_min) {
                far_min = md;
                far = v;
            }
        }
        source = far;
    }
    return best;
}

} // namespace sqmatch
