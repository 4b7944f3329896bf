#pragma once

#include "sqmatch/mesh.hpp"

#include <limits>
#include <span>
#include <vector>

namespace sqmatch {

/// Undirected edge graph with Euclidean edge weights. Geodesic queries in
/// this artifact are shortest paths on this graph (Dijkstra), not exact
/// polyhedral geodesics. Disconnected parts are allowed; unreachable
/// vertices report +infinity.
struct Graph {
    int n = 0;
    std::vector<int> offsets;  // size n+1
    std::vector<int> nbrs;     // sorted per vertex
    std::vector<double> len;   // aligned with nbrs
};

constexpr double kInf = std::numeric_limits<double>::infinity();

Graph graph_from_mesh(const TriMesh& mesh);

/// Breadth-first ball of hop radius `depth`, center included, sorted.
/// depth must be >= 1.
std::vector<int> ring_members(const Graph& g, int center, int depth);

/// Shortest-path distances from `source`. Vertices farther than `cutoff`
/// (when finite) and unreachable vertices are +infinity.
std::vector<double> dijkstra(const Graph& g, int source, double cutoff = kInf);

/// Distances from `source` to each of `targets` (aligned with the input);
/// stops as soon as every target is settled.
std::vector<double> dijkstra_targets(const Graph& g, int source, std::span<const int> targets);

/// Max-over-sources shortest-path eccentricity, sources chosen by
/// farthest-point sampling starting at vertex 0. A lower bound on the
/// true diameter, exact when samples >= n.
double geodesic_diameter(const Graph& g, int samples);

} // namespace sqmatch
