#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace sqmatch {

/// Indexed triangle surface. After finalize(): adjacency built, boundary
/// edges derived, degenerate / non-manifold inputs rejected. Immutable by
/// convention once finalized; all queries are read-only.
struct TriMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;

    // derived by finalize()
    std::vector<std::array<int, 2>> boundary_edges; // (min,max) vertex pairs
    std::vector<int> vtx_offsets, vtx_nbrs;         // CSR vertex adjacency, nbrs sorted
    std::vector<int> tri_offsets, tri_ids;          // CSR vertex -> incident triangles
    std::vector<double> tri_area;
    double mean_edge_length = 0.0;
    double surface_area = 0.0;
    int edge_count = 0;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    bool closed() const { return boundary_edges.empty(); }

    /// Validates invariants and builds adjacency. Throws Error on
    /// degenerate faces ("mesh.degenerate_face", listing offenders),
    /// repeated-vertex faces, out-of-range indices, and edges with more
    /// than two incident triangles ("mesh.nonmanifold_edge").
    void finalize();

    /// Neighbors of vertex v (sorted).
    std::pair<const int*, const int*> neighbors(int v) const {
        return {vtx_nbrs.data() + vtx_offsets[v], vtx_nbrs.data() + vtx_offsets[v + 1]};
    }
};

enum class MeshFormat { off, obj, ply_ascii };

/// Loads OFF / OBJ / ASCII PLY, format deduced from the extension.
/// Vertex order is preserved; OBJ's 1-based indices are converted to
/// 0-based. The returned mesh is finalized.
TriMesh load_mesh(const std::string& path);
TriMesh load_mesh_text(const std::string& text, MeshFormat format);

void save_off(const TriMesh& mesh, const std::string& path);

struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    int n_points() const { return static_cast<int>(points.size()); }
};

/// XYZ text (one "x y z" per line) or ASCII PLY vertex positions.
/// Rejects coincident points (within 1e-12 of the bounding-box diagonal).
PointCloud load_cloud(const std::string& path);
PointCloud cloud_from_points(std::vector<Eigen::Vector3d> points);

void save_xyz(const PointCloud& cloud, const std::string& path);

} // namespace sqmatch
