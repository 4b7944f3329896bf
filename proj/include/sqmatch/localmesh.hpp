#pragma once

#include "sqmatch/graph.hpp"
#include "sqmatch/mesh.hpp"
#include "sqmatch/operators.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace sqmatch {

struct AdaptiveKnnParams {
    int k0 = 200;       // initial neighborhood size
    double ratio = 0.05; // flatness threshold on lambda3 / lambda1
    int shrink = 6;      // furthest points dropped per round
    int kmin = 12;       // lower bound on the neighborhood size
};

/// PCA frame of a point neighborhood: covariance of the center plus its
/// neighbors, centered on the neighborhood mean and divided by the point
/// count. tangent1/tangent2 span the tangent plane, normal is the
/// smallest-eigenvalue direction; eigenvalues are sorted descending.
struct LocalFrame {
    int center = -1;
    Eigen::Vector3d tangent1, tangent2, normal;
    Eigen::Vector3d eigenvalues; // lambda1 >= lambda2 >= lambda3 >= 0

    double flatness() const {
        return eigenvalues[0] > 0 ? eigenvalues[2] / eigenvalues[0] : 0.0;
    }
};

/// Center-incident piece of the tangent-plane Delaunay triangulation.
/// vertex_ids[0] is the center; triangles index into vertex_ids.
struct LocalMesh {
    int center = -1;
    std::vector<int> vertex_ids;
    std::vector<std::array<int, 3>> triangles;
};

/// Adaptive K-nearest neighborhood of point i: starts from the k0 nearest
/// (Euclidean, center excluded), then repeatedly drops the `shrink`
/// furthest until the covariance flatness ratio falls below `ratio` or the
/// next drop would go under kmin. Returned ids are sorted by distance.
/// `hit_kmin`, when given, reports termination at the lower bound with the
/// ratio still above threshold.
std::vector<int> adaptive_knn(const PointCloud& cloud, int i,
                              const AdaptiveKnnParams& params = {},
                              bool* hit_kmin = nullptr);

LocalFrame local_frame(const PointCloud& cloud, int center, std::span<const int> neighbors);

/// Projects the neighborhood onto the tangent plane and triangulates it;
/// keeps the triangles incident to the center. Throws
/// "pointcloud.collinear_projection" when the projections admit no
/// center-incident triangle.
LocalMesh build_local_mesh(const PointCloud& cloud, int center, std::span<const int> neighbors);

struct CloudOperators {
    SparseOperator S, M;
    Graph graph;              // union of local-mesh edges, Euclidean lengths
    std::vector<int> skipped; // points without a usable local mesh
};

/// Per-point local-mesh assembly of the cotangent stiffness and mass
/// operators. Row contributions come from center-incident triangles only;
/// both operators are then symmetrized as (A + A^T)/2 and stiffness rows
/// re-centered to zero sum. The mass matrix keeps only symmetry and
/// nonnegativity (the diagonal/off-diagonal structure of mesh assembly is
/// not preserved). Skipped points get a zero stiffness row and the mean
/// mass diagonal as a fallback; skipping more than 5% of points appends a
/// warning listing them.
CloudOperators assemble_cloud_operators(const PointCloud& cloud,
                                        const AdaptiveKnnParams& params = {},
                                        int threads = 1,
                                        std::vector<std::string>* warnings = nullptr);

} // namespace sqmatch
