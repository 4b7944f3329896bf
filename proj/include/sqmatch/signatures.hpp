#pragma once

#include "sqmatch/graph.hpp"
#include "sqmatch/mesh.hpp"
#include "sqmatch/operators.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace sqmatch {

struct PointSignature {
    enum class Kind { shot_like, hks, geodesic_sig };

    Kind kind = Kind::shot_like;
    Eigen::MatrixXd values; // one row per vertex/point
    std::string params;

    int length() const { return static_cast<int>(values.cols()); }
};

struct ShotParams {
    double radius = 0.0; // required, > 0
    int azimuth_sectors = 8;
    int elevation_sectors = 2;
    int radial_shells = 2;
    int hist_bins = 11;

    int descriptor_length() const {
        return azimuth_sectors * elevation_sectors * radial_shells * hist_bins;
    }
};

std::vector<Eigen::Vector3d> mesh_vertex_normals(const TriMesh& mesh);
/// Per-point smallest-covariance-eigenvector normals from k nearest
/// neighbors. Signs are arbitrary; consumers use |cos|.
std::vector<Eigen::Vector3d> cloud_normals(std::span<const Eigen::Vector3d> points, int k = 20);

/// Simplified SHOT-style histogram descriptor: covariance local frame
/// (sign-disambiguated toward the majority of neighbor offsets), neighbors
/// binned by azimuth/elevation/radial shell, per-sector histogram of
/// |cos(neighbor normal, center normal)|, unit-normalized. Points with an
/// empty neighborhood get the zero descriptor and a warning.
PointSignature shot_like_descriptor(std::span<const Eigen::Vector3d> points,
                                    std::span<const Eigen::Vector3d> normals,
                                    const ShotParams& params,
                                    std::vector<std::string>* warnings = nullptr);

/// Smallest eigenpairs of S psi = lambda M psi with row-sum (lumped) mass,
/// eigenvectors M-orthonormal, eigenvalues ascending. Dense solve,
/// restricted to n <= 6000.
struct SpectralBasis {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors; // n x num_eigs
};
SpectralBasis spectral_basis(const SparseOperator& S, const SparseOperator& M, int num_eigs);

/// Heat kernel diagonal H(x,x,t) per vertex (length-1 signature).
PointSignature hks(const TriMesh& mesh, int num_eigs, double t);
/// H(x, anchor_i, t) per vertex, one column per anchor.
PointSignature hks_cross(const TriMesh& mesh, std::span<const int> anchors, int num_eigs,
                         double t);
PointSignature hks_cross(const SpectralBasis& basis, std::span<const int> anchors, double t);

/// Per-vertex Dijkstra distance to each anchor, divided by the graph
/// geodesic diameter. Unreachable anchors yield +infinity coordinates and
/// a warning.
PointSignature geodesic_signature(const Graph& g, std::span<const int> anchors,
                                  double diameter, std::vector<std::string>* warnings = nullptr);

void write_signature_csv(const PointSignature& sig, const std::string& path);

} // namespace sqmatch
