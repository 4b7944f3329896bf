#include "sqmatch/signatures.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace sqmatch {

namespace {

/// Uniform hash grid for fixed-radius neighbor queries.
class HashGrid {
public:
    HashGrid(std::span<const Eigen::Vector3d> pts, double cell) : pts_(pts), cell_(cell) {
        cells_.reserve(pts.size());
        for (size_t i = 0; i < pts.size(); ++i)
            cells_[key(pts[i])].push_back(static_cast<int>(i));
    }

    void radius_query(const Eigen::Vector3d& p, double r, std::vector<int>& out) const {
        out.clear();
        Eigen::Vector3i lo = coords(p - Eigen::Vector3d::Constant(r));
        Eigen::Vector3i hi = coords(p + Eigen::Vector3d::Constant(r));
        double r2 = r * r;
        for (int x = lo.x(); x <= hi.x(); ++x)
            for (int y = lo.y(); y <= hi.y(); ++y)
                for (int z = lo.z(); z <= hi.z(); ++z) {
                    auto it = cells_.find(pack(x, y, z));
                    if (it == cells_.end()) continue;
                    for (int i : it->second)
                        if ((pts_[i] - p).squaredNorm() <= r2) out.push_back(i);
                }
        std::sort(out.begin(), out.end());
        // hash collisions between cells can enqueue a point twice
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }

private:
    Eigen::Vector3i coords(const Eigen::Vector3d& p) const {
        return {static_cast<int>(std::floor(p.x() / cell_)),
                static_cast<int>(std::floor(p.y() / cell_)),
                static_cast<int>(std::floor(p.z() / cell_))};
    }
    static int64_t pack(int x, int y, int z) {
        return (static_cast<int64_t>(x) * 73856093) ^ (static_cast<int64_t>(y) * 19349663) ^
               (static_cast<int64_t>(z) * 83492791);
    }
    int64_t key(const Eigen::Vector3d& p) const {
        auto c = coords(p);
        return pack(c.x(), c.y(), c.z());
    }

    std::span<const Eigen::Vector3d> pts_;
    double cell_;
    std::unordered_map<int64_t, std::vector<int>> cells_;
};

Eigen::Matrix3d covariance(std::span<const Eigen::Vector3d> pts, std::span<const int> ids,
                           Eigen::Vector3d* mean_out = nullptr) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int i : ids) mean += pts[i];
    mean /= static_cast<double>(ids.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : ids) {
        Eigen::Vector3d d = pts[i] - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(ids.size());
    if (mean_out) *mean_out = mean;
    return cov;
}

} // namespace

std::vector<Eigen::Vector3d> mesh_vertex_normals(const TriMesh& mesh) {
    std::vector<Eigen::Vector3d> normals(mesh.n_vertices(), Eigen::Vector3d::Zero());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        Eigen::Vector3d fn = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                                 .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        for (int j = 0; j < 3; ++j) normals[tri[j]] += fn; // area-weighted
    }
    for (auto& n : normals) {
        double len = n.norm();
        if (len > 0) n /= len;
    }
    return normals;
}

std::vector<Eigen::Vector3d> cloud_normals(std::span<const Eigen::Vector3d> points, int k) {
    const int n = static_cast<int>(points.size());
    std::vector<Eigen::Vector3d> normals(n, Eigen::Vector3d::UnitZ());
    k = std::min(k, n - 1);
    if (k < 2) return normals;
    std::vector<std::pair<double, int>> dist(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dist[j] = {(points[j] - points[i]).squaredNorm(), j};
        std::nth_element(dist.begin(), dist.begin() + k, dist.end());
        std::vector<int> ids;
        ids.reserve(k + 1);
        for (int j = 0; j <= k; ++j) ids.push_back(dist[j].second);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(covariance(points, ids));
        normals[i] = eig.eigenvectors().col(0); // smallest eigenvalue
    }
    return normals;
}

PointSignature shot_like_descriptor(std::span<const Eigen::Vector3d> points,
                                    std::span<const Eigen::Vector3d> normals,
                                    const ShotParams& params,
                                    std::vector<std::string>* warnings) {
    if (!(params.radius > 0)) throw Error("descriptors.bad_radius", "radius must be positive");
    const int n = static_cast<int>(points.size());
    const int L = params.descriptor_length();
    PointSignature sig;
    sig.kind = PointSignature::Kind::shot_like;
    sig.values = Eigen::MatrixXd::Zero(n, L);
    sig.params = "radius=" + format_double(params.radius);

    HashGrid grid(points, params.radius);
    std::vector<int> nbrs;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
        grid.radius_query(points[i], params.radius, nbrs);
        nbrs.erase(std::remove(nbrs.begin(), nbrs.end(), i), nbrs.end());
        if (nbrs.empty()) {
            if (warnings)
                warnings->push_back("point " + std::to_string(i) +
                                    " has an empty neighborhood; zero descriptor");
            continue;
        }

        // local reference frame from neighborhood covariance
        std::vector<int> ids = nbrs;
        ids.push_back(i);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(covariance(points, ids));
        Eigen::Vector3d ex = eig.eigenvectors().col(2); // largest
        Eigen::Vector3d ez = eig.eigenvectors().col(0); // smallest (normal direction)
        // sign disambiguation toward the majority of neighbor offsets
        int vote_x = 0, vote_z = 0;
        for (int j : nbrs) {
            Eigen::Vector3d off = points[j] - points[i];
            vote_x += off.dot(ex) >= 0 ? 1 : -1;
            vote_z += off.dot(ez) >= 0 ? 1 : -1;
        }
        if (vote_x < 0) ex = -ex;
        if (vote_z < 0) ez = -ez;
        Eigen::Vector3d ey = ez.cross(ex);

        for (int j : nbrs) {
            Eigen::Vector3d off = points[j] - points[i];
            double r = off.norm();
            double lx = off.dot(ex), ly = off.dot(ey), lz = off.dot(ez);
            double az = std::atan2(ly, lx);
            if (az < 0) az += two_pi;
            int a = std::min(params.azimuth_sectors - 1,
                             static_cast<int>(az / two_pi * params.azimuth_sectors));
            int e = lz >= 0 ? 1 : 0;
            if (params.elevation_sectors == 1) e = 0;
            int s = std::min(params.radial_shells - 1,
                             static_cast<int>(r / params.radius * params.radial_shells));
            double c = std::abs(normals[j].dot(normals[i]));
            c = std::min(c, 1.0);
            int b = std::min(params.hist_bins - 1, static_cast<int>(c * params.hist_bins));
            int sector = (a * params.elevation_sectors + e) * params.radial_shells + s;
            sig.values(i, sector * params.hist_bins + b) += 1.0;
        }
        double norm = sig.values.row(i).norm();
        if (norm > 0) sig.values.row(i) /= norm;
    }
    return sig;
}

SpectralBasis spectral_basis(const SparseOperator& S, const SparseOperator& M, int num_eigs) {
    const int n = S.n;
    if (n > 6000)
        throw Error("descriptors.hks_size_limit",
                    "dense spectral solve limited to 6000 vertices, got " + std::to_string(n));
    if (num_eigs > n)
        throw Error("descriptors.bad_num_eigs", "num_eigs exceeds vertex count");
    if (num_eigs < 1) throw Error("descriptors.bad_num_eigs", "num_eigs must be >= 1");

    // lumped mass = row sums of M (keeps the sphere spectrum scale correct)
    std::vector<double> lumped = M.row_sums();
    Eigen::VectorXd inv_sqrt(n);
    for (int i = 0; i < n; ++i) {
        if (!(lumped[i] > 0))
            throw Error("descriptors.bad_mass", "nonpositive lumped mass at vertex " +
                                                    std::to_string(i));
        inv_sqrt[i] = 1.0 / std::sqrt(lumped[i]);
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int e = S.offsets[i]; e < S.offsets[i + 1]; ++e)
            A(i, S.cols[e]) = S.vals[e] * inv_sqrt[i] * inv_sqrt[S.cols[e]];
    A = 0.5 * (A + A.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    if (eig.info() != Eigen::Success)
        throw Error("descriptors.eigensolver_failed", "dense eigensolver did not converge");

    SpectralBasis basis;
    basis.eigenvalues = eig.eigenvalues().head(num_eigs);
    basis.eigenvectors = eig.eigenvectors().leftCols(num_eigs);
    for (int i = 0; i < n; ++i) basis.eigenvectors.row(i) *= inv_sqrt[i];
    return basis;
}

PointSignature hks(const TriMesh& mesh, int num_eigs, double t) {
    if (!(t > 0)) throw Error("descriptors.bad_time", "diffusion time must be positive");
    SparseOperator S = assemble_stiffness(mesh);
    SparseOperator M = assemble_mass(mesh);
    SpectralBasis basis = spectral_basis(S, M, std::min(num_eigs, mesh.n_vertices()));
    const int n = mesh.n_vertices();
    PointSignature sig;
    sig.kind = PointSignature::Kind::hks;
    sig.values.resize(n, 1);
    sig.params = "num_eigs=" + std::to_string(num_eigs) + ",t=" + format_double(t);
    Eigen::VectorXd w = (-t * basis.eigenvalues.array()).exp();
    for (int i = 0; i < n; ++i)
        sig.values(i, 0) = (basis.eigenvectors.row(i).array().square() * w.transpose().array()).sum();
    return sig;
}

PointSignature hks_cross(const SpectralBasis& basis, std::span<const int> anchors, double t) {
    if (!(t > 0)) throw Error("descriptors.bad_time", "diffusion time must be positive");
    const int n = static_cast<int>(basis.eigenvectors.rows());
    PointSignature sig;
    sig.kind = PointSignature::Kind::hks;
    sig.values.resize(n, static_cast<int>(anchors.size()));
    sig.params = "t=" + format_double(t);
    Eigen::VectorXd w = (-t * basis.eigenvalues.array()).exp();
    // H(x, a, t) = sum_k exp(-lambda_k t) psi_k(x) psi_k(a)
    Eigen::MatrixXd weighted = basis.eigenvectors * w.asDiagonal();
    for (size_t j = 0; j < anchors.size(); ++j)
        sig.values.col(static_cast<int>(j)) =
            weighted * basis.eigenvectors.row(anchors[j]).transpose();
    return sig;
}

PointSignature hks_cross(const TriMesh& mesh, std::span<const int> anchors, int num_eigs,
                         double t) {
    SparseOperator S = assemble_stiffness(mesh);
    SparseOperator M = assemble_mass(mesh);
    SpectralBasis basis = spectral_basis(S, M, std::min(num_eigs, mesh.n_vertices()));
    return hks_cross(basis, anchors, t);
}

PointSignature geodesic_signature(const Graph& g, std::span<const int> anchors,
                                  double diameter, std::vector<std::string>* warnings) {
    if (anchors.empty()) throw Error("descriptors.no_anchors", "anchor list is empty");
    if (!(diameter > 0)) throw Error("descriptors.bad_diameter", "diameter must be positive");
    PointSignature sig;
    sig.kind = PointSignature::Kind::geodesic_sig;
    sig.values.resize(g.n, static_cast<int>(anchors.size()));
    sig.params = "anchors=" + std::to_string(anchors.size());
    for (size_t j = 0; j < anchors.size(); ++j) {
        auto dist = dijkstra(g, anchors[j]);
        bool unreachable = false;
        for (int v = 0; v < g.n; ++v) {
            sig.values(v, static_cast<int>(j)) = dist[v] / diameter;
            if (dist[v] == kInf) unreachable = true;
        }
        if (unreachable && warnings)
            warnings->push_back("anchor " + std::to_string(anchors[j]) +
                                " unreachable from part of the surface");
    }
    return sig;
}

void write_signature_csv(const PointSignature& sig, const std::string& path) {
    std::ostringstream out;
    for (int c = 0; c < sig.values.cols(); ++c) out << (c ? "," : "") << "c" << c;
    out << "\n";
    for (int r = 0; r < sig.values.rows(); ++r) {
        for (int c = 0; c < sig.values.cols(); ++c)
            out << (c ? "," : "") << format_double(sig.values(r, c));
        out << "\n";
    }
    write_text_file(path, out.str());
}

} // namespace sqmatch
