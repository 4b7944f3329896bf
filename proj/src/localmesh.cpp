#include "sqmatch/localmesh.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/delaunay.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace sqmatch {

namespace {

struct CovAccum {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
    int count = 0;

    void add(const Eigen::Vector3d& p) {
        sum += p;
        outer += p * p.transpose();
        ++count;
    }
    void remove(const Eigen::Vector3d& p) {
        sum -= p;
        outer -= p * p.transpose();
        --count;
    }
    Eigen::Matrix3d covariance() const {
        Eigen::Vector3d mean = sum / count;
        Eigen::Matrix3d c = outer / count - mean * mean.transpose();
        return 0.5 * (c + c.transpose());
    }
};

Eigen::Vector3d sorted_eigenvalues_desc(const Eigen::Matrix3d& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c, Eigen::EigenvaluesOnly);
    Eigen::Vector3d ev = es.eigenvalues(); // ascending
    return {std::max(ev[2], 0.0), std::max(ev[1], 0.0), std::max(ev[0], 0.0)};
}

} // namespace

std::vector<int> adaptive_knn(const PointCloud& cloud, int i, const AdaptiveKnnParams& params,
                              bool* hit_kmin) {
    const int n = cloud.n_points();
    if (hit_kmin) *hit_kmin = false;
    if (n <= params.kmin)
        throw Error("pointcloud.too_few_points",
                    "cloud has " + std::to_string(n) + " points, need more than " +
                        std::to_string(params.kmin));

    const Eigen::Vector3d& p = cloud.points[i];
    std::vector<std::pair<double, int>> dist;
    dist.reserve(n - 1);
    for (int j = 0; j < n; ++j)
        if (j != i) dist.emplace_back((cloud.points[j] - p).squaredNorm(), j);
    int k = std::min<int>(params.k0, static_cast<int>(dist.size()));
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    dist.resize(k);
    std::sort(dist.begin(), dist.end());

    CovAccum cov;
    cov.add(p);
    for (const auto& [d, j] : dist) cov.add(cloud.points[j]);

    while (true) {
        Eigen::Vector3d ev = sorted_eigenvalues_desc(cov.covariance());
        double ratio = ev[0] > 0 ? ev[2] / ev[0] : 0.0;
        if (ratio < params.ratio) break;
        if (static_cast<int>(dist.size()) - params.shrink < params.kmin) {
            if (hit_kmin) *hit_kmin = true;
            break;
        }
        for (int s = 0; s < params.shrink; ++s) {
            cov.remove(cloud.points[dist.back().second]);
            dist.pop_back();
        }
    }
    std::vector<int> out;
    out.reserve(dist.size());
    for (const auto& [d, j] : dist) out.push_back(j);
    return out;
}

LocalFrame local_frame(const PointCloud& cloud, int center, std::span<const int> neighbors) {
    CovAccum cov;
    cov.add(cloud.points[center]);
    for (int j : neighbors) cov.add(cloud.points[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov.covariance());
    LocalFrame frame;
    frame.center = center;
    frame.eigenvalues = {std::max(es.eigenvalues()[2], 0.0), std::max(es.eigenvalues()[1], 0.0),
                         std::max(es.eigenvalues()[0], 0.0)};
    frame.tangent1 = es.eigenvectors().col(2);
    frame.tangent2 = es.eigenvectors().col(1);
    frame.normal = es.eigenvectors().col(0);
    return frame;
}

LocalMesh build_local_mesh(const PointCloud& cloud, int center, std::span<const int> neighbors) {
    LocalFrame frame = local_frame(cloud, center, neighbors);
    LocalMesh lm;
    lm.center = center;
    lm.vertex_ids.reserve(neighbors.size() + 1);
    lm.vertex_ids.push_back(center);
    lm.vertex_ids.insert(lm.vertex_ids.end(), neighbors.begin(), neighbors.end());

    std::vector<Eigen::Vector2d> uv(lm.vertex_ids.size());
    const Eigen::Vector3d& origin = cloud.points[center];
    for (size_t v = 0; v < lm.vertex_ids.size(); ++v) {
        Eigen::Vector3d q = cloud.points[lm.vertex_ids[v]] - origin;
        uv[v] = {q.dot(frame.tangent1), q.dot(frame.tangent2)};
    }
    for (const auto& tri : delaunay2d(uv))
        if (tri[0] == 0 || tri[1] == 0 || tri[2] == 0) lm.triangles.push_back(tri);
    if (lm.triangles.empty())
        throw Error("pointcloud.collinear_projection",
                    "no center-incident triangle for point " + std::to_string(center));
    return lm;
}

namespace {

struct RowContribution {
    std::vector<std::pair<int, double>> s_off, m_off; // column, value
    double m_diag = 0.0;
    std::vector<std::array<int, 2>> edges; // cloud-id pairs, min first
    bool skipped = false;
};

double cot_at(const Eigen::Vector3d& apex, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    Eigen::Vector3d u = a - apex, v = b - apex;
    double cross = u.cross(v).norm();
    return cross > 0 ? u.dot(v) / cross : 0.0;
}

} // namespace

CloudOperators assemble_cloud_operators(const PointCloud& cloud, const AdaptiveKnnParams& params,
                                        int threads, std::vector<std::string>* warnings) {
    const int n = cloud.n_points();
    if (n <= params.kmin)
        throw Error("pointcloud.too_few_points",
                    "cloud has " + std::to_string(n) + " points, need more than " +
                        std::to_string(params.kmin));

    std::vector<RowContribution> rows(n);
    parallel_for(n, threads, [&](int i) {
        RowContribution& row = rows[i];
        try {
            std::vector<int> nb = adaptive_knn(cloud, i, params);
            LocalMesh lm = build_local_mesh(cloud, i, nb);
            for (const auto& tri : lm.triangles) {
                int ids[3] = {lm.vertex_ids[tri[0]], lm.vertex_ids[tri[1]],
                              lm.vertex_ids[tri[2]]};
                int ci = ids[0] == i ? 0 : ids[1] == i ? 1 : 2;
                int j = ids[(ci + 1) % 3], k = ids[(ci + 2) % 3];
                const Eigen::Vector3d& pi = cloud.points[i];
                const Eigen::Vector3d& pj = cloud.points[j];
                const Eigen::Vector3d& pk = cloud.points[k];
                double area = 0.5 * (pj - pi).cross(pk - pi).norm();
                if (area <= 0) continue;
                row.s_off.emplace_back(j, -0.5 * cot_at(pk, pi, pj));
                row.s_off.emplace_back(k, -0.5 * cot_at(pj, pi, pk));
                row.m_off.emplace_back(j, area / 12.0);
                row.m_off.emplace_back(k, area / 12.0);
                row.m_diag += area / 6.0;
                row.edges.push_back({std::min(i, j), std::max(i, j)});
                row.edges.push_back({std::min(j, k), std::max(j, k)});
                row.edges.push_back({std::min(i, k), std::max(i, k)});
            }
        } catch (const Error&) {
            row.skipped = true;
        }
    });

    CloudOperators out;
    std::vector<std::tuple<int, int, double>> s_trip, m_trip;
    for (int i = 0; i < n; ++i) {
        s_trip.emplace_back(i, i, 0.0); // reserve diagonal slots
        m_trip.emplace_back(i, i, rows[i].m_diag);
        // halved off-diagonals: the triplet builder mirrors every entry,
        // which realizes the (A + A^T)/2 symmetrization
        for (const auto& [j, v] : rows[i].s_off) s_trip.emplace_back(i, j, 0.5 * v);
        for (const auto& [j, v] : rows[i].m_off) m_trip.emplace_back(i, j, 0.5 * v);
        if (rows[i].skipped) out.skipped.push_back(i);
    }
    out.S = operator_from_triplets(n, SparseOperator::Kind::stiffness, s_trip);
    out.M = operator_from_triplets(n, SparseOperator::Kind::mass, m_trip);

    // re-center stiffness rows to zero sum
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        int diag_slot = -1;
        for (int e = out.S.offsets[i]; e < out.S.offsets[i + 1]; ++e) {
            if (out.S.cols[e] == i)
                diag_slot = e;
            else
                off += out.S.vals[e];
        }
        out.S.vals[diag_slot] = -off;
        out.S.diag[i] = -off;
    }
    // clamp stray negative mass entries and give skipped points the mean
    // diagonal as a fallback
    for (double& v : out.M.vals) v = std::max(v, 0.0);
    double diag_sum = 0.0;
    int diag_cnt = 0;
    for (int i = 0; i < n; ++i)
        if (!rows[i].skipped) {
            diag_sum += rows[i].m_diag;
            ++diag_cnt;
        }
    double fallback = diag_cnt > 0 ? diag_sum / diag_cnt : 1.0;
    for (int i : out.skipped) {
        for (int e = out.M.offsets[i]; e < out.M.offsets[i + 1]; ++e)
            if (out.M.cols[e] == i) out.M.vals[e] = fallback;
        out.M.diag[i] = fallback;
    }

    // union of local-mesh edges
    std::map<std::array<int, 2>, double> edge_len;
    for (const auto& row : rows)
        for (const auto& e : row.edges)
            if (!edge_len.count(e))
                edge_len[e] = (cloud.points[e[0]] - cloud.points[e[1]]).norm();
    out.graph.n = n;
    out.graph.offsets.assign(n + 1, 0);
    for (const auto& [e, l] : edge_len) {
        out.graph.offsets[e[0] + 1]++;
        out.graph.offsets[e[1] + 1]++;
    }
    for (int i = 0; i < n; ++i) out.graph.offsets[i + 1] += out.graph.offsets[i];
    out.graph.nbrs.resize(edge_len.size() * 2);
    out.graph.len.resize(edge_len.size() * 2);
    std::vector<int> cursor(out.graph.offsets.begin(), out.graph.offsets.end() - 1);
    for (const auto& [e, l] : edge_len) {
        out.graph.nbrs[cursor[e[0]]] = e[1];
        out.graph.len[cursor[e[0]]++] = l;
        out.graph.nbrs[cursor[e[1]]] = e[0];
        out.graph.len[cursor[e[1]]++] = l;
    }

    if (warnings && out.skipped.size() * 20 > static_cast<size_t>(n)) {
        std::string msg = "local meshing skipped " + std::to_string(out.skipped.size()) +
                          " of " + std::to_string(n) + " points:";
        for (int i : out.skipped) msg += " " + std::to_string(i);
        warnings->push_back(msg);
    }
    return out;
}

} // namespace sqmatch
