#include "shapes.hpp"

#include <cmath>
#include <map>
#include <random>

namespace sqmatch::testsupport {

TriMesh grid_mesh(int rows, int cols, double spacing) {
    TriMesh m;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m.vertices.emplace_back(j * spacing, i * spacing, 0.0);
    auto id = [cols](int i, int j) { return i * cols + j; };
    for (int i = 0; i + 1 < rows; ++i)
        for (int j = 0; j + 1 < cols; ++j) {
            m.triangles.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
        }
    m.finalize();
    return m;
}

TriMesh square_mesh() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    m.finalize();
    return m;
}

TriMesh equilateral_triangle() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}};
    m.triangles = {{0, 1, 2}};
    m.finalize();
    return m;
}

TriMesh tetrahedron() {
    TriMesh m;
    double h = std::sqrt(3.0) / 2.0;
    m.vertices = {{0, 0, 0},
                  {1, 0, 0},
                  {0.5, h, 0},
                  {0.5, h / 3.0, std::sqrt(2.0 / 3.0)}};
    m.triangles = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {2, 0, 3}};
    m.finalize();
    return m;
}

TriMesh icosphere(int subdiv) {
    double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
        {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
        {3, 2, 6},  {3, 6, 8},   {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
        {8, 6, 7},  {9, 8, 1}};
    for (int level = 0; level < subdiv; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int id = static_cast<int>(verts.size());
            verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
            midpoint[key] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    TriMesh m;
    m.vertices = std::move(verts);
    m.triangles = std::move(faces);
    m.finalize();
    return m;
}

TriMesh bumpy_blob(int subdiv, std::uint64_t seed) {
    TriMesh m = icosphere(subdiv);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dir(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(1.5, 4.0);
    struct Wave {
        Eigen::Vector3d k;
        double amp, phase;
    };
    std::vector<Wave> waves;
    double amp = 0.22;
    for (int w = 0; w < 5; ++w) {
        Eigen::Vector3d k(dir(rng), dir(rng), dir(rng));
        waves.push_back({k.normalized() * freq(rng), amp, dir(rng) * M_PI});
        amp *= 0.8;
    }
    for (auto& v : m.vertices) {
        double r = 1.0;
        for (const auto& w : waves) r += w.amp * std::sin(w.k.dot(v) * M_PI + w.phase);
        v *= r;
    }
    m.finalize();
    return m;
}

TriMesh bumpy_torus(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    double a = phase(rng), b = phase(rng), c = phase(rng), d = phase(rng);
    const double R = 2.0, r0 = 0.8;
    TriMesh m;
    m.vertices.reserve(static_cast<size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        double theta = 2.0 * M_PI * i / rows; // minor circle
        for (int j = 0; j < cols; ++j) {
            double phi = 2.0 * M_PI * j / cols; // major circle
            double r = r0 * (1.0 + 0.15 * std::sin(3 * theta + a) * std::cos(2 * phi + b) +
                             0.10 * std::sin(5 * phi + c) + 0.07 * std::sin(2 * theta + d));
            double w = R + r * std::cos(theta);
            m.vertices.emplace_back(w * std::cos(phi), w * std::sin(phi), r * std::sin(theta));
        }
    }
    auto id = [rows, cols](int i, int j) { return ((i + rows) % rows) * cols + (j + cols) % cols; };
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            m.triangles.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
        }
    m.finalize();
    return m;
}

PointCloud sphere_cloud(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(n);
    while (static_cast<int>(pts.size()) < n) {
        Eigen::Vector3d p(gauss(rng), gauss(rng), gauss(rng));
        double norm = p.norm();
        if (norm < 1e-6) continue;
        pts.push_back(p / norm);
    }
    return cloud_from_points(std::move(pts));
}

} // namespace sqmatch::testsupport
