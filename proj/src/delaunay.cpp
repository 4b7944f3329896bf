#include "sqmatch/delaunay.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <unordered_map>

namespace sqmatch {

namespace {

using rational = boost::multiprecision::cpp_rational;

// Shewchuk-style static filter constants (epsilon = 2^-53).
constexpr double kOrientErr = 3.3306690621773724e-16;   // (3 + 16 eps) eps
constexpr double kIncircleErr = 1.1102230246251577e-15; // (10 + 96 eps) eps

int sign_of(const rational& r) {
    if (r > 0) return 1;
    if (r < 0) return -1;
    return 0;
}

int orient2d_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   const Eigen::Vector2d& c) {
    rational ax(a.x()), ay(a.y()), bx(b.x()), by(b.y()), cx(c.x()), cy(c.y());
    return sign_of((bx - ax) * (cy - ay) - (by - ay) * (cx - ax));
}

int incircle_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
    rational adx = rational(a.x()) - rational(d.x());
    rational ady = rational(a.y()) - rational(d.y());
    rational bdx = rational(b.x()) - rational(d.x());
    rational bdy = rational(b.y()) - rational(d.y());
    rational cdx = rational(c.x()) - rational(d.x());
    rational cdy = rational(c.y()) - rational(d.y());
    rational det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) +
                   (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
                   (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    return sign_of(det);
}

} // namespace

int orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    double detleft = (b.x() - a.x()) * (c.y() - a.y());
    double detright = (b.y() - a.y()) * (c.x() - a.x());
    double det = detleft - detright;
    double detsum = std::abs(detleft) + std::abs(detright);
    if (std::abs(det) > kOrientErr * detsum) return det > 0 ? 1 : -1;
    if (detsum == 0.0) return 0;
    return orient2d_exact(a, b, c);
}

int incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
             const Eigen::Vector2d& d) {
    double adx = a.x() - d.x(), ady = a.y() - d.y();
    double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    double cdxady = cdx * ady, adxcdy = adx * cdy;
    double adxbdy = adx * bdy, bdxady = bdx * ady;
    double alift = adx * adx + ady * ady;
    double blift = bdx * bdx + bdy * bdy;
    double clift = cdx * cdx + cdy * cdy;
    double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                 clift * (adxbdy - bdxady);
    double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                       (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                       (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    if (std::abs(det) > kIncircleErr * permanent) return det > 0 ? 1 : -1;
    if (permanent == 0.0) return 0;
    return incircle_exact(a, b, c, d);
}

namespace {

constexpr int kInfVtx = -1;

struct Tri {
    std::array<int, 3> v;   // vertex ids, kInfVtx for the infinite vertex
    std::array<int, 3> adj; // neighbor across the edge opposite v[i], -1 none
    bool alive = true;

    bool infinite() const { return v[0] == kInfVtx || v[1] == kInfVtx || v[2] == kInfVtx; }
};

class Triangulation {
public:
    explicit Triangulation(std::span<const Eigen::Vector2d> pts) : pts_(pts) {}

    // true if p lies strictly inside the open segment (a, b); callers
    // guarantee a, b, p are collinear
    bool between(int a, int b, const Eigen::Vector2d& p) const {
        const auto& pa = pts_[a];
        const auto& pb = pts_[b];
        if (pa.x() != pb.x())
            return (pa.x() < p.x()) != (pb.x() < p.x()) && p.x() != pa.x() && p.x() != pb.x();
        return (pa.y() < p.y()) != (pb.y() < p.y()) && p.y() != pa.y() && p.y() != pb.y();
    }

    bool conflicts(const Tri& t, const Eigen::Vector2d& p) const {
        for (int k = 0; k < 3; ++k)
            if (t.v[k] == kInfVtx) {
                int u = t.v[(k + 1) % 3], w = t.v[(k + 2) % 3];
                int o = orient2d(pts_[u], pts_[w], p);
                if (o != 0) return o > 0;
                return between(u, w, p);
            }
        return incircle(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]], p) > 0;
    }

    void init(int i0, int i1, int i2) {
        if (orient2d(pts_[i0], pts_[i1], pts_[i2]) < 0) std::swap(i1, i2);
        tris_.push_back({{i0, i1, i2}, {1, 2, 3}, true});
        // infinite triangles carry reversed hull edges so that the shared
        // edge appears with opposite orientation in the two triangles
        tris_.push_back({{i2, i1, kInfVtx}, {3, 2, 0}, true}); // across edge (i1,i2)
        tris_.push_back({{i0, i2, kInfVtx}, {1, 3, 0}, true}); // across edge (i2,i0)
        tris_.push_back({{i1, i0, kInfVtx}, {2, 1, 0}, true}); // across edge (i0,i1)
        hint_ = 0;
    }

    // returns false when p conflicts with nothing, i.e. duplicates an
    // existing vertex
    bool insert(int pid) {
        const Eigen::Vector2d& p = pts_[pid];
        int start = locate(p);
        if (start < 0) return false;

        // grow the conflict cavity from the located triangle
        std::vector<int> cavity{start};
        std::vector<char> in_cavity(tris_.size(), 0);
        in_cavity[start] = 1;
        std::vector<int> stack{start};
        while (!stack.empty()) {
            int ti = stack.back();
            stack.pop_back();
            for (int nb : tris_[ti].adj) {
                if (nb < 0 || in_cavity[nb]) continue;
                if (conflicts(tris_[nb], p)) {
                    in_cavity[nb] = 1;
                    cavity.push_back(nb);
                    stack.push_back(nb);
                }
            }
        }

        // boundary edges, oriented as seen from the dying triangles
        struct BoundaryEdge {
            int a, b, outside;
        };
        std::vector<BoundaryEdge> boundary;
        for (int ti : cavity) {
            const Tri& t = tris_[ti];
            for (int i = 0; i < 3; ++i) {
                int nb = t.adj[i];
                if (nb >= 0 && in_cavity[nb]) continue;
                boundary.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], nb});
            }
            tris_[ti].alive = false;
        }

        std::unordered_map<int, int> tri_of_a, tri_of_b; // boundary vertex -> new triangle
        std::vector<int> fresh;
        fresh.reserve(boundary.size());
        for (const auto& e : boundary) {
            int ni = alloc();
            tris_[ni] = {{e.a, e.b, pid}, {-1, -1, e.outside}, true};
            if (e.outside >= 0) {
                Tri& out = tris_[e.outside];
                for (int i = 0; i < 3; ++i)
                    if (out.v[(i + 1) % 3] == e.b && out.v[(i + 2) % 3] == e.a) out.adj[i] = ni;
            }
            tri_of_a[e.a] = ni;
            tri_of_b[e.b] = ni;
            fresh.push_back(ni);
        }
        // the cavity boundary is a cycle: tie consecutive fans together
        for (int ni : fresh) {
            Tri& t = tris_[ni];
            t.adj[0] = tri_of_a.at(t.v[1]); // across edge (v1, pid)
            t.adj[1] = tri_of_b.at(t.v[0]); // across edge (pid, v0)
        }
        hint_ = fresh.front();
        return true;
    }

    std::vector<std::array<int, 3>> finite_triangles() const {
        std::vector<std::array<int, 3>> out;
        for (const Tri& t : tris_)
            if (t.alive && !t.infinite()) out.push_back(t.v);
        return out;
    }

private:
    int alloc() {
        tris_.push_back({});
        return static_cast<int>(tris_.size()) - 1;
    }

    // breadth-first scan from the hint; -1 when nothing conflicts
    int locate(const Eigen::Vector2d& p) const {
        std::vector<char> seen(tris_.size(), 0);
        std::vector<int> queue{hint_};
        seen[hint_] = 1;
        for (size_t qi = 0; qi < queue.size(); ++qi) {
            int ti = queue[qi];
            if (tris_[ti].alive && conflicts(tris_[ti], p)) return ti;
            for (int nb : tris_[ti].adj)
                if (nb >= 0 && !seen[nb]) {
                    seen[nb] = 1;
                    queue.push_back(nb);
                }
        }
        // adjacency only spans live triangles reachable from the hint;
        // fall back to a full scan before declaring a duplicate
        for (int ti = 0; ti < static_cast<int>(tris_.size()); ++ti)
            if (tris_[ti].alive && conflicts(tris_[ti], p)) return ti;
        return -1;
    }

    std::span<const Eigen::Vector2d> pts_;
    std::vector<Tri> tris_;
    int hint_ = 0;
};

} // namespace

std::vector<std::array<int, 3>> delaunay2d(std::span<const Eigen::Vector2d> points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) return {};
    int i0 = 0, i1 = -1, i2 = -1;
    for (int i = 1; i < n && i1 < 0; ++i)
        if (points[i] != points[i0]) i1 = i;
    if (i1 < 0) return {};
    for (int i = i1 + 1; i < n && i2 < 0; ++i)
        if (orient2d(points[i0], points[i1], points[i]) != 0) i2 = i;
    if (i2 < 0) return {};

    Triangulation tr(points);
    tr.init(i0, i1, i2);
    for (int i = 1; i < n; ++i) {
        if (i == i1 || i == i2) continue;
        tr.insert(i);
    }
    return tr.finite_triangles();
}

} // namespace sqmatch
