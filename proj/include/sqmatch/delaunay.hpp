#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace sqmatch {

/// Sign of the signed area of triangle (a,b,c): +1 counterclockwise,
/// -1 clockwise, 0 collinear. Exact: a floating-point filter with an
/// arbitrary-precision rational fallback.
int orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);

/// Sign of the incircle determinant for counterclockwise (a,b,c): +1 when
/// d lies strictly inside the circumcircle, -1 strictly outside, 0 on it.
/// Exact in the same sense as orient2d.
int incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
             const Eigen::Vector2d& d);

/// Delaunay triangulation of a planar point set (incremental Bowyer-Watson
/// with an infinite vertex, so the convex hull needs no scaffolding).
/// Returns counterclockwise index triples. Points that exactly coincide
/// with an earlier point are skipped; fully collinear input yields no
/// triangles.
std::vector<std::array<int, 3>> delaunay2d(std::span<const Eigen::Vector2d> points);

} // namespace sqmatch
