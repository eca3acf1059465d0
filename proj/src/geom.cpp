#include "polyrecon/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace polyrecon {

bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

Plane::Plane(const Vec3& n, double d) {
  const double len = n.norm();
  if (!std::isfinite(len) || !std::isfinite(d) || len < 1e-300) {
    throw std::invalid_argument("Plane: normal must be finite and nonzero");
  }
  normal = n / len;
  offset = d / len;
}

Plane Plane::from_point_normal(const Point3& p, const Vec3& n) {
  const Vec3 u = n.normalized();
  return Plane(u, u.dot(p));
}

Plane Plane::from_points(const Point3& a, const Point3& b, const Point3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), 1e-300});
  if (n.squaredNorm() <= 1e-24 * scale * scale) {
    throw std::invalid_argument("Plane::from_points: collinear points");
  }
  return from_point_normal(a, n);
}

Plane Plane::flipped() const {
  Plane p;
  p.normal = -normal;
  p.offset = -offset;
  return p;
}

Plane Plane::canonical() const {
  constexpr double kZero = 1e-12;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(normal[k]) > kZero) {
      return normal[k] > 0.0 ? *this : flipped();
    }
  }
  return *this;
}

bool same_plane(const Plane& a, const Plane& b, double angle_tol, double offset_tol) {
  const double c = std::clamp(a.normal.dot(b.normal), -1.0, 1.0);
  return std::acos(c) < angle_tol && std::abs(a.offset - b.offset) < offset_tol;
}

Side plane_side(const Plane& plane, const Point3& p, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("plane_side: eps must be positive");
  if (!all_finite(p) || !all_finite(plane.normal) || !std::isfinite(plane.offset)) {
    throw std::invalid_argument("plane_side: non-finite input");
  }
  const double s = plane.signed_distance(p);
  if (s > eps) return Side::Positive;
  if (s < -eps) return Side::Negative;
  return Side::On;
}

Aabb Aabb::empty() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {Point3(inf, inf, inf), Point3(-inf, -inf, -inf)};
}

Aabb Aabb::of_points(std::span<const Point3> pts) {
  Aabb b = empty();
  for (const auto& p : pts) b.expand(p);
  return b;
}

void Aabb::expand(const Point3& p) {
  min = min.cwiseMin(p);
  max = max.cwiseMax(p);
}

void Aabb::expand(const Aabb& b) {
  min = min.cwiseMin(b.min);
  max = max.cwiseMax(b.max);
}

Aabb Aabb::padded(double amount) const {
  const Vec3 d = Vec3::Constant(amount);
  return {min - d, max + d};
}

Aabb Aabb::padded_relative(double fraction) const {
  const Vec3 d = fraction * extent();
  return {min - d, max + d};
}

bool Aabb::intersects(const Aabb& o) const {
  return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
}

bool Aabb::contains(const Point3& p, double eps) const {
  return (p.array() >= min.array() - eps).all() && (p.array() <= max.array() + eps).all();
}

double Aabb::volume() const {
  if (is_empty()) return 0.0;
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

std::array<Plane, 6> Aabb::walls() const {
  return {Plane(Vec3(-1, 0, 0), -min.x()), Plane(Vec3(1, 0, 0), max.x()),
          Plane(Vec3(0, -1, 0), -min.y()), Plane(Vec3(0, 1, 0), max.y()),
          Plane(Vec3(0, 0, -1), -min.z()), Plane(Vec3(0, 0, 1), max.z())};
}

Vec3 polygon_normal(const Polygon& poly) {
  Vec3 n = Vec3::Zero();
  if (poly.size() < 3) return n;
  // Newell's method about the first vertex to limit cancellation.
  const Vec3& o = poly.front();
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    n += (poly[i] - o).cross(poly[i + 1] - o);
  }
  return 0.5 * n;
}

double polygon_area(const Polygon& poly) { return polygon_normal(poly).norm(); }

Point3 polygon_centroid(const Polygon& poly) {
  if (poly.empty()) return Point3::Zero();
  const Vec3 n = polygon_normal(poly);
  const double a2 = n.squaredNorm();
  Point3 mean = Point3::Zero();
  for (const auto& p : poly) mean += p;
  mean /= static_cast<double>(poly.size());
  if (a2 <= 0.0) return mean;
  Point3 c = Point3::Zero();
  double w = 0.0;
  const Vec3& o = poly.front();
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    const double ai = 0.5 * (poly[i] - o).cross(poly[i + 1] - o).dot(n) / std::sqrt(a2);
    c += ai * (o + poly[i] + poly[i + 1]) / 3.0;
    w += ai;
  }
  return std::abs(w) > 0.0 ? Point3(c / w) : mean;
}

PolygonSplit split_polygon(const Polygon& poly, const Plane& plane, double eps) {
  PolygonSplit out;
  const std::size_t n = poly.size();
  if (n < 3) return out;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = plane.signed_distance(poly[i]);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const Point3& a = poly[i];
    if (s[i] >= -eps) out.positive.push_back(a);
    if (s[i] <= eps) out.negative.push_back(a);
    if ((s[i] > eps && s[j] < -eps) || (s[i] < -eps && s[j] > eps)) {
      const double t = s[i] / (s[i] - s[j]);
      const Point3 x = a + t * (poly[j] - a);
      out.positive.push_back(x);
      out.negative.push_back(x);
    }
  }
  if (out.positive.size() < 3) out.positive.clear();
  if (out.negative.size() < 3) out.negative.clear();
  return out;
}

std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
  const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  const Vec3 u = n.cross(a).normalized();
  const Vec3 v = n.cross(u);
  return {u, v};
}

}  // namespace polyrecon
