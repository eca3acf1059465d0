#pragma once

// Floating-point geometry kernel: points, planes, boxes and planar polygons.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <span>
#include <vector>

namespace polyrecon {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;

/// A planar vertex ring. Orientation follows the right-hand rule.
using Polygon = std::vector<Vec3>;

// Tolerances are expressed for a scene normalized to the unit box and
// scaled by the scene extent where a scale is available.
namespace tol {
inline constexpr double kOnPlane = 1e-8;
inline constexpr double kVolume = 1e-12;
inline constexpr double kUnitNormal = 1e-9;
inline constexpr double kWeld = 1e-7;
}  // namespace tol

enum class Side { Positive, Negative, On };

/// Oriented plane {p : normal . p = offset}.
struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;

  Plane() = default;
  /// Normalizes `n`; throws std::invalid_argument on a zero or non-finite normal.
  Plane(const Vec3& n, double d);

  static Plane from_point_normal(const Point3& p, const Vec3& n);
  /// Plane through three points, oriented by (b-a)x(c-a). Throws on collinear input.
  static Plane from_points(const Point3& a, const Point3& b, const Point3& c);

  double signed_distance(const Point3& p) const { return normal.dot(p) - offset; }
  Plane flipped() const;
  /// Representative of {(n,d), (-n,-d)} whose first nonzero normal
  /// component (x, then y, then z) is positive.
  Plane canonical() const;
  Point3 project(const Point3& p) const { return p - signed_distance(p) * normal; }
};

bool same_plane(const Plane& a, const Plane& b, double angle_tol, double offset_tol);

/// Classification of `p` against `plane` with a symmetric tolerance band.
/// Throws std::invalid_argument for non-finite input or eps <= 0.
Side plane_side(const Plane& plane, const Point3& p, double eps);

struct Aabb {
  Point3 min{0.0, 0.0, 0.0};
  Point3 max{0.0, 0.0, 0.0};

  static Aabb empty();
  static Aabb of_points(std::span<const Point3> pts);
  static Aabb unit() { return {Point3(0, 0, 0), Point3(1, 1, 1)}; }

  bool is_empty() const { return (min.array() > max.array()).any(); }
  void expand(const Point3& p);
  void expand(const Aabb& b);
  Aabb padded(double amount) const;
  /// Pads each axis by `fraction` of its own extent on both sides.
  Aabb padded_relative(double fraction) const;
  bool intersects(const Aabb& o) const;
  bool contains(const Point3& p, double eps = 0.0) const;
  Vec3 extent() const { return max - min; }
  Point3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }
  double volume() const;
  /// The six wall planes with outward normals, ordered -x,+x,-y,+y,-z,+z.
  std::array<Plane, 6> walls() const;
};

/// Area-weighted normal (Newell); zero vector for degenerate rings.
Vec3 polygon_normal(const Polygon& poly);
/// Nonnegative area; rings with fewer than three vertices have zero area.
double polygon_area(const Polygon& poly);
Point3 polygon_centroid(const Polygon& poly);

/// Splits a convex planar ring by a plane. Vertices within `eps` of the
/// plane go to both sides. Returned rings keep the input orientation;
/// a side with fewer than three vertices is returned empty.
struct PolygonSplit {
  Polygon positive;
  Polygon negative;
};
PolygonSplit split_polygon(const Polygon& poly, const Plane& plane, double eps);

/// Orthonormal (u, v) with u x v = n.
std::pair<Vec3, Vec3> plane_basis(const Vec3& n);

bool all_finite(const Vec3& v);

}  // namespace polyrecon
