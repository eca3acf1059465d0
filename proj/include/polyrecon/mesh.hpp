#pragma once

// Polygon meshes and a triangle BVH for distance and ray queries.

#include "polyrecon/geom.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace polyrecon {

/// Arbitrary-sided, outward-oriented polygon mesh.
struct PolyMesh {
  std::vector<Point3> vertices;
  std::vector<std::vector<int>> faces;

  Polygon face_polygon(std::size_t f) const;
  Aabb bounds() const { return Aabb::of_points(vertices); }
  /// Throws std::invalid_argument on out-of-range indices or faces with
  /// fewer than three vertices.
  void validate() const;
};

double surface_area(const PolyMesh& mesh);
/// Enclosed volume by the divergence theorem (meaningful for closed meshes).
double signed_volume(const PolyMesh& mesh);

struct Triangle {
  Point3 a, b, c;
  Vec3 normal() const { return (b - a).cross(c - a); }
  double area() const { return 0.5 * normal().norm(); }
};

/// Triangulates every face (ear clipping, so non-convex faces are fine);
/// `face_of` maps triangles back to faces.
std::vector<Triangle> triangulate(const PolyMesh& mesh, std::vector<int>* face_of = nullptr);
/// Ear-clipping triangulation of one simple planar ring; index triples into `ring`.
std::vector<std::array<int, 3>> triangulate_polygon(const Polygon& ring);

/// Edge incidence over position-welded vertices. An edge is a boundary edge
/// when its two directions are used unequally often; non-manifold when more
/// than two faces use it.
struct EdgeStats {
  std::size_t edges = 0;
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;
};
EdgeStats edge_stats(const PolyMesh& mesh);

Point3 closest_point_on_triangle(const Point3& p, const Triangle& t);

struct RayHit {
  double t = 0.0;
  int triangle = -1;
};

/// Moller-Trumbore; returns t > tmin on hit.
std::optional<double> intersect_ray_triangle(const Point3& origin, const Vec3& dir, const Triangle& tri,
                                             double tmin = 0.0);

/// Bounding volume hierarchy over triangles, immutable after construction.
class TriangleBvh {
 public:
  TriangleBvh() = default;
  explicit TriangleBvh(std::vector<Triangle> tris);

  const std::vector<Triangle>& triangles() const { return tris_; }
  bool empty() const { return tris_.empty(); }

  /// Unsigned distance and the closest surface point.
  struct Nearest {
    double distance = 0.0;
    Point3 point = Point3::Zero();
    int triangle = -1;
  };
  Nearest nearest(const Point3& p) const;

  /// First hit along the ray with t > tmin.
  std::optional<RayHit> first_hit(const Point3& origin, const Vec3& dir, double tmin = 0.0) const;
  /// Number of triangle crossings with t > tmin.
  int count_hits(const Point3& origin, const Vec3& dir, double tmin = 0.0) const;

 private:
  struct Node {
    Aabb box;
    int left = -1, right = -1;  // children, or -1 for leaves
    int begin = 0, end = 0;     // leaf triangle range in order_
  };
  int build(int begin, int end, std::vector<Point3>& centers);

  std::vector<Triangle> tris_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Area-weighted uniform samples on the mesh surface with their face normals.
struct SurfaceSample {
  Point3 point;
  Vec3 normal;
};
template <class Rng>
std::vector<SurfaceSample> sample_surface(const PolyMesh& mesh, std::size_t n, Rng& rng);

}  // namespace polyrecon

#include "polyrecon/detail/mesh_sampling.hpp"
