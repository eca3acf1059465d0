#pragma once

// Convex polytopes with cached boundary, split by incremental halfspace clipping.

#include "polyrecon/geom.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace polyrecon {

/// Face source tag for the six walls of a bounding box: wall k -> -(k + 1).
constexpr int wall_source(int k) { return -(k + 1); }
constexpr bool is_wall_source(int source) { return source < 0; }
constexpr int wall_index(int source) { return -source - 1; }

struct CellFace {
  std::vector<int> ring;  // vertex indices, counter-clockwise seen from outside
  Plane plane;            // outward supporting plane
  int source = 0;         // inserted plane id (>= 0) or wall tag (< 0)
};

/// The cell lies on `side` of `plane`.
struct HalfSpace {
  Plane plane;
  Side side = Side::Negative;
};

class ConvexCell {
 public:
  ConvexCell() = default;
  /// Builds the cell and its measures. Throws std::invalid_argument when the
  /// boundary is degenerate or encloses no volume.
  ConvexCell(std::vector<Point3> vertices, std::vector<CellFace> faces);

  static ConvexCell box(const Aabb& b);

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<CellFace>& faces() const { return faces_; }
  double volume() const { return volume_; }
  const Point3& centroid() const { return centroid_; }
  const Aabb& bounds() const { return bounds_; }

  Polygon face_polygon(std::size_t f) const;
  /// Canonicalized bounding halfspaces, one per face.
  std::vector<HalfSpace> halfspaces() const;
  bool contains(const Point3& p, double eps) const;

 private:
  std::vector<Point3> vertices_;
  std::vector<CellFace> faces_;
  double volume_ = 0.0;
  Point3 centroid_ = Point3::Zero();
  Aabb bounds_ = Aabb::empty();
};

struct CellMeasures {
  double volume = 0.0;
  Point3 centroid = Point3::Zero();
};

/// Volume by fan tetrahedra from the vertex mean; volume-weighted centroid.
/// Throws std::invalid_argument for an open or degenerate boundary.
CellMeasures cell_measures(const std::vector<Point3>& vertices, const std::vector<CellFace>& faces);
inline CellMeasures cell_measures(const ConvexCell& cell) {
  return cell_measures(cell.vertices(), cell.faces());
}

struct ClipOptions {
  double on_plane_eps = tol::kOnPlane;
  double volume_eps = tol::kVolume;
  int source = 0;  // tag given to the new cap faces
};

struct SplitResult {
  enum class Kind { Both, AllPositive, AllNegative };
  Kind kind = Kind::AllPositive;
  std::optional<ConvexCell> positive;
  std::optional<ConvexCell> negative;
  /// cell ∩ plane, oriented with the plane normal (outward from the negative child).
  Polygon shared_face;
};

/// Splits `cell` by `plane`. A split leaving either side below the volume
/// epsilon is reported as the side holding the larger part.
SplitResult clip_cell(const ConvexCell& cell, const Plane& plane, const ClipOptions& opts = {});

}  // namespace polyrecon
