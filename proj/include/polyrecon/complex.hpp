#pragma once

// Convex cell complex built by binary space partitioning of a bounding box
// with planar primitives, keeping the BSP tree and cell adjacency.

#include "polyrecon/convex_cell.hpp"
#include "polyrecon/primitives.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <limits>
#include <span>
#include <vector>

namespace polyrecon {

inline constexpr double kVerticalThreshold = 0.9;

/// 1 - |n_z|: 1 for walls, 0 for horizontal planes.
double verticality(const Plane& plane);

struct PlanEntry {
  int segment = 0;  // index into the segment list, or a wall tag (< 0)
  double verticality = 0.0;
  std::size_t support = 0;
  bool vertical = false;
};

struct InsertionPlan {
  std::vector<PlanEntry> entries;
  /// The six box walls are admissible shell faces.
  bool wall_faces = false;
};

/// Vertical segments (verticality > 0.9) first, then by descending support;
/// ties keep input order.
InsertionPlan plan_insertion(std::span<const PlanarSegment> segments);

/// Appends the six bounding-box walls as virtual primitives. They never split
/// a cell but make wall facets admissible shell faces, which completes
/// surfaces missing from the scan (e.g. an unobserved ground floor).
InsertionPlan augment_bounds_faces(InsertionPlan plan);

enum class PartitionMode { Adaptive, Exhaustive };

struct PartitionStrategy {
  PartitionMode mode = PartitionMode::Adaptive;
  /// Bounds padding per side, as a fraction of each axis extent.
  double aabb_padding = 0.05;
  /// Absolute padding of a primitive's inlier box for the correlation test.
  double segment_padding = 0.01;
  /// Insertion stops once the complex holds this many cells.
  std::size_t max_cells = 1'000'000;
};

/// A plane to insert plus the region it may split (adaptive mode).
struct Primitive {
  Plane plane;
  Aabb region;
  int id = 0;
};

struct Adjacency {
  int a = 0;
  int b = 0;
  Polygon face;  // common facet, oriented outward from cell a
  double area = 0.0;
  int source = 0;  // plane id the facet lies on
};

struct BspNode {
  Plane plane;
  int source = -1;
  int positive = -1;
  int negative = -1;
  int cell = -1;  // leaf cell, -1 for inner nodes
};

struct InsertionRecord {
  int source = 0;
  int splits = 0;
};

class CellComplex {
 public:
  explicit CellComplex(const Aabb& bounds);

  const Aabb& bounds() const { return bounds_; }
  const std::vector<ConvexCell>& cells() const { return cells_; }
  const std::vector<Adjacency>& adjacency() const { return adjacency_; }
  const std::vector<BspNode>& nodes() const { return nodes_; }
  const std::vector<InsertionRecord>& log() const { return log_; }
  const std::vector<Plane>& planes() const { return planes_; }

  bool wall_faces() const { return wall_faces_; }
  void set_wall_faces(bool on) { wall_faces_ = on; }
  bool truncated() const { return truncated_; }

  double scale() const { return bounds_.diagonal(); }
  ClipOptions clip_options(int source) const;

  /// Splits every leaf cell straddled by the plane (exhaustive) or only
  /// those whose bounding box also meets `prim.region` (adaptive).
  /// Returns the number of cells split; the complex is unchanged when none.
  int insert(const Primitive& prim, PartitionMode mode, std::size_t max_cells = std::numeric_limits<std::size_t>::max());

  /// Walls (-x,+x,-y,+y,-z,+z) carrying a facet of the cell.
  std::array<bool, 6> boundary_flags(int cell) const;
  /// Largest facet area over interior and wall facets.
  double max_face_area() const;
  double total_volume() const;

 private:
  void split_records(int cell, int pos_index, int neg_index, const Plane& plane, int source);

  Aabb bounds_;
  std::vector<ConvexCell> cells_;
  std::vector<int> leaf_of_cell_;
  std::vector<std::vector<int>> records_of_cell_;
  std::vector<Adjacency> adjacency_;
  std::vector<BspNode> nodes_;
  std::vector<InsertionRecord> log_;
  std::vector<Plane> planes_;  // plane by source id
  bool wall_faces_ = false;
  bool truncated_ = false;
};

/// Bounds for a segment set: the inlier box padded per side by `padding`
/// times each axis extent. Falls back to the whole cloud without segments.
Aabb complex_bounds(std::span<const PlanarSegment> segments, const PointCloud& cloud, double padding);

/// Inserts planned primitives in order. Returns a single-cell complex for
/// an empty plan.
CellComplex build_complex(std::span<const Primitive> ordered, const Aabb& bounds, const PartitionStrategy& strategy);
CellComplex build_complex(std::span<const PlanarSegment> segments, const PointCloud& cloud,
                          const InsertionPlan& plan, const Aabb& bounds, const PartitionStrategy& strategy);

/// Primitive for a segment: its plane and padded inlier box.
Primitive make_primitive(const PlanarSegment& seg, const PointCloud& cloud, double padding, int id);

nlohmann::json complex_to_json(const CellComplex& complex);

}  // namespace polyrecon
