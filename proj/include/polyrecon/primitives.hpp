#pragma once

// Planar primitive detection (RANSAC) and refinement by iterative merging.

#include "polyrecon/geom.hpp"
#include "polyrecon/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace polyrecon {

struct PlanarSegment {
  Plane plane;
  std::vector<int> inliers;  // indices into the point cloud

  std::size_t support() const { return inliers.size(); }
};

/// Distances are absolute, in point-cloud units.
struct RansacParams {
  double inlier_distance = 0.005;
  /// Minimum |cos| between a sampled candidate normal and the normal refit
  /// to its consensus set; lower agreement means the consensus mixes structures.
  double normal_consistency = 0.9;
  std::size_t min_support = 50;
  std::size_t max_iterations = 2000;
  std::uint64_t seed = 1;
  /// Neighbor radius for splitting a consensus set into connected
  /// components; <= 0 selects max(3 * inlier_distance, 4 * median spacing).
  double cluster_radius = 0.0;
};

struct RefineParams {
  double angle_tolerance = 5.0 * std::numbers::pi / 180.0;  // radians
  double distance_tolerance = 0.01;
};

/// Least-squares plane through the centroid; normal is the eigenvector of
/// the smallest covariance eigenvalue. Throws std::invalid_argument for
/// fewer than three points or (near) collinear input.
Plane fit_plane_pca(std::span<const Point3> points);
Plane fit_plane_pca(const PointCloud& cloud, std::span<const int> indices);

/// Unoriented angle between plane normals, in [0, pi/2].
double plane_angle(const Plane& a, const Plane& b);

/// Maximum over both directions of the mean orthogonal distance of one
/// segment's inliers to the other's plane.
double segment_distance(const PointCloud& cloud, const PlanarSegment& a, const PlanarSegment& b);

double residual_rms(const PointCloud& cloud, const PlanarSegment& s);

/// Extracts planes largest-consensus first, removing inliers between
/// rounds. Deterministic for a fixed seed; returns an empty list when no
/// plane reaches min_support.
std::vector<PlanarSegment> detect_planes(const PointCloud& cloud, const RansacParams& params);

/// Priority-queue merging of segment pairs in ascending angle order. A pair
/// merges when its angle is below the angle tolerance and its distance is
/// below the distance tolerance; the merged plane is refit by PCA. Stops at
/// the first popped pair whose angle reaches the tolerance.
std::vector<PlanarSegment> refine_planes(const PointCloud& cloud, std::vector<PlanarSegment> segments,
                                         const RefineParams& params);

nlohmann::json segments_to_json(const std::vector<PlanarSegment>& segments, const PointCloud& cloud);
/// Throws IoError when the stored checksum does not match `cloud`.
std::vector<PlanarSegment> segments_from_json(const nlohmann::json& j, const PointCloud& cloud);

}  // namespace polyrecon
