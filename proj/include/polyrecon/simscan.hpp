#pragma once

// Synthetic data: shape generators, a virtual range scanner with depth
// noise, and signed-distance-labeled query sets.

#include "polyrecon/io.hpp"
#include "polyrecon/mesh.hpp"
#include "polyrecon/primitives.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace polyrecon {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); used for per-pose substreams.
Rng substream(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------- shapes

PolyMesh box_mesh(const Aabb& box);
/// Extrudes a counter-clockwise footprint (seen from +z) between z0 and z1.
PolyMesh prism_mesh(const std::vector<Eigen::Vector2d>& footprint, double z0, double z1);
std::vector<Eigen::Vector2d> l_footprint(double w, double d, double arm);
std::vector<Eigen::Vector2d> t_footprint(double w, double d, double stem);
std::vector<Eigen::Vector2d> u_footprint(double w, double d, double arm);
/// Box of w x d with a ridge along x at `ridge` above the eaves at `eave`.
PolyMesh gable_mesh(double w, double d, double eave, double ridge);
PolyMesh uv_sphere(double radius, int slices, int stacks);
/// Surface of a union of grid boxes. The grid has lines xs, ys, zs and
/// `filled[(k * ny + j) * nx + i]` marks box (i, j, k). Coplanar faces are merged.
PolyMesh voxel_union_mesh(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& zs,
                          const std::vector<char>& filled);
/// Stepped block building on an irregular grid with random heights.
PolyMesh random_building(std::uint64_t seed, int min_cols = 3, int max_cols = 5);
/// A few random shapes at random headings on separate lots of a city block.
PolyMesh random_block(std::uint64_t seed, int min_buildings = 3, int max_buildings = 5);
/// One of: box, L, T, U prism, gable, stepped block. `kind` < 0 picks at random.
PolyMesh random_shape(std::uint64_t seed, int kind = -1);
inline constexpr int kShapeKinds = 6;

// ---------------------------------------------------------------- normalization

struct SceneScale {
  double R = 1.0;  // largest bounding-box side
};

struct NormalizedMesh {
  PolyMesh mesh;
  SceneScale scale;
};

/// Centers the bounding box at the origin and scales its largest side to 1.
/// Throws std::invalid_argument for an empty or zero-extent mesh.
NormalizedMesh normalize_mesh(const PolyMesh& mesh);

// ---------------------------------------------------------------- scanner

enum class PoseMode { Random, Fibonacci };

struct ScanConfig {
  int poses = 32;
  /// Pose distance from the bounding-box center, in bounding-box diagonals.
  double sphere_radius = 3.0;
  bool hemisphere_only = false;
  PoseMode pose_mode = PoseMode::Random;
  int rays_u = 128;
  int rays_v = 128;
  /// Field of view covers the bounding sphere plus this margin.
  double fov_margin = 0.1;
  double noise_sigma = 0.0;  // absolute
  std::uint64_t seed = 1;
};

void validate(const ScanConfig& config);

struct Ray {
  Point3 origin;
  Vec3 direction;  // unit
};

/// Pose origins around `target`. Hemisphere mode keeps z >= center z.
std::vector<Point3> scan_poses(const Aabb& target, const ScanConfig& config);
/// Pinhole grid of rays from `origin` aimed at the center of `target`.
std::vector<Ray> pose_rays(const Point3& origin, const Aabb& target, const ScanConfig& config);

struct ScanSample {
  Point3 point;
  int pose = 0;
  Vec3 direction;     // unit ray direction
  double depth = 0.0; // exact first-hit distance
  double noise = 0.0; // added along the ray
};

struct ScanResult {
  PointCloud points;
  std::vector<ScanSample> samples;  // parallel to points
  std::vector<Point3> poses;
  std::size_t rays_cast = 0;
};

/// Casts rays against the BVH; a hit at depth t becomes origin + dir * (t + noise).
void cast_rays(const TriangleBvh& bvh, std::span<const Ray> rays, double sigma, Rng& rng, int pose, ScanResult& out);

/// Throws std::runtime_error when no ray hits.
ScanResult scan(const PolyMesh& mesh, const ScanConfig& config);

// ---------------------------------------------------------------- noise levels

inline constexpr std::array<double, 5> kEvalNoiseLevels = {0.0, 0.001, 0.005, 0.010, 0.050};
inline constexpr double kTrainNoiseMax = 0.005;

/// Evaluation noise level `level` (0..4) times R. Throws std::out_of_range otherwise.
double eval_noise(int level, const SceneScale& scale);
/// Training noise drawn from U[0, 0.005 R].
double train_noise(Rng& rng, const SceneScale& scale);

// ---------------------------------------------------------------- queries

enum class QueryKind { NearSurface, Volume };

struct QuerySampleSet {
  std::vector<Point3> points;
  std::vector<double> sdf;
  std::vector<QueryKind> kind;
  std::vector<int> dropout;  // indices of the retained subset
};

struct QueryConfig {
  std::size_t near_surface = 1000;
  std::size_t volume = 1000;
  std::size_t keep = 1000;
  double displacement = 0.02;  // times R
};

/// Near-surface samples displaced along face normals plus uniform box
/// samples, labeled with the exact signed distance. Throws on an open mesh.
QuerySampleSet sample_queries(const PolyMesh& mesh, const SceneScale& scale, std::uint64_t seed,
                              const QueryConfig& config = {});
void write_queries_csv(const std::filesystem::path& path, const QuerySampleSet& queries, bool dropout_only = false);

// ---------------------------------------------------------------- ground-truth segments

/// One segment per mesh face with `per_area` points per unit area (at
/// least `min_points`), for partitioning benchmarks without detection noise.
struct FaceSegments {
  PointCloud cloud;
  std::vector<PlanarSegment> segments;
};
FaceSegments face_segments(const PolyMesh& mesh, double per_area, std::size_t min_points, std::uint64_t seed);

// ---------------------------------------------------------------- manifests

struct ManifestEntry {
  std::string mesh;
  std::string split;  // train | val | test
  std::uint64_t seed = 0;
  double sigma = 0.0;
  bool hemisphere_only = false;
  std::size_t points = 0;
  std::size_t queries = 0;
  std::string cloud_checksum;
};

/// Split counts of the reference building corpus.
inline constexpr std::array<std::size_t, 3> kSplitSizes = {678, 45, 45};

nlohmann::json dataset_manifest(const std::vector<ManifestEntry>& entries);
nlohmann::json scan_manifest(const ScanConfig& config, const ScanResult& result, const std::string& mesh_path);

}  // namespace polyrecon
