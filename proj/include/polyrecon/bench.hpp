#pragma once

// Metrics, the end-to-end reconstruction pipeline and partitioning benchmarks.

#include "polyrecon/complex.hpp"
#include "polyrecon/mesh.hpp"
#include "polyrecon/occupancy.hpp"
#include "polyrecon/shell.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyrecon {

// ---------------------------------------------------------------- metrics

struct HausdorffResult {
  double smh = 0.0;  // mean of the two directional mean distances
  double max = 0.0;  // largest sampled distance in either direction
  double mean_ab = 0.0;
  double mean_ba = 0.0;
};

inline constexpr std::size_t kDefaultHausdorffSamples = 100000;

/// Symmetric comparison of two surfaces from `n_samples` area-weighted
/// samples per side. Each mesh's samples depend only on the seed and its own
/// geometry, so the result is exactly symmetric in (a, b).
/// Throws std::invalid_argument for empty meshes or n_samples < 1000.
HausdorffResult hausdorff(const PolyMesh& a, const PolyMesh& b, std::size_t n_samples = kDefaultHausdorffSamples,
                          std::uint64_t seed = 1);

struct PointDistance {
  double mean = 0.0;
  double max = 0.0;
};
/// One-directional point-to-surface distances.
PointDistance hausdorff_points(const PointCloud& points, const PolyMesh& surface);

struct WatertightReport {
  bool closed = false;
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;
  double signed_volume = 0.0;
};
WatertightReport watertight_check(const PolyMesh& mesh);
nlohmann::json to_json(const WatertightReport& r);

// ---------------------------------------------------------------- pipeline

struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& message)
      : std::runtime_error(stage_name + ": " + message), stage(std::move(stage_name)) {}
  std::string stage;
};

/// Lengths marked "fraction" are multiplied by R, the largest side of the
/// input cloud's bounding box.
struct PipelineConfig {
  std::filesystem::path cloud;
  std::string provider;  // oracle:<mesh> | sdf:<file>
  std::filesystem::path ground_truth;  // optional; defaults to the oracle mesh
  std::filesystem::path output_dir = "out";

  double inlier_fraction = 0.005;
  double normal_consistency = 0.9;
  std::size_t min_support = 50;
  std::size_t max_iterations = 2000;
  double cluster_radius_fraction = 0.0;  // 0 = automatic
  std::uint64_t ransac_seed = 1;

  double angle_tolerance_deg = 5.0;
  double refine_distance_fraction = 0.01;

  PartitionMode strategy = PartitionMode::Adaptive;
  double aabb_padding = 0.05;
  double segment_padding_fraction = 0.01;
  std::size_t max_cells = 1'000'000;
  /// Admit the bounding-box walls as shell faces (scans without a bottom).
  bool aabb_walls = false;

  double beta = kDefaultGain;
  double lambda = 0.001;

  std::size_t hausdorff_samples = kDefaultHausdorffSamples;
  std::uint64_t hausdorff_seed = 1;
  std::string mesh_format = "obj";  // obj | ply
};

/// Applies `key = value` lines ('#' starts a comment). Keys are the field
/// names above. Throws std::invalid_argument on unknown keys or bad values.
void apply_config_text(PipelineConfig& config, const std::string& text);
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);
void apply_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
nlohmann::json to_json(const PipelineConfig& config);
void validate(const PipelineConfig& config);

/// Parses a provider spec. The oracle variant also returns its mesh.
std::unique_ptr<SdfProvider> make_provider(const std::string& spec, PolyMesh* oracle_mesh = nullptr);

struct ReconReport {
  std::optional<double> smh;            // fraction of the ground-truth bbox diagonal
  std::optional<double> hausdorff_max;  // same normalization
  std::optional<double> cloud_to_mesh;  // mean input-point distance, fraction of the cloud bbox diagonal
  std::size_t face_count_raw = 0;
  std::size_t face_count_merged = 0;
  std::size_t merge_flagged = 0;
  std::size_t cell_count = 0;
  std::size_t segments_detected = 0;
  std::size_t segments_refined = 0;
  std::size_t interior_cells = 0;
  double interior_volume = 0.0;
  double energy = 0.0;
  double smoothness = 0.0;
  WatertightReport watertight;
  std::map<std::string, double> runtimes;  // seconds per stage, kept out of the JSON report
};
nlohmann::json to_json(const ReconReport& report);

struct PipelineResult {
  ReconReport report;
  Shell shell;
  MergeResult merged;
  Labeling labeling;
};

/// detect, refine, plan, partition, occupancy, labeling, shell, merge,
/// metrics. Writes every intermediate to the output directory, plus
/// report.json (deterministic) and timings.json. Stage failures throw
/// StageError.
PipelineResult run_pipeline(const PipelineConfig& config);

/// Same pipeline on in-memory inputs, without writing files.
PipelineResult reconstruct(const PointCloud& cloud, const SdfProvider& provider, const PipelineConfig& config,
                           const PolyMesh* ground_truth = nullptr);

// ---------------------------------------------------------------- partitioning

struct PartitionInput {
  std::string name;
  PointCloud cloud;
  std::vector<PlanarSegment> segments;
};

struct PartitionRow {
  std::string scene;
  PartitionMode mode = PartitionMode::Adaptive;
  std::size_t primitives = 0;
  std::size_t cells = 0;
  std::size_t splits = 0;
  double seconds = 0.0;
  bool truncated = false;
};

/// Builds both complexes from the same ordered primitives for every input.
std::vector<PartitionRow> compare_partitioning(const std::vector<PartitionInput>& inputs,
                                               const PartitionStrategy& strategy = {});
std::string partition_csv(const std::vector<PartitionRow>& rows);

}  // namespace polyrecon
