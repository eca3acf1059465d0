// Command-line front end: scan, detect, refine, partition, reconstruct,
// eval and bench-partition.

#include "polyrecon/bench.hpp"
#include "polyrecon/io.hpp"
#include "polyrecon/primitives.hpp"
#include "polyrecon/simscan.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace polyrecon;
using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return json::parse(in);
}

void write_json(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

double cloud_scale(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("empty point cloud");
  return Aabb::of_points(cloud).extent().maxCoeff();
}

struct ScanArgs {
  std::string mesh, out, queries, normalized, manifest;
  int poses = 32, rays = 128, level = -1;
  double sigma = 0.0;
  bool train = false, hemisphere = false, fibonacci = false, keep_scale = false;
  std::uint64_t seed = 1;
};

int run_scan(const ScanArgs& a) {
  PolyMesh mesh = read_mesh(a.mesh);
  SceneScale scale{mesh.bounds().extent().maxCoeff()};
  if (!a.keep_scale) {
    NormalizedMesh n = normalize_mesh(mesh);
    mesh = std::move(n.mesh);
    scale = n.scale;
  }
  ScanConfig cfg;
  cfg.poses = a.poses;
  cfg.rays_u = cfg.rays_v = a.rays;
  cfg.hemisphere_only = a.hemisphere;
  cfg.pose_mode = a.fibonacci ? PoseMode::Fibonacci : PoseMode::Random;
  cfg.seed = a.seed;
  if (a.level >= 0) {
    cfg.noise_sigma = eval_noise(a.level, scale);
  } else if (a.train) {
    Rng rng = substream(a.seed, 0x7472);
    cfg.noise_sigma = train_noise(rng, scale);
  } else {
    cfg.noise_sigma = a.sigma * scale.R;
  }
  const ScanResult result = scan(mesh, cfg);
  write_point_cloud(a.out, result.points);
  if (!a.normalized.empty()) write_mesh(a.normalized, mesh);
  if (!a.queries.empty()) write_queries_csv(a.queries, sample_queries(mesh, scale, a.seed));
  json m = scan_manifest(cfg, result, a.mesh);
  m["R"] = scale.R;
  if (!a.manifest.empty()) write_json(a.manifest, m);
  std::cout << result.points.size() << " points from " << result.rays_cast << " rays\n";
  return 0;
}

struct DetectArgs {
  std::string cloud, out;
  double inlier = 0.005, cluster = 0.0, normal_consistency = 0.9;
  std::size_t min_support = 50, iterations = 2000;
  std::uint64_t seed = 1;
};

int run_detect(const DetectArgs& a) {
  const PointCloud cloud = read_point_cloud(a.cloud);
  const double R = cloud_scale(cloud);
  RansacParams p;
  p.inlier_distance = a.inlier * R;
  p.cluster_radius = a.cluster * R;
  p.normal_consistency = a.normal_consistency;
  p.min_support = a.min_support;
  p.max_iterations = a.iterations;
  p.seed = a.seed;
  const auto segs = detect_planes(cloud, p);
  write_json(a.out, segments_to_json(segs, cloud));
  std::cout << segs.size() << " segments\n";
  return 0;
}

int run_refine(const std::string& cloud_path, const std::string& in, const std::string& out, double angle_deg,
               double distance) {
  const PointCloud cloud = read_point_cloud(cloud_path);
  RefineParams p;
  p.angle_tolerance = angle_deg * std::numbers::pi / 180.0;
  p.distance_tolerance = distance * cloud_scale(cloud);
  const auto segs = refine_planes(cloud, segments_from_json(read_json(in), cloud), p);
  write_json(out, segments_to_json(segs, cloud));
  std::cout << segs.size() << " segments\n";
  return 0;
}

int run_partition(const std::string& cloud_path, const std::string& in, const std::string& out,
                  const std::string& mode, bool walls, double padding, double segment_padding) {
  const PointCloud cloud = read_point_cloud(cloud_path);
  const auto segs = segments_from_json(read_json(in), cloud);
  PartitionStrategy s;
  s.mode = mode == "exhaustive" ? PartitionMode::Exhaustive : PartitionMode::Adaptive;
  s.aabb_padding = padding;
  s.segment_padding = segment_padding * cloud_scale(cloud);
  InsertionPlan plan = plan_insertion(segs);
  if (walls) plan = augment_bounds_faces(std::move(plan));
  const CellComplex cx = build_complex(segs, cloud, plan, complex_bounds(segs, cloud, s.aabb_padding), s);
  write_json(out, complex_to_json(cx));
  std::cout << cx.cells().size() << " cells\n";
  return 0;
}

int run_eval(const std::string& mesh_path, const std::string& gt, const std::string& cloud_path,
             std::size_t samples, std::uint64_t seed, const std::string& out) {
  const PolyMesh mesh = read_mesh(mesh_path);
  json report = {{"watertight", to_json(watertight_check(mesh))}, {"faces", mesh.faces.size()}};
  if (!gt.empty()) {
    const PolyMesh truth = read_mesh(gt);
    const double diag = truth.bounds().diagonal();
    const HausdorffResult h = hausdorff(mesh, truth, samples, seed);
    report["smh"] = h.smh / diag;
    report["hausdorff_max"] = h.max / diag;
  }
  if (!cloud_path.empty()) {
    const PointCloud cloud = read_point_cloud(cloud_path);
    const PointDistance d = hausdorff_points(cloud, mesh);
    const double diag = Aabb::of_points(cloud).diagonal();
    report["cloud_to_mesh"] = {{"mean", d.mean / diag}, {"max", d.max / diag}};
  }
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(out, report);
  }
  return 0;
}

int run_bench_partition(int scenes, std::uint64_t seed, double density, const std::string& out) {
  std::vector<PartitionInput> inputs;
  for (int i = 0; i < scenes; ++i) {
    const PolyMesh mesh = normalize_mesh(random_block(seed + i)).mesh;
    FaceSegments fs = face_segments(mesh, density, 30, seed + i);
    inputs.push_back({"block_" + std::to_string(i), std::move(fs.cloud), std::move(fs.segments)});
  }
  const std::string csv = partition_csv(compare_partitioning(inputs));
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polygonal surface reconstruction from point clouds"};
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* scan_cmd = app.add_subcommand("scan", "Virtual scan of a mesh: point cloud and query set");
  scan_cmd->add_option("--mesh", scan_args.mesh, "Input mesh (.obj/.ply)")->required();
  scan_cmd->add_option("--out", scan_args.out, "Output point cloud (.ply/.xyz)")->required();
  scan_cmd->add_option("--queries", scan_args.queries, "Query set CSV");
  scan_cmd->add_option("--normalized-mesh", scan_args.normalized, "Write the normalized mesh");
  scan_cmd->add_option("--manifest", scan_args.manifest, "Scan manifest JSON");
  scan_cmd->add_option("--poses", scan_args.poses, "Scanner poses");
  scan_cmd->add_option("--rays", scan_args.rays, "Rays per pose side (rays x rays grid)");
  scan_cmd->add_option("--sigma", scan_args.sigma, "Depth noise as a fraction of R");
  scan_cmd->add_option("--level", scan_args.level, "Evaluation noise level 0..4");
  scan_cmd->add_flag("--train", scan_args.train, "Draw the noise from the training range");
  scan_cmd->add_flag("--hemisphere", scan_args.hemisphere, "Upper-hemisphere poses only");
  scan_cmd->add_flag("--fibonacci", scan_args.fibonacci, "Fibonacci-lattice poses");
  scan_cmd->add_flag("--keep-scale", scan_args.keep_scale, "Do not normalize the mesh");
  scan_cmd->add_option("--seed", scan_args.seed, "Random seed");

  DetectArgs det;
  auto* detect_cmd = app.add_subcommand("detect", "RANSAC plane detection");
  detect_cmd->add_option("--cloud", det.cloud)->required();
  detect_cmd->add_option("--out", det.out)->required();
  detect_cmd->add_option("--inlier", det.inlier, "Inlier distance, fraction of R");
  detect_cmd->add_option("--cluster-radius", det.cluster, "Connectivity radius, fraction of R (0 = auto)");
  detect_cmd->add_option("--normal-consistency", det.normal_consistency);
  detect_cmd->add_option("--min-support", det.min_support);
  detect_cmd->add_option("--iterations", det.iterations);
  detect_cmd->add_option("--seed", det.seed);

  std::string ref_cloud, ref_in, ref_out;
  double ref_angle = 5.0, ref_dist = 0.01;
  auto* refine_cmd = app.add_subcommand("refine", "Merge near-coplanar segments");
  refine_cmd->add_option("--cloud", ref_cloud)->required();
  refine_cmd->add_option("--segments", ref_in)->required();
  refine_cmd->add_option("--out", ref_out)->required();
  refine_cmd->add_option("--angle", ref_angle, "Angle tolerance in degrees");
  refine_cmd->add_option("--distance", ref_dist, "Distance tolerance, fraction of R");

  std::string part_cloud, part_in, part_out, part_mode = "adaptive";
  bool part_walls = false;
  double part_pad = 0.05, part_seg_pad = 0.01;
  auto* part_cmd = app.add_subcommand("partition", "Build the cell complex");
  part_cmd->add_option("--cloud", part_cloud)->required();
  part_cmd->add_option("--segments", part_in)->required();
  part_cmd->add_option("--out", part_out)->required();
  part_cmd->add_option("--strategy", part_mode)->check(CLI::IsMember({"adaptive", "exhaustive"}));
  part_cmd->add_flag("--no-bottom-walls", part_walls, "Admit bounding-box walls as faces");
  part_cmd->add_option("--padding", part_pad, "Bounds padding per side, fraction of extent");
  part_cmd->add_option("--segment-padding", part_seg_pad, "Primitive box padding, fraction of R");

  PipelineConfig cfg;
  std::string config_file, strategy;
  std::optional<double> lambda, beta;
  bool no_bottom = false;
  std::string rec_cloud, rec_provider, rec_out, rec_gt;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Full pipeline");
  rec_cmd->add_option("--config", config_file, "Flat key = value config file");
  rec_cmd->add_option("--cloud", rec_cloud);
  rec_cmd->add_option("--provider", rec_provider, "oracle:<mesh> or sdf:<file>");
  rec_cmd->add_option("--out", rec_out, "Output directory");
  rec_cmd->add_option("--ground-truth", rec_gt, "Reference mesh for metrics");
  rec_cmd->add_option("--lambda", lambda, "Smoothness weight");
  rec_cmd->add_option("--beta", beta, "Occupancy gain");
  rec_cmd->add_option("--strategy", strategy)->check(CLI::IsMember({"adaptive", "exhaustive"}));
  rec_cmd->add_flag("--no-bottom-walls", no_bottom, "Admit bounding-box walls as faces");

  std::string ev_mesh, ev_gt, ev_cloud, ev_out;
  std::size_t ev_samples = kDefaultHausdorffSamples;
  std::uint64_t ev_seed = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Watertightness and distance metrics");
  eval_cmd->add_option("--mesh", ev_mesh)->required();
  eval_cmd->add_option("--ground-truth", ev_gt);
  eval_cmd->add_option("--cloud", ev_cloud, "Point-to-mesh distances from this cloud");
  eval_cmd->add_option("--samples", ev_samples);
  eval_cmd->add_option("--seed", ev_seed);
  eval_cmd->add_option("--out", ev_out);

  int bp_scenes = 10;
  std::uint64_t bp_seed = 1;
  double bp_density = 2000.0;
  std::string bp_out;
  auto* bp_cmd = app.add_subcommand("bench-partition", "Adaptive vs exhaustive partitioning table");
  bp_cmd->add_option("--scenes", bp_scenes);
  bp_cmd->add_option("--seed", bp_seed);
  bp_cmd->add_option("--density", bp_density, "Points per unit area on generated faces");
  bp_cmd->add_option("--out", bp_out, "CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan_cmd) return run_scan(scan_args);
    if (*detect_cmd) return run_detect(det);
    if (*refine_cmd) return run_refine(ref_cloud, ref_in, ref_out, ref_angle, ref_dist);
    if (*part_cmd) return run_partition(part_cloud, part_in, part_out, part_mode, part_walls, part_pad, part_seg_pad);
    if (*eval_cmd) return run_eval(ev_mesh, ev_gt, ev_cloud, ev_samples, ev_seed, ev_out);
    if (*bp_cmd) return run_bench_partition(bp_scenes, bp_seed, bp_density, bp_out);
    if (*rec_cmd) {
      if (!config_file.empty()) load_config_file(cfg, config_file);
      if (!rec_cloud.empty()) cfg.cloud = rec_cloud;
      if (!rec_provider.empty()) cfg.provider = rec_provider;
      if (!rec_out.empty()) cfg.output_dir = rec_out;
      if (!rec_gt.empty()) cfg.ground_truth = rec_gt;
      if (lambda) cfg.lambda = *lambda;
      if (beta) cfg.beta = *beta;
      if (!strategy.empty()) apply_config_value(cfg, "strategy", strategy);
      if (no_bottom) cfg.aabb_walls = true;
      if (cfg.cloud.empty() || cfg.provider.empty()) throw std::invalid_argument("reconstruct needs a cloud and a provider");
      const PipelineResult r = run_pipeline(cfg);
      std::cout << r.report.face_count_merged << " faces, " << (r.report.watertight.closed ? "closed" : "open") << "\n";
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "stage '" << e.stage << "' failed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
