#include "polyrecon/bench.hpp"

#include "polyrecon/io.hpp"
#include "polyrecon/mrf.hpp"
#include "polyrecon/primitives.hpp"
#include "polyrecon/simscan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace polyrecon {

using nlohmann::json;

// ---------------------------------------------------------------- metrics

namespace {

std::uint64_t geometry_stream(const PolyMesh& mesh) {
  return std::stoull(checksum(mesh.vertices), nullptr, 16) ^ (0x9e3779b97f4a7c15ULL * mesh.faces.size());
}

struct DirectedDistance {
  double mean = 0.0;
  double max = 0.0;
};

DirectedDistance sampled_distance(const PolyMesh& from, const TriangleBvh& to, std::size_t n, std::uint64_t seed) {
  Rng rng = substream(seed, geometry_stream(from));
  DirectedDistance d;
  for (const auto& s : sample_surface(from, n, rng)) {
    const double x = to.nearest(s.point).distance;
    d.mean += x;
    d.max = std::max(d.max, x);
  }
  d.mean /= static_cast<double>(n);
  return d;
}

}  // namespace

HausdorffResult hausdorff(const PolyMesh& a, const PolyMesh& b, std::size_t n_samples, std::uint64_t seed) {
  if (a.faces.empty() || b.faces.empty()) throw std::invalid_argument("hausdorff: empty mesh");
  if (n_samples < 1000) throw std::invalid_argument("hausdorff: need at least 1000 samples");
  const TriangleBvh ta(triangulate(a)), tb(triangulate(b));
  const DirectedDistance ab = sampled_distance(a, tb, n_samples, seed);
  const DirectedDistance ba = sampled_distance(b, ta, n_samples, seed);
  return {0.5 * (ab.mean + ba.mean), std::max(ab.max, ba.max), ab.mean, ba.mean};
}

PointDistance hausdorff_points(const PointCloud& points, const PolyMesh& surface) {
  if (points.empty() || surface.faces.empty()) throw std::invalid_argument("hausdorff_points: empty input");
  const TriangleBvh bvh(triangulate(surface));
  PointDistance d;
  for (const auto& p : points) {
    const double x = bvh.nearest(p).distance;
    d.mean += x;
    d.max = std::max(d.max, x);
  }
  d.mean /= static_cast<double>(points.size());
  return d;
}

WatertightReport watertight_check(const PolyMesh& mesh) {
  const EdgeStats es = edge_stats(mesh);
  return {es.boundary_edges == 0, es.boundary_edges, es.nonmanifold_edges, signed_volume(mesh)};
}

json to_json(const WatertightReport& r) {
  return {{"closed", r.closed},
          {"boundary_edges", r.boundary_edges},
          {"nonmanifold_edges", r.nonmanifold_edges},
          {"signed_volume", r.signed_volume}};
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument("config: bad number for '" + key + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return std::stoull(v);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace

void apply_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  const std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"cloud", [&](const std::string& v) { c.cloud = v; }},
      {"provider", [&](const std::string& v) { c.provider = v; }},
      {"ground_truth", [&](const std::string& v) { c.ground_truth = v; }},
      {"output_dir", [&](const std::string& v) { c.output_dir = v; }},
      {"inlier_fraction", [&](const std::string& v) { c.inlier_fraction = to_double(key, v); }},
      {"normal_consistency", [&](const std::string& v) { c.normal_consistency = to_double(key, v); }},
      {"min_support", [&](const std::string& v) { c.min_support = to_uint(key, v); }},
      {"max_iterations", [&](const std::string& v) { c.max_iterations = to_uint(key, v); }},
      {"cluster_radius_fraction", [&](const std::string& v) { c.cluster_radius_fraction = to_double(key, v); }},
      {"ransac_seed", [&](const std::string& v) { c.ransac_seed = to_uint(key, v); }},
      {"angle_tolerance_deg", [&](const std::string& v) { c.angle_tolerance_deg = to_double(key, v); }},
      {"refine_distance_fraction", [&](const std::string& v) { c.refine_distance_fraction = to_double(key, v); }},
      {"strategy",
       [&](const std::string& v) {
         if (v == "adaptive") c.strategy = PartitionMode::Adaptive;
         else if (v == "exhaustive") c.strategy = PartitionMode::Exhaustive;
         else throw std::invalid_argument("config: strategy must be adaptive or exhaustive");
       }},
      {"aabb_padding", [&](const std::string& v) { c.aabb_padding = to_double(key, v); }},
      {"segment_padding_fraction", [&](const std::string& v) { c.segment_padding_fraction = to_double(key, v); }},
      {"max_cells", [&](const std::string& v) { c.max_cells = to_uint(key, v); }},
      {"aabb_walls", [&](const std::string& v) { c.aabb_walls = to_bool(key, v); }},
      {"beta", [&](const std::string& v) { c.beta = to_double(key, v); }},
      {"lambda", [&](const std::string& v) { c.lambda = to_double(key, v); }},
      {"hausdorff_samples", [&](const std::string& v) { c.hausdorff_samples = to_uint(key, v); }},
      {"hausdorff_seed", [&](const std::string& v) { c.hausdorff_seed = to_uint(key, v); }},
      {"mesh_format", [&](const std::string& v) { c.mesh_format = v; }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second(value);
}

void apply_config_text(PipelineConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void load_config_file(PipelineConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

json to_json(const PipelineConfig& c) {
  return {{"cloud", c.cloud.string()},
          {"provider", c.provider},
          {"ground_truth", c.ground_truth.string()},
          {"inlier_fraction", c.inlier_fraction},
          {"normal_consistency", c.normal_consistency},
          {"min_support", c.min_support},
          {"max_iterations", c.max_iterations},
          {"cluster_radius_fraction", c.cluster_radius_fraction},
          {"ransac_seed", c.ransac_seed},
          {"angle_tolerance_deg", c.angle_tolerance_deg},
          {"refine_distance_fraction", c.refine_distance_fraction},
          {"strategy", c.strategy == PartitionMode::Adaptive ? "adaptive" : "exhaustive"},
          {"aabb_padding", c.aabb_padding},
          {"segment_padding_fraction", c.segment_padding_fraction},
          {"max_cells", c.max_cells},
          {"aabb_walls", c.aabb_walls},
          {"beta", c.beta},
          {"lambda", c.lambda},
          {"hausdorff_samples", c.hausdorff_samples},
          {"hausdorff_seed", c.hausdorff_seed},
          {"mesh_format", c.mesh_format}};
}

void validate(const PipelineConfig& c) {
  if (!(c.lambda >= 0.0)) throw std::invalid_argument("config: lambda must be >= 0");
  if (!(c.beta > 0.0)) throw std::invalid_argument("config: beta must be > 0");
  if (!(c.inlier_fraction > 0.0)) throw std::invalid_argument("config: inlier_fraction must be > 0");
  if (!(c.refine_distance_fraction >= 0.0)) throw std::invalid_argument("config: refine_distance_fraction must be >= 0");
  if (!(c.angle_tolerance_deg >= 0.0)) throw std::invalid_argument("config: angle_tolerance_deg must be >= 0");
  if (!(c.aabb_padding >= 0.0)) throw std::invalid_argument("config: aabb_padding must be >= 0");
  if (c.mesh_format != "obj" && c.mesh_format != "ply") throw std::invalid_argument("config: mesh_format is obj or ply");
}

std::unique_ptr<SdfProvider> make_provider(const std::string& spec, PolyMesh* oracle_mesh) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("provider must be oracle:<mesh> or sdf:<file>");
  const std::string kind = spec.substr(0, colon);
  const std::filesystem::path path = spec.substr(colon + 1);
  if (kind == "oracle") {
    PolyMesh mesh = read_mesh(path);
    if (oracle_mesh) *oracle_mesh = mesh;
    return std::make_unique<MeshSdfOracle>(std::move(mesh));
  }
  if (kind == "sdf") return std::make_unique<SampledSdfField>(SampledSdfField::read(path));
  throw std::invalid_argument("unknown provider kind '" + kind + "'");
}

json to_json(const ReconReport& r) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return {{"smh", opt(r.smh)},
          {"hausdorff_max", opt(r.hausdorff_max)},
          {"cloud_to_mesh", opt(r.cloud_to_mesh)},
          {"face_count", {{"raw", r.face_count_raw}, {"merged", r.face_count_merged}}},
          {"merge_flagged_groups", r.merge_flagged},
          {"cell_count", r.cell_count},
          {"segments", {{"detected", r.segments_detected}, {"refined", r.segments_refined}}},
          {"interior_cells", r.interior_cells},
          {"interior_volume", r.interior_volume},
          {"energy", {{"E", r.energy}, {"V", r.smoothness}}},
          {"watertight", to_json(r.watertight)}};
}

// ---------------------------------------------------------------- pipeline

namespace {

// Runs one stage, recording its runtime and tagging failures with its name.
class StageRunner {
 public:
  explicit StageRunner(ReconReport& report) : report_(report) {}

  template <class F>
  auto operator()(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record(name, t0);
      } else {
        auto r = f();
        record(name, t0);
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
    report_.runtimes[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  ReconReport& report_;
};

std::string mesh_bytes(const PolyMesh& mesh, const std::string& format) {
  std::ostringstream out;
  if (format == "ply") {
    write_ply(out, mesh, PlyFormat::BinaryLittleEndian);
  } else {
    write_obj(out, mesh);
  }
  return out.str();
}

json plan_json(const InsertionPlan& plan) {
  json entries = json::array();
  for (const auto& e : plan.entries) {
    entries.push_back({{"segment", e.segment}, {"verticality", e.verticality}, {"support", e.support},
                       {"vertical", e.vertical}});
  }
  return {{"entries", entries}, {"wall_faces", plan.wall_faces}};
}

PipelineResult run_stages(const PointCloud& cloud, const SdfProvider& provider, const PipelineConfig& config,
                          const PolyMesh* ground_truth, const std::filesystem::path* out_dir) {
  validate(config);
  PipelineResult res;
  ReconReport& rep = res.report;
  StageRunner stage(rep);
  auto save = [&](const std::string& name, const std::string& bytes) {
    if (out_dir) stage("write", [&] { write_file_atomic(*out_dir / name, bytes); });
  };
  const std::string ext = "." + config.mesh_format;

  if (cloud.empty()) throw StageError("load", "empty point cloud");
  const Aabb cloud_box = Aabb::of_points(cloud);
  const double R = cloud_box.extent().maxCoeff();
  if (!(R > 0.0)) throw StageError("load", "point cloud has zero extent");

  RansacParams rp;
  rp.inlier_distance = config.inlier_fraction * R;
  rp.normal_consistency = config.normal_consistency;
  rp.min_support = config.min_support;
  rp.max_iterations = config.max_iterations;
  rp.seed = config.ransac_seed;
  rp.cluster_radius = config.cluster_radius_fraction * R;
  const auto detected = stage("detect", [&] { return detect_planes(cloud, rp); });
  rep.segments_detected = detected.size();
  save("segments.json", segments_to_json(detected, cloud).dump(1));

  RefineParams fp;
  fp.angle_tolerance = config.angle_tolerance_deg * std::numbers::pi / 180.0;
  fp.distance_tolerance = config.refine_distance_fraction * R;
  const auto refined = stage("refine", [&] { return refine_planes(cloud, detected, fp); });
  rep.segments_refined = refined.size();
  save("segments_refined.json", segments_to_json(refined, cloud).dump(1));

  const InsertionPlan plan = stage("plan", [&] {
    InsertionPlan p = plan_insertion(refined);
    return config.aabb_walls ? augment_bounds_faces(std::move(p)) : p;
  });
  save("plan.json", plan_json(plan).dump(1));

  PartitionStrategy strategy;
  strategy.mode = config.strategy;
  strategy.aabb_padding = config.aabb_padding;
  strategy.segment_padding = config.segment_padding_fraction * R;
  strategy.max_cells = config.max_cells;
  const CellComplex complex = stage("partition", [&] {
    const Aabb bounds = complex_bounds(refined, cloud, strategy.aabb_padding);
    return build_complex(refined, cloud, plan, bounds, strategy);
  });
  rep.cell_count = complex.cells().size();
  save("complex.json", complex_to_json(complex).dump(1));

  const CellOccupancy occ = stage("occupancy", [&] { return cell_occupancy(complex, provider, config.beta); });
  const MrfProblem mrf = stage("mrf", [&] { return build_mrf(complex, occ.occupancy, config.lambda); });
  res.labeling = stage("mincut", [&] { return solve_mincut(mrf); });
  const EnergyTerms e = energy_terms(mrf, res.labeling);
  rep.energy = e.total;
  rep.smoothness = e.smooth;
  save("labeling.json", labeling_to_json(mrf, res.labeling, occ.occupancy).dump(1));

  res.shell = stage("extract", [&] { return extract_shell(complex, res.labeling); });
  for (std::size_t i = 0; i < res.labeling.size(); ++i) {
    if (res.labeling[i] == Label::In) {
      ++rep.interior_cells;
      rep.interior_volume += complex.cells()[i].volume();
    }
  }
  save("shell" + ext, mesh_bytes(res.shell.mesh, config.mesh_format));

  res.merged = stage("merge", [&] { return merge_coplanar(res.shell); });
  save("mesh" + ext, mesh_bytes(res.merged.mesh, config.mesh_format));
  rep.face_count_raw = res.shell.mesh.faces.size();
  rep.face_count_merged = res.merged.mesh.faces.size();
  rep.merge_flagged = res.merged.groups_flagged;

  stage("metrics", [&] {
    rep.watertight = watertight_check(res.shell.mesh);
    if (res.merged.mesh.faces.empty()) return;
    rep.cloud_to_mesh = hausdorff_points(cloud, res.merged.mesh).mean / cloud_box.diagonal();
    if (ground_truth) {
      const double diag = ground_truth->bounds().diagonal();
      const HausdorffResult h =
          hausdorff(res.merged.mesh, *ground_truth, config.hausdorff_samples, config.hausdorff_seed);
      rep.smh = h.smh / diag;
      rep.hausdorff_max = h.max / diag;
    }
  });
  return res;
}

}  // namespace

PipelineResult reconstruct(const PointCloud& cloud, const SdfProvider& provider, const PipelineConfig& config,
                           const PolyMesh* ground_truth) {
  return run_stages(cloud, provider, config, ground_truth, nullptr);
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  PointCloud cloud;
  std::unique_ptr<SdfProvider> provider;
  PolyMesh oracle_mesh;
  std::optional<PolyMesh> truth;
  try {
    validate(config);
    cloud = read_point_cloud(config.cloud);
    provider = make_provider(config.provider, &oracle_mesh);
    if (!config.ground_truth.empty()) {
      truth = read_mesh(config.ground_truth);
    } else if (config.provider.rfind("oracle:", 0) == 0) {
      truth = oracle_mesh;
    }
    std::filesystem::create_directories(config.output_dir);
  } catch (const std::exception& e) {
    throw StageError("load", std::string(e.what()) + " [cloud=" + config.cloud.string() +
                                 ", provider=" + config.provider + "]");
  }
  const double load_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json inputs = {{"config", to_json(config)}, {"cloud_points", cloud.size()}, {"cloud_checksum", checksum(cloud)}};
  PipelineResult res;
  try {
    res = run_stages(cloud, *provider, config, truth ? &*truth : nullptr, &config.output_dir);
  } catch (const StageError& e) {
    throw StageError(e.stage, std::string(e.what()) + " [inputs: " + inputs.dump() + "]");
  }
  res.report.runtimes["load"] = load_seconds;

  json report = to_json(res.report);
  report["inputs"] = inputs;
  write_file_atomic(config.output_dir / "report.json", report.dump(2) + "\n");
  json timings = json::object();
  for (const auto& [k, v] : res.report.runtimes) timings[k] = v;
  write_file_atomic(config.output_dir / "timings.json", timings.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- partitioning

std::vector<PartitionRow> compare_partitioning(const std::vector<PartitionInput>& inputs,
                                               const PartitionStrategy& strategy) {
  if (inputs.empty()) throw std::invalid_argument("compare_partitioning: no segment sets");
  std::vector<PartitionRow> rows;
  for (const auto& in : inputs) {
    const InsertionPlan plan = plan_insertion(in.segments);
    const Aabb bounds = complex_bounds(in.segments, in.cloud, strategy.aabb_padding);
    for (PartitionMode mode : {PartitionMode::Adaptive, PartitionMode::Exhaustive}) {
      PartitionStrategy s = strategy;
      s.mode = mode;
      const auto t0 = std::chrono::steady_clock::now();
      const CellComplex cx = build_complex(in.segments, in.cloud, plan, bounds, s);
      PartitionRow row;
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row.scene = in.name;
      row.mode = mode;
      row.primitives = plan.entries.size();
      row.cells = cx.cells().size();
      for (const auto& r : cx.log()) row.splits += static_cast<std::size_t>(r.splits);
      row.truncated = cx.truncated();
      rows.push_back(row);
    }
  }
  return rows;
}

std::string partition_csv(const std::vector<PartitionRow>& rows) {
  std::ostringstream out;
  out << "scene,strategy,primitives,cells,splits,seconds,truncated\n";
  for (const auto& r : rows) {
    out << r.scene << ',' << (r.mode == PartitionMode::Adaptive ? "adaptive" : "exhaustive") << ',' << r.primitives
        << ',' << r.cells << ',' << r.splits << ',' << r.seconds << ',' << (r.truncated ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace polyrecon
