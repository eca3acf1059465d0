#include "polyrecon/simscan.hpp"

#include "polyrecon/occupancy.hpp"
#include "polyrecon/shell.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace polyrecon {

Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// ---------------------------------------------------------------- shapes

PolyMesh prism_mesh(const std::vector<Eigen::Vector2d>& footprint, double z0, double z1) {
  const int n = static_cast<int>(footprint.size());
  if (n < 3) throw std::invalid_argument("prism_mesh: footprint needs 3 vertices");
  if (!(z1 > z0)) throw std::invalid_argument("prism_mesh: z1 must exceed z0");
  PolyMesh m;
  for (const auto& p : footprint) m.vertices.emplace_back(p.x(), p.y(), z0);
  for (const auto& p : footprint) m.vertices.emplace_back(p.x(), p.y(), z1);
  std::vector<int> bottom, top;
  for (int i = n - 1; i >= 0; --i) bottom.push_back(i);
  for (int i = 0; i < n; ++i) top.push_back(n + i);
  m.faces.push_back(bottom);
  m.faces.push_back(top);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    m.faces.push_back({i, j, n + j, n + i});
  }
  return m;
}

PolyMesh box_mesh(const Aabb& box) {
  return prism_mesh({{box.min.x(), box.min.y()},
                     {box.max.x(), box.min.y()},
                     {box.max.x(), box.max.y()},
                     {box.min.x(), box.max.y()}},
                    box.min.z(), box.max.z());
}

std::vector<Eigen::Vector2d> l_footprint(double w, double d, double arm) {
  return {{0, 0}, {w, 0}, {w, arm}, {arm, arm}, {arm, d}, {0, d}};
}

std::vector<Eigen::Vector2d> t_footprint(double w, double d, double stem) {
  const double a = 0.5 * (w - stem), b = 0.5 * (w + stem), s = d - stem;
  return {{a, 0}, {b, 0}, {b, s}, {w, s}, {w, d}, {0, d}, {0, s}, {a, s}};
}

std::vector<Eigen::Vector2d> u_footprint(double w, double d, double arm) {
  return {{0, 0}, {w, 0}, {w, d}, {w - arm, d}, {w - arm, arm}, {arm, arm}, {arm, d}, {0, d}};
}

PolyMesh gable_mesh(double w, double d, double eave, double ridge) {
  if (!(w > 0 && d > 0 && eave > 0 && ridge > eave)) throw std::invalid_argument("gable_mesh: bad dimensions");
  PolyMesh m;
  m.vertices = {{0, 0, 0},    {w, 0, 0},    {w, d, 0},         {0, d, 0},         {0, 0, eave},
                {w, 0, eave}, {w, d, eave}, {0, d, eave},      {0, d / 2, ridge}, {w, d / 2, ridge}};
  m.faces = {{3, 2, 1, 0},         // floor
             {0, 1, 5, 4},         // -y wall
             {2, 3, 7, 6},         // +y wall
             {1, 2, 6, 9, 5},      // +x gable end
             {3, 0, 4, 8, 7},      // -x gable end
             {4, 5, 9, 8},         // -y roof slope
             {6, 7, 8, 9}};        // +y roof slope
  return m;
}

PolyMesh uv_sphere(double radius, int slices, int stacks) {
  if (slices < 3 || stacks < 2) throw std::invalid_argument("uv_sphere: too coarse");
  PolyMesh m;
  m.vertices.emplace_back(0, 0, radius);
  for (int k = 1; k < stacks; ++k) {
    const double th = std::numbers::pi * k / stacks;
    for (int j = 0; j < slices; ++j) {
      const double ph = 2.0 * std::numbers::pi * j / slices;
      m.vertices.emplace_back(radius * std::sin(th) * std::cos(ph), radius * std::sin(th) * std::sin(ph),
                              radius * std::cos(th));
    }
  }
  m.vertices.emplace_back(0, 0, -radius);
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto at = [&](int k, int j) { return 1 + (k - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) m.faces.push_back({0, at(1, j), at(1, j + 1)});
  for (int k = 1; k + 1 < stacks; ++k) {
    for (int j = 0; j < slices; ++j) m.faces.push_back({at(k, j), at(k + 1, j), at(k + 1, j + 1), at(k, j + 1)});
  }
  for (int j = 0; j < slices; ++j) m.faces.push_back({at(stacks - 1, j), south, at(stacks - 1, j + 1)});
  return m;
}

PolyMesh voxel_union_mesh(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& zs,
                          const std::vector<char>& filled) {
  const int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1,
            nz = static_cast<int>(zs.size()) - 1;
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("voxel_union_mesh: empty grid");
  if (filled.size() != std::size_t(nx) * ny * nz) throw std::invalid_argument("voxel_union_mesh: size mismatch");
  auto full = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return false;
    return filled[(std::size_t(k) * ny + j) * nx + i] != 0;
  };
  const std::array<const std::vector<double>*, 3> lines = {&xs, &ys, &zs};
  Shell shell;
  auto vertex = [&](int i, int j, int k) {
    shell.mesh.vertices.emplace_back(xs[i], ys[j], zs[k]);
    return static_cast<int>(shell.mesh.vertices.size()) - 1;
  };
  // Faces reference a shared lattice of vertices so coplanar merging sees shared edges.
  std::vector<int> lattice(std::size_t(nx + 1) * (ny + 1) * (nz + 1), -1);
  auto lat = [&](int i, int j, int k) {
    int& v = lattice[(std::size_t(k) * (ny + 1) + j) * (nx + 1) + i];
    if (v < 0) v = vertex(i, j, k);
    return v;
  };
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, w = (axis + 2) % 3;
    std::array<int, 3> n = {nx, ny, nz};
    for (int a = 0; a <= n[axis]; ++a) {
      for (int b = 0; b < n[u]; ++b) {
        for (int c = 0; c < n[w]; ++c) {
          std::array<int, 3> lo{}, hi{};
          lo[axis] = a - 1;
          hi[axis] = a;
          lo[u] = hi[u] = b;
          lo[w] = hi[w] = c;
          const bool f0 = full(lo[0], lo[1], lo[2]), f1 = full(hi[0], hi[1], hi[2]);
          if (f0 == f1) continue;
          std::array<std::array<int, 3>, 4> q;
          for (int r = 0; r < 4; ++r) {
            q[r][axis] = a;
            q[r][u] = b + (r == 1 || r == 2);
            q[r][w] = c + (r >= 2);
          }
          // (u, w) ordering is counter-clockwise around +axis.
          std::vector<int> ring;
          for (int r : {0, 1, 2, 3}) ring.push_back(lat(q[r][0], q[r][1], q[r][2]));
          Vec3 normal = Vec3::Zero();
          normal[axis] = 1.0;
          if (!f0) {
            std::reverse(ring.begin(), ring.end());
            normal = -normal;
          }
          const double off = normal[axis] * (*lines[axis])[a];
          shell.mesh.faces.push_back(std::move(ring));
          shell.faces.push_back({0, -1, -1, 0, Plane(normal, off)});
        }
      }
    }
  }
  return merge_coplanar(shell).mesh;
}

PolyMesh random_building(std::uint64_t seed, int min_cols, int max_cols) {
  Rng rng = substream(seed, 0x6275696c64);
  std::uniform_int_distribution<int> cols(min_cols, max_cols);
  std::uniform_real_distribution<double> step(0.6, 1.4);
  const int nx = cols(rng), ny = cols(rng), nz = 4;
  std::vector<double> xs{0.0}, ys{0.0}, zs{0.0};
  for (int i = 0; i < nx; ++i) xs.push_back(xs.back() + step(rng));
  for (int j = 0; j < ny; ++j) ys.push_back(ys.back() + step(rng));
  for (int k = 0; k < nz; ++k) zs.push_back(zs.back() + 0.6 * step(rng));
  std::uniform_int_distribution<int> height(1, nz);
  std::vector<char> filled(std::size_t(nx) * ny * nz, 0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int h = height(rng);
      for (int k = 0; k < h; ++k) filled[(std::size_t(k) * ny + j) * nx + i] = 1;
    }
  }
  return voxel_union_mesh(xs, ys, zs, filled);
}

PolyMesh random_shape(std::uint64_t seed, int kind) {
  Rng rng = substream(seed, 0x7368617065);
  if (kind < 0) kind = std::uniform_int_distribution<int>(0, kShapeKinds - 1)(rng);
  std::uniform_real_distribution<double> size(0.6, 1.4);
  const double w = 2.0 * size(rng), d = 2.0 * size(rng), h = size(rng);
  const double arm = std::min(w, d) * std::uniform_real_distribution<double>(0.3, 0.45)(rng);
  switch (kind) {
    case 0:
      return box_mesh({Point3(0, 0, 0), Point3(w, d, h)});
    case 1:
      return prism_mesh(l_footprint(w, d, arm), 0.0, h);
    case 2:
      return prism_mesh(t_footprint(w, d, arm), 0.0, h);
    case 3:
      return prism_mesh(u_footprint(w, d, arm), 0.0, h);
    case 4:
      return gable_mesh(w, d, h, h + 0.5 * d * std::uniform_real_distribution<double>(0.4, 0.9)(rng));
    case 5:
      return random_building(seed, 2, 3);
    default:
      throw std::out_of_range("random_shape: unknown kind " + std::to_string(kind));
  }
}

PolyMesh random_block(std::uint64_t seed, int min_buildings, int max_buildings) {
  if (min_buildings < 1 || max_buildings < min_buildings) throw std::invalid_argument("random_block: bad building range");
  Rng rng = substream(seed, 0x626c6f636b);
  const int count = std::uniform_int_distribution<int>(min_buildings, max_buildings)(rng);
  std::uniform_real_distribution<double> yaw(0.0, 0.5 * std::numbers::pi), jitter(-0.2, 0.2);
  // Footprints stay under 2.8 on a side, so a 4.5 lot spacing keeps any rotation disjoint.
  const double lot = 4.5;
  const int per_row = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  PolyMesh out;
  for (int b = 0; b < count; ++b) {
    const PolyMesh m = random_shape(rng());
    const Point3 c = m.bounds().center();
    const double a = yaw(rng);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 t(lot * (b % per_row) + jitter(rng), lot * (b / per_row) + jitter(rng), 0.0);
    const int base = static_cast<int>(out.vertices.size());
    for (const auto& v : m.vertices) out.vertices.push_back(rot * (v - Vec3(c.x(), c.y(), 0.0)) + t);
    for (auto f : m.faces) {
      for (int& i : f) i += base;
      out.faces.push_back(std::move(f));
    }
  }
  return out;
}

// ---------------------------------------------------------------- normalization

NormalizedMesh normalize_mesh(const PolyMesh& mesh) {
  if (mesh.vertices.empty()) throw std::invalid_argument("normalize_mesh: empty mesh");
  const Aabb box = mesh.bounds();
  const double side = box.extent().maxCoeff();
  if (!(side > 0.0) || !std::isfinite(side)) throw std::invalid_argument("normalize_mesh: zero-extent mesh");
  const Point3 c = box.center();
  NormalizedMesh out{mesh, {1.0}};
  for (auto& v : out.mesh.vertices) v = (v - c) / side;
  return out;
}

// ---------------------------------------------------------------- scanner

void validate(const ScanConfig& c) {
  if (c.poses < 1) throw std::invalid_argument("scan: poses must be >= 1");
  if (c.rays_u < 1 || c.rays_v < 1) throw std::invalid_argument("scan: rays per pose must be >= 1");
  // The pose sphere must enclose the bounding sphere (radius half a diagonal).
  if (!(c.sphere_radius > 0.5)) throw std::invalid_argument("scan: sphere radius must exceed the bounding sphere");
  if (!(c.noise_sigma >= 0.0) || !std::isfinite(c.noise_sigma)) throw std::invalid_argument("scan: sigma must be >= 0");
  if (!(c.fov_margin >= 0.0)) throw std::invalid_argument("scan: fov margin must be >= 0");
}

std::vector<Point3> scan_poses(const Aabb& target, const ScanConfig& config) {
  validate(config);
  const double r = config.sphere_radius * target.diagonal();
  const Point3 c = target.center();
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  Rng rng = substream(config.seed, 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Point3> out;
  for (int i = 0; i < config.poses; ++i) {
    double z, phi;
    if (config.pose_mode == PoseMode::Fibonacci) {
      const double t = (i + 0.5) / config.poses;
      z = config.hemisphere_only ? 1.0 - t : 1.0 - 2.0 * t;
      phi = golden * i;
    } else {
      const double u = uni(rng);
      const double v = uni(rng);
      z = config.hemisphere_only ? u : 2.0 * u - 1.0;
      phi = 2.0 * std::numbers::pi * v;
    }
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.push_back(c + r * Vec3(s * std::cos(phi), s * std::sin(phi), z));
  }
  return out;
}

std::vector<Ray> pose_rays(const Point3& origin, const Aabb& target, const ScanConfig& config) {
  const Vec3 forward = (target.center() - origin).normalized();
  const Vec3 ref = std::abs(forward.z()) > 0.99 ? Vec3::UnitX() : Vec3::UnitZ();
  const Vec3 right = forward.cross(ref).normalized();
  const Vec3 up = right.cross(forward);
  const double dist = (target.center() - origin).norm();
  const double half = std::asin(std::min(1.0, 0.5 * target.diagonal() / dist)) * (1.0 + config.fov_margin);
  const double span = std::tan(std::min(half, 1.5));
  std::vector<Ray> rays;
  rays.reserve(std::size_t(config.rays_u) * config.rays_v);
  for (int j = 0; j < config.rays_v; ++j) {
    const double v = ((j + 0.5) / config.rays_v * 2.0 - 1.0) * span;
    for (int i = 0; i < config.rays_u; ++i) {
      const double u = ((i + 0.5) / config.rays_u * 2.0 - 1.0) * span;
      rays.push_back({origin, (forward + u * right + v * up).normalized()});
    }
  }
  return rays;
}

void cast_rays(const TriangleBvh& bvh, std::span<const Ray> rays, double sigma, Rng& rng, int pose,
               ScanResult& out) {
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& ray : rays) {
    ++out.rays_cast;
    const auto hit = bvh.first_hit(ray.origin, ray.direction);
    if (!hit) continue;
    const double e = sigma > 0.0 ? sigma * noise(rng) : 0.0;
    const Point3 p = ray.origin + ray.direction * (hit->t + e);
    out.points.push_back(p);
    out.samples.push_back({p, pose, ray.direction, hit->t, e});
  }
}

ScanResult scan(const PolyMesh& mesh, const ScanConfig& config) {
  validate(config);
  const TriangleBvh bvh(triangulate(mesh));
  const Aabb target = mesh.bounds();
  ScanResult out;
  out.poses = scan_poses(target, config);
  for (std::size_t k = 0; k < out.poses.size(); ++k) {
    Rng rng = substream(config.seed, k + 1);
    const auto rays = pose_rays(out.poses[k], target, config);
    cast_rays(bvh, rays, config.noise_sigma, rng, static_cast<int>(k), out);
  }
  if (out.points.empty()) throw std::runtime_error("scan: no ray hit the mesh");
  return out;
}

// ---------------------------------------------------------------- noise levels

double eval_noise(int level, const SceneScale& scale) {
  if (level < 0 || level >= static_cast<int>(kEvalNoiseLevels.size())) {
    throw std::out_of_range("eval_noise: unknown level " + std::to_string(level));
  }
  return kEvalNoiseLevels[level] * scale.R;
}

double train_noise(Rng& rng, const SceneScale& scale) {
  return std::uniform_real_distribution<double>(0.0, kTrainNoiseMax * scale.R)(rng);
}

// ---------------------------------------------------------------- queries

QuerySampleSet sample_queries(const PolyMesh& mesh, const SceneScale& scale, std::uint64_t seed,
                              const QueryConfig& config) {
  const MeshSdfOracle oracle(mesh);
  Rng rng = substream(seed, 0x71756572);
  QuerySampleSet q;
  const double disp = config.displacement * scale.R;
  std::uniform_real_distribution<double> shift(-disp, disp);
  for (const auto& s : sample_surface(mesh, config.near_surface, rng)) {
    q.points.push_back(s.point + shift(rng) * s.normal);
    q.kind.push_back(QueryKind::NearSurface);
  }
  const Aabb box = mesh.bounds();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < config.volume; ++i) {
    const double x = uni(rng), y = uni(rng), z = uni(rng);
    q.points.push_back(box.min + Vec3(x, y, z).cwiseProduct(box.extent()));
    q.kind.push_back(QueryKind::Volume);
  }
  q.sdf.reserve(q.points.size());
  for (const auto& p : q.points) q.sdf.push_back(oracle.sdf(p));
  std::vector<int> idx(q.points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(config.keep, idx.size()));
  std::sort(idx.begin(), idx.end());
  q.dropout = std::move(idx);
  return q;
}

void write_queries_csv(const std::filesystem::path& path, const QuerySampleSet& q, bool dropout_only) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,z,d,provenance\n";
  auto row = [&](std::size_t i) {
    const auto& p = q.points[i];
    out << p.x() << ',' << p.y() << ',' << p.z() << ',' << q.sdf[i] << ','
        << (q.kind[i] == QueryKind::NearSurface ? "near-surface" : "volume") << '\n';
  };
  if (dropout_only) {
    for (int i : q.dropout) row(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < q.points.size(); ++i) row(i);
  }
  write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------- ground-truth segments

FaceSegments face_segments(const PolyMesh& mesh, double per_area, std::size_t min_points, std::uint64_t seed) {
  Rng rng = substream(seed, 0x66616365);
  FaceSegments out;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    PolyMesh single;
    single.vertices = mesh.vertices;
    single.faces = {mesh.faces[f]};
    const Polygon poly = mesh.face_polygon(f);
    const double area = polygon_area(poly);
    if (!(area > 0.0)) continue;
    const auto n = std::max(min_points, static_cast<std::size_t>(std::ceil(per_area * area)));
    PlanarSegment seg;
    seg.plane = Plane::from_point_normal(polygon_centroid(poly), polygon_normal(poly)).canonical();
    for (const auto& s : sample_surface(single, n, rng)) {
      seg.inliers.push_back(static_cast<int>(out.cloud.size()));
      out.cloud.push_back(s.point);
    }
    out.segments.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------- manifests

nlohmann::json dataset_manifest(const std::vector<ManifestEntry>& entries) {
  nlohmann::json items = nlohmann::json::array();
  std::array<std::size_t, 3> counts{};
  for (const auto& e : entries) {
    if (e.split == "train") ++counts[0];
    else if (e.split == "val") ++counts[1];
    else if (e.split == "test") ++counts[2];
    else throw std::invalid_argument("dataset_manifest: unknown split '" + e.split + "'");
    items.push_back({{"mesh", e.mesh},
                     {"split", e.split},
                     {"seed", e.seed},
                     {"sigma", e.sigma},
                     {"pose_mode", e.hemisphere_only ? "hemisphere" : "sphere"},
                     {"points", e.points},
                     {"queries", e.queries},
                     {"cloud_checksum", e.cloud_checksum}});
  }
  return {{"split_convention", {{"train", kSplitSizes[0]}, {"val", kSplitSizes[1]}, {"test", kSplitSizes[2]}}},
          {"split_counts", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}},
          {"entries", items}};
}

nlohmann::json scan_manifest(const ScanConfig& config, const ScanResult& result, const std::string& mesh_path) {
  return {{"mesh", mesh_path},
          {"seed", config.seed},
          {"sigma", config.noise_sigma},
          {"pose_mode", config.hemisphere_only ? "hemisphere" : "sphere"},
          {"pose_distribution", config.pose_mode == PoseMode::Fibonacci ? "fibonacci" : "random"},
          {"poses", config.poses},
          {"rays_per_pose", config.rays_u * config.rays_v},
          {"sphere_radius", config.sphere_radius},
          {"rays_cast", result.rays_cast},
          {"points", result.points.size()},
          {"cloud_checksum", checksum(result.points)}};
}

}  // namespace polyrecon
