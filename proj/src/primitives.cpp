#include "polyrecon/primitives.hpp"

#include "polyrecon/spatial_grid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace polyrecon {

Plane fit_plane_pca(std::span<const Point3> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_plane_pca: need at least 3 points");
  Point3 c = Point3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - c;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d ev = es.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-300))) {
    throw std::invalid_argument("fit_plane_pca: degenerate (collinear or coincident) points");
  }
  return Plane::from_point_normal(c, es.eigenvectors().col(0)).canonical();
}

Plane fit_plane_pca(const PointCloud& cloud, std::span<const int> indices) {
  std::vector<Point3> pts;
  pts.reserve(indices.size());
  for (int i : indices) pts.push_back(cloud[i]);
  return fit_plane_pca(pts);
}

double plane_angle(const Plane& a, const Plane& b) {
  return std::acos(std::clamp(std::abs(a.normal.dot(b.normal)), 0.0, 1.0));
}

namespace {

double mean_distance(const PointCloud& cloud, const std::vector<int>& idx, const Plane& plane) {
  if (idx.empty()) return 0.0;
  double s = 0.0;
  for (int i : idx) s += std::abs(plane.signed_distance(cloud[i]));
  return s / static_cast<double>(idx.size());
}

}  // namespace

double segment_distance(const PointCloud& cloud, const PlanarSegment& a, const PlanarSegment& b) {
  return std::max(mean_distance(cloud, a.inliers, b.plane), mean_distance(cloud, b.inliers, a.plane));
}

double residual_rms(const PointCloud& cloud, const PlanarSegment& s) {
  if (s.inliers.empty()) return 0.0;
  double acc = 0.0;
  for (int i : s.inliers) {
    const double d = s.plane.signed_distance(cloud[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(s.inliers.size()));
}

namespace {

// PCA refit restricted to points within a robust band (3 scaled MADs) of
// the current plane; repeated a few times to shed points of adjacent
// structures caught in the inlier band.
Plane trimmed_refit(const PointCloud& cloud, const std::vector<int>& idx, Plane plane, double floor_band) {
  std::vector<double> r(idx.size());
  std::vector<Point3> kept;
  for (int round = 0; round < 4; ++round) {
    for (std::size_t k = 0; k < idx.size(); ++k) r[k] = std::abs(plane.signed_distance(cloud[idx[k]]));
    std::vector<double> sorted = r;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double band = std::max(3.0 * 1.4826 * *mid, floor_band);
    kept.clear();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (r[k] <= band) kept.push_back(cloud[idx[k]]);
    }
    if (kept.size() < 3) break;
    try {
      plane = fit_plane_pca(kept);
    } catch (const std::invalid_argument&) {
      break;
    }
  }
  return plane;
}

double median_spacing(const PointCloud& cloud, const std::vector<int>& pool, double guess, std::mt19937_64& rng) {
  if (pool.size() < 2) return guess;
  SpatialGrid grid(cloud, pool, guess);
  std::vector<double> nn;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int s = 0; s < 200; ++s) {
    const int i = pool[pick(rng)];
    double best = std::numeric_limits<double>::infinity();
    grid.for_each_within(cloud[i], guess, [&](int j) {
      if (j != i) best = std::min(best, (cloud[j] - cloud[i]).norm());
    });
    if (std::isfinite(best)) nn.push_back(best);
  }
  if (nn.empty()) return guess;
  const auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
  std::nth_element(nn.begin(), mid, nn.end());
  return *mid;
}

// Connected components of `members` under the neighbor radius.
std::vector<std::vector<int>> components(const PointCloud& cloud, const std::vector<int>& members, double radius) {
  SpatialGrid grid(cloud, members, radius);
  std::unordered_map<int, int> label;
  label.reserve(members.size());
  for (int i : members) label[i] = -1;
  std::vector<std::vector<int>> comps;
  std::vector<int> stack;
  for (int seed : members) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    label[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      comps[id].push_back(i);
      grid.for_each_within(cloud[i], radius, [&](int j) {
        int& l = label[j];
        if (l < 0) {
          l = id;
          stack.push_back(j);
        }
      });
    }
    std::sort(comps[id].begin(), comps[id].end());
  }
  return comps;
}

}  // namespace

std::vector<PlanarSegment> detect_planes(const PointCloud& cloud, const RansacParams& params) {
  if (!(params.inlier_distance > 0.0) || params.min_support == 0) {
    throw std::invalid_argument("detect_planes: inlier_distance and min_support must be positive");
  }
  std::vector<PlanarSegment> out;
  if (cloud.size() < 3 || cloud.size() < params.min_support) return out;

  std::mt19937_64 rng(params.seed);
  const Aabb box = Aabb::of_points(cloud);
  const double scale = std::max(box.extent().maxCoeff(), 1e-12);
  const double eps = params.inlier_distance;

  std::vector<int> all(cloud.size());
  std::iota(all.begin(), all.end(), 0);
  double radius = params.cluster_radius;
  if (!(radius > 0.0)) {
    radius = std::max(3.0 * eps, 4.0 * median_spacing(cloud, all, scale / 32.0, rng));
  }

  // Sampling grid: the second and third points of a minimal sample are drawn
  // from cells adjacent to the first point's cell.
  const double sample_cell = scale / 16.0;
  SpatialGrid grid(cloud, sample_cell);

  std::vector<char> alive(cloud.size(), 1);
  std::vector<int> remaining = all;
  int consecutive_failures = 0;
  constexpr std::size_t kScoreSubset = 4000;
  constexpr double kConfidence = 0.99;

  while (remaining.size() >= params.min_support && consecutive_failures < 3) {
    std::vector<int> subset = remaining;
    if (subset.size() > kScoreSubset) {
      std::shuffle(subset.begin(), subset.end(), rng);
      subset.resize(kScoreSubset);
    }
    std::uniform_int_distribution<std::size_t> pick_remaining(0, remaining.size() - 1);
    std::uniform_int_distribution<int> pick_offset(-1, 1);

    std::size_t best_score = 0;
    std::optional<Plane> best;
    std::size_t needed = params.max_iterations;
    for (std::size_t it = 0; it < params.max_iterations && it < needed; ++it) {
      const int a = remaining[pick_remaining(rng)];
      int nb[2] = {-1, -1};
      for (int& n : nb) {
        for (int attempt = 0; attempt < 8 && n < 0; ++attempt) {
          const int dx = pick_offset(rng);
          const int dy = pick_offset(rng);
          const int dz = pick_offset(rng);
          const auto* cell = grid.cell_near(cloud[a], dx, dy, dz);
          if (!cell) continue;
          std::uniform_int_distribution<std::size_t> pc(0, cell->size() - 1);
          const int c = (*cell)[pc(rng)];
          if (alive[c] && c != a && c != nb[0]) n = c;
        }
        if (n < 0) n = remaining[pick_remaining(rng)];
      }
      Plane cand;
      try {
        cand = Plane::from_points(cloud[a], cloud[nb[0]], cloud[nb[1]]);
      } catch (const std::invalid_argument&) {
        continue;
      }
      std::size_t score = 0;
      for (int i : subset) score += std::abs(cand.signed_distance(cloud[i])) <= eps;
      if (score > best_score) {
        best_score = score;
        best = cand;
        const double w = static_cast<double>(score) / static_cast<double>(subset.size());
        const double p_fail = 1.0 - w * w * w;
        if (p_fail <= 0.0) {
          needed = 0;
        } else if (p_fail < 1.0) {
          const double n_req = std::log(1.0 - kConfidence) / std::log(p_fail);
          needed = std::max<std::size_t>(50, static_cast<std::size_t>(std::ceil(n_req)));
        }
      }
    }
    if (!best) {
      ++consecutive_failures;
      continue;
    }

    std::vector<int> consensus;
    for (int i : remaining) {
      if (std::abs(best->signed_distance(cloud[i])) <= eps) consensus.push_back(i);
    }
    if (consensus.size() < params.min_support) break;

    Plane refit = trimmed_refit(cloud, consensus, *best, 1e-9 * scale);
    if (std::abs(refit.normal.dot(best->normal)) < params.normal_consistency) {
      ++consecutive_failures;
      continue;
    }
    std::vector<int> members;
    for (int i : remaining) {
      if (std::abs(refit.signed_distance(cloud[i])) <= eps) members.push_back(i);
    }
    if (members.size() < consensus.size()) members = consensus;
    for (int i : members) alive[i] = 0;
    std::erase_if(remaining, [&](int i) { return !alive[i]; });

    bool produced = false;
    for (auto& comp : components(cloud, members, radius)) {
      if (comp.size() < params.min_support) continue;
      Plane p = trimmed_refit(cloud, comp, refit, 1e-9 * scale);
      // Keep only component points inside the band of the component's own plane.
      std::vector<int> kept;
      for (int i : comp) {
        if (std::abs(p.signed_distance(cloud[i])) <= eps) kept.push_back(i);
      }
      if (kept.size() < params.min_support) continue;
      out.push_back({p, std::move(kept)});
      produced = true;
    }
    consecutive_failures = produced ? 0 : consecutive_failures + 1;
  }
  return out;
}

std::vector<PlanarSegment> refine_planes(const PointCloud& cloud, std::vector<PlanarSegment> segments,
                                         const RefineParams& params) {
  if (segments.size() < 2) return segments;
  std::vector<PlanarSegment> slots = std::move(segments);
  std::vector<char> alive(slots.size(), 1);

  using Entry = std::tuple<double, int, int>;  // angle, i, j
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (std::size_t j = i + 1; j < slots.size(); ++j) {
      queue.emplace(plane_angle(slots[i].plane, slots[j].plane), static_cast<int>(i), static_cast<int>(j));
    }
  }
  while (!queue.empty()) {
    const auto [angle, i, j] = queue.top();
    queue.pop();
    if (!alive[i] || !alive[j]) continue;  // stale entry of a merged segment
    if (angle >= params.angle_tolerance) break;
    if (segment_distance(cloud, slots[i], slots[j]) >= params.distance_tolerance) continue;

    PlanarSegment merged;
    merged.inliers = slots[i].inliers;
    merged.inliers.insert(merged.inliers.end(), slots[j].inliers.begin(), slots[j].inliers.end());
    std::sort(merged.inliers.begin(), merged.inliers.end());
    merged.plane = fit_plane_pca(cloud, merged.inliers);
    alive[i] = alive[j] = 0;
    const int m = static_cast<int>(slots.size());
    slots.push_back(std::move(merged));
    alive.push_back(1);
    for (int n = 0; n < m; ++n) {
      if (alive[n]) queue.emplace(plane_angle(slots[m].plane, slots[n].plane), n, m);
    }
  }
  std::vector<PlanarSegment> out;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (alive[k]) out.push_back(std::move(slots[k]));
  }
  return out;
}

nlohmann::json segments_to_json(const std::vector<PlanarSegment>& segments, const PointCloud& cloud) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : segments) {
    arr.push_back({{"normal", {s.plane.normal.x(), s.plane.normal.y(), s.plane.normal.z()}},
                   {"offset", s.plane.offset},
                   {"inliers", s.inliers}});
  }
  return {{"point_cloud_checksum", checksum(cloud)}, {"point_count", cloud.size()}, {"segments", arr}};
}

std::vector<PlanarSegment> segments_from_json(const nlohmann::json& j, const PointCloud& cloud) {
  if (j.at("point_cloud_checksum").get<std::string>() != checksum(cloud)) {
    throw IoError("segment file does not match the point cloud (checksum mismatch)");
  }
  std::vector<PlanarSegment> out;
  for (const auto& s : j.at("segments")) {
    const auto n = s.at("normal").get<std::vector<double>>();
    if (n.size() != 3) throw IoError("segment normal must have 3 components");
    PlanarSegment seg;
    seg.plane = Plane(Vec3(n[0], n[1], n[2]), s.at("offset").get<double>());
    seg.inliers = s.at("inliers").get<std::vector<int>>();
    for (int i : seg.inliers) {
      if (i < 0 || static_cast<std::size_t>(i) >= cloud.size()) throw IoError("segment inlier index out of range");
    }
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace polyrecon
