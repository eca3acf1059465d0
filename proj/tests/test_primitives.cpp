#include "oracles.hpp"

#include "polyrecon/primitives.hpp"
#include "polyrecon/simscan.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <set>

using namespace polyrecon;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Square patch of `n` points on the plane through `center` with `normal`.
PlanarSegment add_patch(PointCloud& cloud, const Point3& center, const Vec3& normal, double half, int n,
                        std::mt19937_64& rng, double jitter = 0.0) {
  const Vec3 nz = normal.normalized();
  const Vec3 u = nz.unitOrthogonal();
  const Vec3 v = nz.cross(u);
  std::uniform_real_distribution<double> s(-half, half);
  std::normal_distribution<double> g(0.0, 1.0);
  PlanarSegment seg;
  for (int k = 0; k < n; ++k) {
    seg.inliers.push_back(static_cast<int>(cloud.size()));
    cloud.push_back(center + s(rng) * u + s(rng) * v + jitter * g(rng) * nz);
  }
  seg.plane = fit_plane_pca(cloud, seg.inliers);
  return seg;
}

/// Normal rotated by `angle` about an axis orthogonal to it.
Vec3 tilt(const Vec3& n, double angle, const Vec3& axis_hint) {
  const Vec3 axis = n.cross(axis_hint).normalized();
  return Eigen::AngleAxisd(angle, axis) * n;
}

/// Independent total-least-squares fit via a self-adjoint eigensolve.
Plane tls_fit(const PointCloud& cloud, const std::vector<int>& idx) {
  Point3 c = Point3::Zero();
  for (int i : idx) c += cloud[i];
  c /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : idx) cov += (cloud[i] - c) * (cloud[i] - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  return Plane::from_point_normal(c, es.eigenvectors().col(0));
}

double angle_between(const Plane& a, const Plane& b) {
  return std::acos(std::min(1.0, std::abs(a.normal.dot(b.normal))));
}

double mean_dist(const PointCloud& cloud, const std::vector<int>& idx, const Plane& p) {
  double s = 0.0;
  for (int i : idx) s += std::abs(p.signed_distance(cloud[i]));
  return s / static_cast<double>(idx.size());
}

/// Agglomerative merging: while any pair meets the predicate, merge it and refit.
std::vector<std::vector<int>> agglomerate(const PointCloud& cloud, std::vector<std::vector<int>> groups,
                                          double theta, double eps) {
  std::vector<Plane> planes;
  for (const auto& g : groups) planes.push_back(tls_fit(cloud, g));
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < groups.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < groups.size() && !merged; ++j) {
        const double d = std::max(mean_dist(cloud, groups[i], planes[j]), mean_dist(cloud, groups[j], planes[i]));
        if (angle_between(planes[i], planes[j]) < theta && d < eps) {
          groups[i].insert(groups[i].end(), groups[j].begin(), groups[j].end());
          planes[i] = tls_fit(cloud, groups[i]);
          groups.erase(groups.begin() + static_cast<long>(j));
          planes.erase(planes.begin() + static_cast<long>(j));
          merged = true;
        }
      }
    }
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

std::vector<std::vector<int>> partition_of(std::vector<PlanarSegment> segs) {
  std::vector<std::vector<int>> out;
  for (auto& s : segs) {
    std::sort(s.inliers.begin(), s.inliers.end());
    out.push_back(s.inliers);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::multiset<int> all_inliers(const std::vector<PlanarSegment>& segs) {
  std::multiset<int> m;
  for (const auto& s : segs) m.insert(s.inliers.begin(), s.inliers.end());
  return m;
}

}  // namespace

TEST_CASE("PCA fit examples") {
  const std::vector<Point3> square = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(1, 1, 0), Point3(0, 1, 0)};
  const Plane p = fit_plane_pca(square);
  CHECK(std::abs(p.normal.z()) == doctest::Approx(1.0));
  CHECK(std::abs(p.offset) < 1e-12);

  std::mt19937_64 rng(1);
  for (double delta : {1e-4, 1e-3, 1e-2}) {
    std::uniform_real_distribution<double> u(0.0, 1.0), j(-delta, delta);
    std::vector<Point3> pts;
    for (int k = 0; k < 400; ++k) pts.emplace_back(u(rng), u(rng), j(rng));
    const Plane q = fit_plane_pca(pts);
    CHECK(std::acos(std::abs(q.normal.z())) < 10.0 * delta);
  }
}

TEST_CASE("PCA fit beats random candidate planes") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point3> pts(20);
    for (auto& x : pts) x = Point3(g(rng), g(rng), 0.3 * g(rng));
    const Plane fit = fit_plane_pca(pts);
    auto ssd = [&](const Plane& pl) {
      double s = 0.0;
      for (const auto& x : pts) s += pl.signed_distance(x) * pl.signed_distance(x);
      return s;
    };
    const double best = ssd(fit);
    Point3 c = Point3::Zero();
    for (const auto& x : pts) c += x;
    c /= 20.0;
    for (int k = 0; k < 1000; ++k) {
      // Candidates pass through the centroid (optimal offset for any normal)
      // or through a random sample point.
      const Vec3 n = oracle::random_unit(rng);
      CHECK(best <= ssd(Plane::from_point_normal(c, n)) + 1e-12);
      CHECK(best <= ssd(Plane::from_point_normal(pts[k % 20], n)) + 1e-12);
    }
  }
}

TEST_CASE("PCA fit rejects degenerate input") {
  CHECK_THROWS_AS(fit_plane_pca(std::vector<Point3>{Point3(0, 0, 0), Point3(1, 0, 0)}), std::invalid_argument);
  std::vector<Point3> line;
  for (int k = 0; k < 10; ++k) line.emplace_back(k, 2 * k, -k);
  CHECK_THROWS_AS(fit_plane_pca(line), std::invalid_argument);
}

TEST_CASE("RANSAC finds the six faces of a cube") {
  const PolyMesh cube = box_mesh(Aabb{Point3(0, 0, 0), Point3(1, 1, 1)});
  std::mt19937_64 rng(4);
  PointCloud cloud;
  for (const auto& s : sample_surface(cube, 10000, rng)) cloud.push_back(s.point);
  RansacParams params;
  const auto segs = detect_planes(cloud, params);
  REQUIRE(segs.size() == 6);
  std::set<int> matched;
  for (const auto& s : segs) {
    for (std::size_t f = 0; f < cube.faces.size(); ++f) {
      const auto poly = cube.face_polygon(f);
      const Plane truth = Plane::from_points(poly[0], poly[1], poly[2]);
      if (plane_angle(s.plane, truth) < 1e-6 &&
          std::abs(s.plane.canonical().offset - truth.canonical().offset) < 1e-6) {
        matched.insert(static_cast<int>(f));
      }
    }
    CHECK(residual_rms(cloud, s) <= params.inlier_distance);
    for (int i : s.inliers) CHECK(std::abs(s.plane.signed_distance(cloud[i])) <= params.inlier_distance);
  }
  CHECK(matched.size() == 6);
}

TEST_CASE("RANSAC on a noisy box: disjoint, supported, reproducible") {
  const PolyMesh box = box_mesh(Aabb{Point3(0, 0, 0), Point3(1, 0.6, 0.4)});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.001);
  PointCloud cloud;
  for (const auto& s : sample_surface(box, 8000, rng)) cloud.push_back(s.point + g(rng) * s.normal);
  RansacParams params;
  params.seed = 17;
  const auto a = detect_planes(cloud, params);
  const auto b = detect_planes(cloud, params);
  CHECK(a.size() == 6);
  REQUIRE(a.size() == b.size());
  std::vector<char> used(cloud.size(), 0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].inliers == b[k].inliers);
    CHECK(a[k].plane.normal == b[k].plane.normal);
    CHECK(a[k].plane.offset == b[k].plane.offset);
    CHECK(a[k].support() >= params.min_support);
    CHECK(residual_rms(cloud, a[k]) <= params.inlier_distance);
    for (int i : a[k].inliers) {
      CHECK(used[i] == 0);
      used[i] = 1;
    }
  }
}

TEST_CASE("RANSAC splits opposite walls on one infinite plane") {
  // Two coplanar patches far apart become separate segments.
  std::mt19937_64 rng(5);
  PointCloud cloud;
  add_patch(cloud, Point3(0, 0, 0), Vec3(0, 0, 1), 0.2, 800, rng);
  add_patch(cloud, Point3(1.5, 0, 0), Vec3(0, 0, 1), 0.2, 800, rng);
  const auto segs = detect_planes(cloud, RansacParams{});
  CHECK(segs.size() == 2);
}

TEST_CASE("RANSAC on one plane") {
  std::mt19937_64 rng(6);
  PointCloud cloud;
  add_patch(cloud, Point3(0.1, 0.2, 0.3), Vec3(0.3, -0.2, 0.9), 0.5, 3000, rng);
  const auto segs = detect_planes(cloud, RansacParams{});
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].support() >= 0.99 * cloud.size());
}

TEST_CASE("RANSAC returns nothing for a ball without a large planar subset") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud cloud;
  while (cloud.size() < 120) {
    const Point3 p(u(rng), u(rng), u(rng));
    if (p.norm() <= 1.0) cloud.push_back(p);
  }
  RansacParams params;
  params.min_support = 36;  // 30% of the points
  params.inlier_distance = 0.005;
  // Exhaustive oracle: no plane through any triple has 36 points within the band.
  std::size_t best = 0;
  const int n = static_cast<int>(cloud.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        const Vec3 nn = (cloud[j] - cloud[i]).cross(cloud[k] - cloud[i]);
        if (nn.norm() < 1e-12) continue;
        const Plane pl = Plane::from_point_normal(cloud[i], nn);
        std::size_t c = 0;
        for (const auto& p : cloud) c += std::abs(pl.signed_distance(p)) <= params.inlier_distance;
        best = std::max(best, c);
      }
    }
  }
  REQUIRE(best < params.min_support);
  CHECK(detect_planes(cloud, params).empty());
}

TEST_CASE("refine merges identical planes and keeps perpendicular ones") {
  std::mt19937_64 rng(10);
  RefineParams params{1.0 * kDeg, 0.01};
  {
    PointCloud cloud;
    std::vector<PlanarSegment> segs = {add_patch(cloud, Point3(0, 0, 0), Vec3(0, 0, 1), 0.3, 200, rng),
                                       add_patch(cloud, Point3(0.4, 0, 0), Vec3(0, 0, 1), 0.3, 200, rng)};
    const auto out = refine_planes(cloud, segs, params);
    REQUIRE(out.size() == 1);
    CHECK(out[0].support() == 400);
  }
  {
    PointCloud cloud;
    std::vector<PlanarSegment> segs = {add_patch(cloud, Point3(0, 0, 0), Vec3(0, 0, 1), 0.3, 200, rng),
                                       add_patch(cloud, Point3(0, 0, 0), Vec3(1, 0, 0), 0.3, 200, rng)};
    CHECK(refine_planes(cloud, segs, params).size() == 2);
  }
  CHECK(refine_planes(PointCloud{}, {}, params).empty());
}

TEST_CASE("refine merges three near-coplanar segments") {
  std::mt19937_64 rng(12);
  PointCloud cloud;
  const Vec3 n0(0, 0, 1);
  // Mutual angles 0.2, 0.3 and 0.5 degrees: b tilts +0.2 and c tilts -0.3 about one axis.
  std::vector<PlanarSegment> segs = {
      add_patch(cloud, Point3(0, 0, 0), n0, 0.2, 300, rng),
      add_patch(cloud, Point3(0.5, 0, 0), tilt(n0, 0.2 * kDeg, Vec3(1, 0, 0)), 0.2, 300, rng),
      add_patch(cloud, Point3(-0.5, 0, 0), tilt(n0, -0.3 * kDeg, Vec3(1, 0, 0)), 0.2, 300, rng)};
  CHECK(plane_angle(segs[0].plane, segs[1].plane) / kDeg == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(plane_angle(segs[1].plane, segs[2].plane) / kDeg == doctest::Approx(0.5).epsilon(1e-6));
  const RefineParams params{1.0 * kDeg, 10.0};
  const auto out = refine_planes(cloud, segs, params);
  std::vector<std::vector<int>> groups;
  for (const auto& s : segs) groups.push_back(s.inliers);
  const auto expect = agglomerate(cloud, groups, params.angle_tolerance, params.distance_tolerance);
  CHECK(expect.size() == 1);
  CHECK(partition_of(out) == expect);
}

TEST_CASE("refine agrees with the agglomerative oracle on clustered instances") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0), small(-0.4, 0.4);
  const RefineParams params{5.0 * kDeg, 0.02};
  for (int trial = 0; trial < 40; ++trial) {
    PointCloud cloud;
    std::vector<PlanarSegment> segs;
    // Well-separated orientation families so the grouping is order independent.
    const std::vector<Vec3> families = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 0).normalized()};
    for (const auto& f : families) {
      const int members = 1 + static_cast<int>(rng() % 3);
      const double offset = u(rng);
      for (int m = 0; m < members; ++m) {
        const Vec3 n = tilt(f, small(rng) * kDeg, oracle::random_unit(rng));
        segs.push_back(add_patch(cloud, offset * f + 0.3 * m * f.unitOrthogonal(), n, 0.1, 60, rng, 1e-4));
      }
    }
    std::shuffle(segs.begin(), segs.end(), rng);
    std::vector<std::vector<int>> groups;
    for (const auto& s : segs) groups.push_back(s.inliers);
    const auto out = refine_planes(cloud, segs, params);
    CHECK(out.size() == families.size());
    CHECK(partition_of(out) == agglomerate(cloud, groups, params.angle_tolerance, params.distance_tolerance));
  }
}

TEST_CASE("refine invariants on random segment sets") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-0.5, 0.5), ang(0.0, 8.0);
  for (int trial = 0; trial < 60; ++trial) {
    PointCloud cloud;
    std::vector<PlanarSegment> segs;
    const int n = 2 + static_cast<int>(rng() % 9);
    const Vec3 base = oracle::random_unit(rng);
    for (int k = 0; k < n; ++k) {
      const Vec3 nk = tilt(base, ang(rng) * kDeg, oracle::random_unit(rng));
      segs.push_back(add_patch(cloud, Point3(u(rng), u(rng), u(rng)) * 0.05, nk, 0.2, 40, rng, 1e-3));
    }
    const RefineParams params{(1.0 + ang(rng)) * kDeg, 0.002 + 0.01 * (u(rng) + 0.5)};
    const auto out = refine_planes(cloud, segs, params);
    CHECK(out.size() <= segs.size());
    CHECK(all_inliers(out) == all_inliers(segs));
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        const bool apart = plane_angle(out[i].plane, out[j].plane) >= params.angle_tolerance ||
                           segment_distance(cloud, out[i], out[j]) >= params.distance_tolerance;
        CHECK(apart);
      }
    }
  }
}

TEST_CASE("segment distance and angle") {
  std::mt19937_64 rng(15);
  PointCloud cloud;
  const auto a = add_patch(cloud, Point3(0, 0, 0), Vec3(0, 0, 1), 0.5, 100, rng);
  const auto b = add_patch(cloud, Point3(0, 0, 0.03), Vec3(0, 0, -1), 0.5, 100, rng);
  CHECK(plane_angle(a.plane, b.plane) < 1e-9);
  CHECK(segment_distance(cloud, a, b) == doctest::Approx(0.03).epsilon(1e-9));
  const Plane p(Vec3(1, 0, 0), 0.0), q(Vec3(1, 1, 0), 0.0);
  CHECK(plane_angle(p, q) == doctest::Approx(std::numbers::pi / 4));
  CHECK(plane_angle(p, q.flipped()) == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("segment file round trip and checksum guard") {
  std::mt19937_64 rng(16);
  PointCloud cloud;
  std::vector<PlanarSegment> segs = {add_patch(cloud, Point3(0, 0, 0), Vec3(0, 0, 1), 0.3, 50, rng),
                                     add_patch(cloud, Point3(0, 0, 0), Vec3(0, 1, 0), 0.3, 50, rng)};
  const auto j = segments_to_json(segs, cloud);
  CHECK(j.at("segments").size() == 2);
  CHECK(j.at("segments")[0].contains("normal"));
  const auto back = segments_from_json(nlohmann::json::parse(j.dump()), cloud);
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].inliers == segs[k].inliers);
    CHECK((back[k].plane.normal - segs[k].plane.normal).norm() < 1e-15);
    CHECK(back[k].plane.offset == segs[k].plane.offset);
  }
  PointCloud other = cloud;
  other[0].x() += 1e-9;
  CHECK_THROWS_AS(segments_from_json(j, other), IoError);
}
