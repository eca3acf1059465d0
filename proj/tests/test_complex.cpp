#include "oracles.hpp"

#include "polyrecon/complex.hpp"
#include "polyrecon/simscan.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <set>

using namespace polyrecon;

namespace {

const Aabb kUnit{Point3(0, 0, 0), Point3(1, 1, 1)};

PlanarSegment segment_with(const Vec3& n, std::size_t support) {
  PlanarSegment s;
  s.plane = Plane(n, 0.0);
  s.inliers.resize(support);
  return s;
}

Primitive whole(const Plane& p, const Aabb& box, int id = 0) { return {p, box, id}; }

std::map<std::pair<int, int>, double> incremental_adjacency(const CellComplex& cx) {
  std::map<std::pair<int, int>, double> out;
  for (const auto& r : cx.adjacency()) out[{std::min(r.a, r.b), std::max(r.a, r.b)}] += r.area;
  return out;
}

void check_tiling(const CellComplex& cx) {
  const double bv = cx.bounds().volume();
  CHECK(std::abs(cx.total_volume() - bv) <= 1e-7 * bv);
}

/// Every non-wall facet area of each cell is accounted for by its adjacency records.
void check_facets_covered(const CellComplex& cx) {
  std::vector<double> facet(cx.cells().size(), 0.0), records(cx.cells().size(), 0.0);
  for (std::size_t c = 0; c < cx.cells().size(); ++c) {
    const auto& cell = cx.cells()[c];
    for (std::size_t f = 0; f < cell.faces().size(); ++f) {
      if (!is_wall_source(cell.faces()[f].source)) facet[c] += polygon_area(cell.face_polygon(f));
    }
  }
  for (const auto& r : cx.adjacency()) {
    CHECK(r.area > 0.0);
    CHECK(r.a != r.b);
    records[r.a] += r.area;
    records[r.b] += r.area;
  }
  for (std::size_t c = 0; c < facet.size(); ++c) CHECK(records[c] == doctest::Approx(facet[c]).epsilon(1e-9));
}

}  // namespace

TEST_CASE("verticality and plan ordering") {
  CHECK(verticality(Plane(Vec3(0, 0, 1), 0)) == 0.0);
  CHECK(verticality(Plane(Vec3(1, 0, 0), 0)) == 1.0);
  const double v = verticality(Plane(Vec3(0, std::sqrt(0.5), std::sqrt(0.5)), 0));
  CHECK(v == doctest::Approx(1.0 - std::sqrt(0.5)));

  std::vector<PlanarSegment> segs = {segment_with(Vec3(0, 0, 1), 100), segment_with(Vec3(1, 0, 0), 100)};
  auto plan = plan_insertion(segs);
  CHECK(plan.entries[0].segment == 1);
  CHECK(plan.entries[0].vertical);
  CHECK_FALSE(plan.entries[1].vertical);

  segs = {segment_with(Vec3(0, 1, 1), 200), segment_with(Vec3(0, 0, 1), 500)};
  plan = plan_insertion(segs);
  CHECK(plan.entries[0].segment == 1);
  CHECK_FALSE(plan.entries[1].vertical);
  CHECK(plan.entries[1].verticality == doctest::Approx(1.0 - std::sqrt(0.5)));
}

TEST_CASE("plan ordering is a deterministic total order") {
  std::mt19937_64 rng(1);
  std::vector<PlanarSegment> segs;
  for (int k = 0; k < 60; ++k) {
    Vec3 n = oracle::random_unit(rng);
    if (k % 3 == 0) n.z() = 0.01 * n.z();
    segs.push_back(segment_with(n, 50 + rng() % 5));
  }
  const auto plan = plan_insertion(segs);
  CHECK(plan.entries.size() == segs.size());
  CHECK_FALSE(plan.wall_faces);
  for (std::size_t k = 1; k < plan.entries.size(); ++k) {
    const auto& a = plan.entries[k - 1];
    const auto& b = plan.entries[k];
    CHECK(a.vertical == (a.verticality > 0.9));
    if (a.vertical != b.vertical) {
      CHECK(a.vertical);
    } else if (a.support == b.support) {
      CHECK(a.segment < b.segment);
    } else {
      CHECK(a.support > b.support);
    }
  }
  const auto again = plan_insertion(segs);
  for (std::size_t k = 0; k < plan.entries.size(); ++k) CHECK(again.entries[k].segment == plan.entries[k].segment);
}

TEST_CASE("one plane splits one cell") {
  CellComplex cx(kUnit);
  CHECK(cx.cells().size() == 1);
  CHECK(cx.insert(whole(Plane(Vec3(1, 1, 1), 1.2), kUnit), PartitionMode::Exhaustive) == 1);
  CHECK(cx.cells().size() == 2);
  REQUIRE(cx.adjacency().size() == 1);
  check_tiling(cx);
  check_facets_covered(cx);
}

TEST_CASE("a plane missing the box changes nothing") {
  CellComplex cx(kUnit);
  CHECK(cx.insert(whole(Plane(Vec3(0, 0, 1), 2.0), kUnit), PartitionMode::Exhaustive) == 0);
  CHECK(cx.insert(whole(Plane(Vec3(0, 0, 1), 1.0), kUnit), PartitionMode::Exhaustive) == 0);
  CHECK(cx.cells().size() == 1);
  CHECK(cx.adjacency().empty());
}

TEST_CASE("z then x through the center gives four cells and four records") {
  CellComplex cx(kUnit);
  cx.insert(whole(Plane(Vec3(0, 0, 1), 0.5), kUnit), PartitionMode::Exhaustive);
  cx.insert(whole(Plane(Vec3(1, 0, 0), 0.5), kUnit), PartitionMode::Exhaustive);
  CHECK(cx.cells().size() == 4);
  REQUIRE(cx.adjacency().size() == 4);
  int zrec = 0, xrec = 0;
  for (const auto& r : cx.adjacency()) {
    CHECK(r.area == doctest::Approx(0.5));
    (r.source == 0 ? zrec : xrec) += 1;
  }
  CHECK(zrec == 2);
  CHECK(xrec == 2);
  CHECK(incremental_adjacency(cx) == oracle::adjacency_from_scratch(cx, 1e-12));
}

TEST_CASE("splitting a cell hands its neighbor to both children") {
  // A | C, then C is split by a plane confined to C's half: A meets D and E.
  const Aabb box{Point3(0, 0, 0), Point3(2, 1, 1)};
  CellComplex cx(box);
  cx.insert(whole(Plane(Vec3(1, 0, 0), 1.0), box), PartitionMode::Adaptive);
  int a = -1;
  for (int c = 0; c < 2; ++c) {
    if (cx.cells()[c].centroid().x() < 1.0) a = c;
  }
  const Aabb right{Point3(1.2, 0, 0), Point3(2, 1, 1)};
  CHECK(cx.insert({Plane(Vec3(0, 0, 1), 0.5), right, 1}, PartitionMode::Adaptive) == 1);
  REQUIRE(cx.cells().size() == 3);
  REQUIRE(cx.adjacency().size() == 3);
  int with_a = 0;
  for (const auto& r : cx.adjacency()) {
    if (r.a == a || r.b == a) {
      ++with_a;
      CHECK(r.area == doctest::Approx(0.5));
    } else {
      CHECK(r.area == doctest::Approx(1.0));
      CHECK(r.source == 1);
    }
  }
  CHECK(with_a == 2);
  check_facets_covered(cx);
}

TEST_CASE("adaptive insertion skips cells outside the primitive box") {
  const Aabb box{Point3(0, 0, 0), Point3(2, 1, 1)};
  CellComplex adaptive(box), exhaustive(box);
  for (auto* cx : {&adaptive, &exhaustive}) {
    const auto mode = cx == &adaptive ? PartitionMode::Adaptive : PartitionMode::Exhaustive;
    cx->insert(whole(Plane(Vec3(1, 0, 0), 1.0), box), mode);
    cx->insert({Plane(Vec3(0, 0, 1), 0.5), Aabb{Point3(1.5, 0, 0), Point3(2, 1, 1)}, 1}, mode);
  }
  CHECK(adaptive.cells().size() == 3);
  CHECK(exhaustive.cells().size() == 4);
}

TEST_CASE("zero segments give one cell, octants give eight") {
  const PointCloud cloud = {Point3(0, 0, 0), Point3(1, 1, 1)};
  for (auto mode : {PartitionMode::Adaptive, PartitionMode::Exhaustive}) {
    PartitionStrategy st;
    st.mode = mode;
    const std::vector<PlanarSegment> none;
    const CellComplex empty = build_complex(none, cloud, plan_insertion(none), kUnit, st);
    CHECK(empty.cells().size() == 1);

    std::vector<Primitive> prims;
    for (int ax = 0; ax < 3; ++ax) prims.push_back(whole(Plane(Vec3::Unit(ax), 0.5), kUnit, ax));
    const CellComplex oct = build_complex(prims, kUnit, st);
    CHECK(oct.cells().size() == 8);
    CHECK(oct.adjacency().size() == 12);
    check_tiling(oct);
    for (const auto& c : oct.cells()) CHECK(c.volume() == doctest::Approx(0.125));
  }
}

TEST_CASE("exhaustive cell counts match the arrangement formula") {
  std::mt19937_64 rng(2);
  const Aabb box{Point3(-10, -10, -10), Point3(10, 10, 10)};
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto planes = oracle::general_planes(n, rng);
      CellComplex cx(box);
      for (int k = 0; k < n; ++k) {
        cx.insert(whole(planes[k], box, k), PartitionMode::Exhaustive);
        check_tiling(cx);
      }
      const int formula = (n * n * n + 5 * n + 6) / 6;
      CHECK(static_cast<int>(cx.cells().size()) == formula);
      if (n <= 4 || trial < 8) CHECK(oracle::arrangement_regions(planes, box) == formula);
      // Every cell is one region of the arrangement: sign vectors are distinct.
      std::set<std::vector<int>> signs;
      for (const auto& c : cx.cells()) {
        std::vector<int> s;
        for (const auto& p : planes) s.push_back(p.signed_distance(c.centroid()) > 0.0);
        signs.insert(s);
      }
      CHECK(signs.size() == cx.cells().size());
    }
  }
}

TEST_CASE("incremental adjacency equals adjacency from scratch") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), off(-0.3, 0.3);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto mode = trial % 2 ? PartitionMode::Adaptive : PartitionMode::Exhaustive;
    CellComplex cx(kUnit);
    for (int k = 0; k < n; ++k) {
      Vec3 nn = oracle::random_unit(rng);
      // Mix in axis-aligned planes so coplanar facets and T-junctions appear.
      if (k % 2 == 0) nn = Vec3::Unit(static_cast<int>(rng() % 3));
      const Plane p = Plane::from_point_normal(Point3(0.5, 0.5, 0.5) + off(rng) * nn, nn);
      Aabb region = kUnit;
      if (mode == PartitionMode::Adaptive) {
        const Point3 c(u(rng), u(rng), u(rng));
        region = Aabb{c - Vec3::Constant(0.3), c + Vec3::Constant(0.3)};
      }
      cx.insert({p, region, k}, mode);
      check_tiling(cx);
    }
    const auto inc = incremental_adjacency(cx);
    const auto ref = oracle::adjacency_from_scratch(cx, 1e-12);
    CHECK(inc.size() == cx.adjacency().size());
    REQUIRE(inc.size() == ref.size());
    for (const auto& [key, area] : ref) {
      REQUIRE(inc.count(key) == 1);
      CHECK(inc.at(key) == doctest::Approx(area).epsilon(1e-9));
    }
    check_facets_covered(cx);
  }
}

TEST_CASE("adaptive never exceeds exhaustive") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 15; ++trial) {
    const PolyMesh building = random_building(rng());
    const auto fs = face_segments(building, 2000.0, 30, rng());
    const auto plan = plan_insertion(fs.segments);
    const Aabb bounds = complex_bounds(fs.segments, fs.cloud, 0.05);
    PartitionStrategy ad, ex;
    ex.mode = PartitionMode::Exhaustive;
    const auto a = build_complex(fs.segments, fs.cloud, plan, bounds, ad);
    const auto e = build_complex(fs.segments, fs.cloud, plan, bounds, ex);
    CHECK(a.cells().size() <= e.cells().size());
    check_tiling(a);
    check_tiling(e);
  }
}

TEST_CASE("bounds padding and wall augmentation") {
  // Scan-like cloud of a unit cube without its bottom face.
  const PolyMesh cube = box_mesh(kUnit);
  const auto fs = face_segments(cube, 3000.0, 30, 6);
  std::vector<PlanarSegment> no_bottom;
  for (const auto& s : fs.segments) {
    if (s.plane.normal.z() < -0.5 || (std::abs(s.plane.normal.z()) > 0.5 && s.plane.canonical().offset < 0.5)) {
      continue;
    }
    no_bottom.push_back(s);
  }
  REQUIRE(no_bottom.size() == 5);
  const Aabb bounds = complex_bounds(no_bottom, fs.cloud, 0.05);
  CHECK(bounds.min.z() == doctest::Approx(-0.05));
  CHECK(bounds.max.x() == doctest::Approx(1.05));

  const auto plan = augment_bounds_faces(plan_insertion(no_bottom));
  CHECK(plan.wall_faces);
  CHECK(plan.entries.size() == 11);
  CHECK(augment_bounds_faces(plan).entries.size() == 11);
  const auto cx = build_complex(no_bottom, fs.cloud, plan, bounds, PartitionStrategy{});
  CHECK(cx.wall_faces());
  // Walls never split: five planes through a slab-like box.
  int inner = -1;
  for (std::size_t c = 0; c < cx.cells().size(); ++c) {
    if ((cx.cells()[c].centroid() - Point3(0.5, 0.5, 0.5)).norm() < 0.3) inner = static_cast<int>(c);
  }
  REQUIRE(inner >= 0);
  const auto flags = cx.boundary_flags(inner);
  CHECK(flags[4]);  // -z wall
  for (int k = 0; k < 4; ++k) CHECK_FALSE(flags[k]);
  CHECK_FALSE(flags[5]);
  // The floor of that cell sits on the padded bound.
  CHECK(cx.cells()[inner].bounds().min.z() == doctest::Approx(-0.05));
  CHECK(cx.cells()[inner].volume() == doctest::Approx(1.05));
  for (std::size_t k = 0; k < cx.log().size(); ++k) {
    if (is_wall_source(cx.log()[k].source)) CHECK(cx.log()[k].splits == 0);
  }
}

TEST_CASE("max cells truncates insertion") {
  CellComplex cx(kUnit);
  for (int k = 1; k < 10; ++k) cx.insert(whole(Plane(Vec3(1, 0, 0), k / 10.0), kUnit, k), PartitionMode::Exhaustive, 4);
  CHECK(cx.cells().size() == 4);
  CHECK(cx.truncated());
}

TEST_CASE("complex JSON") {
  CellComplex cx(kUnit);
  cx.insert(whole(Plane(Vec3(0, 0, 1), 0.5), kUnit, 7), PartitionMode::Exhaustive);
  const auto j = complex_to_json(cx);
  REQUIRE(j.at("cells").size() == 2);
  CHECK(j.at("cells")[0].at("halfspaces").size() == 6);
  CHECK(j.at("cells")[0].at("volume").get<double>() == doctest::Approx(0.5));
  REQUIRE(j.at("adjacency").size() == 1);
  CHECK(j.at("adjacency")[0].at("area").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("adjacency")[0].at("face").size() == 4);
  CHECK(j.at("insertions")[0].at("segment") == 7);
  CHECK(j.at("insertions")[0].at("splits") == 1);
  CHECK(j.at("wall_faces") == false);
}
