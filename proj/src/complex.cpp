#include "polyrecon/complex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polyrecon {

double verticality(const Plane& plane) { return 1.0 - std::abs(plane.normal.z()); }

InsertionPlan plan_insertion(std::span<const PlanarSegment> segments) {
  InsertionPlan plan;
  plan.entries.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double v = verticality(segments[i].plane);
    plan.entries.push_back({static_cast<int>(i), v, segments[i].support(), v > kVerticalThreshold});
  }
  std::stable_sort(plan.entries.begin(), plan.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    if (a.vertical != b.vertical) return a.vertical;
    return a.support > b.support;
  });
  return plan;
}

InsertionPlan augment_bounds_faces(InsertionPlan plan) {
  for (int k = 0; k < 6; ++k) {
    if (std::none_of(plan.entries.begin(), plan.entries.end(),
                     [&](const PlanEntry& e) { return e.segment == wall_source(k); })) {
      plan.entries.push_back({wall_source(k), k < 4 ? 1.0 : 0.0, 0, k < 4});
    }
  }
  plan.wall_faces = true;
  return plan;
}

CellComplex::CellComplex(const Aabb& bounds) : bounds_(bounds) {
  cells_.push_back(ConvexCell::box(bounds));
  leaf_of_cell_.push_back(0);
  records_of_cell_.emplace_back();
  BspNode root;
  root.cell = 0;
  nodes_.push_back(root);
}

ClipOptions CellComplex::clip_options(int source) const {
  const double s = scale();
  return {tol::kOnPlane * s, tol::kVolume * s * s * s, source};
}

int CellComplex::insert(const Primitive& prim, PartitionMode mode, std::size_t max_cells) {
  const int source = static_cast<int>(planes_.size());
  planes_.push_back(prim.plane);
  const ClipOptions opts = clip_options(source);
  const std::size_t existing = cells_.size();
  int splits = 0;
  for (std::size_t c = 0; c < existing; ++c) {
    if (cells_.size() >= max_cells) {
      truncated_ = true;
      break;
    }
    if (mode == PartitionMode::Adaptive && !cells_[c].bounds().intersects(prim.region)) continue;
    SplitResult r = clip_cell(cells_[c], prim.plane, opts);
    if (r.kind != SplitResult::Kind::Both) continue;

    const int ci = static_cast<int>(c);
    const int ni = static_cast<int>(cells_.size());
    cells_[c] = std::move(*r.positive);
    cells_.push_back(std::move(*r.negative));
    records_of_cell_.emplace_back();
    split_records(ci, ci, ni, prim.plane, source);

    Adjacency rec;
    rec.a = ni;
    rec.b = ci;
    rec.area = polygon_area(r.shared_face);
    rec.face = std::move(r.shared_face);
    rec.source = source;
    records_of_cell_[ni].push_back(static_cast<int>(adjacency_.size()));
    records_of_cell_[ci].push_back(static_cast<int>(adjacency_.size()));
    adjacency_.push_back(std::move(rec));

    const int node = leaf_of_cell_[c];
    const int pos_node = static_cast<int>(nodes_.size());
    nodes_.push_back({Plane(), -1, -1, -1, ci});
    nodes_.push_back({Plane(), -1, -1, -1, ni});
    nodes_[node] = {prim.plane, source, pos_node, pos_node + 1, -1};
    leaf_of_cell_[c] = pos_node;
    leaf_of_cell_.push_back(pos_node + 1);
    ++splits;
  }
  log_.push_back({prim.id, splits});
  return splits;
}

void CellComplex::split_records(int cell, int pos_index, int neg_index, const Plane& plane, int source) {
  const ClipOptions opts = clip_options(source);
  const double area_eps = opts.on_plane_eps * opts.on_plane_eps;
  const std::vector<int> recs = std::move(records_of_cell_[cell]);
  records_of_cell_[cell].clear();
  for (int r : recs) {
    Adjacency& rec = adjacency_[r];
    const bool cell_is_a = rec.a == cell;
    const int other = cell_is_a ? rec.b : rec.a;
    PolygonSplit parts = split_polygon(rec.face, plane, opts.on_plane_eps);
    const double ap = polygon_area(parts.positive);
    const double an = polygon_area(parts.negative);
    const bool has_pos = ap > area_eps;
    const bool has_neg = an > area_eps;

    auto retarget = [&](Adjacency& x, int child) {
      if (cell_is_a) {
        x.a = child;
      } else {
        x.b = child;
      }
    };
    if (has_pos && has_neg) {
      Adjacency neg = rec;
      neg.face = std::move(parts.negative);
      neg.area = an;
      retarget(neg, neg_index);
      rec.face = std::move(parts.positive);
      rec.area = ap;
      retarget(rec, pos_index);
      records_of_cell_[pos_index].push_back(r);
      const int nr = static_cast<int>(adjacency_.size());
      records_of_cell_[neg_index].push_back(nr);
      records_of_cell_[other].push_back(nr);
      adjacency_.push_back(std::move(neg));
    } else if (has_neg || (!has_pos && an > ap)) {
      // Everything (or the larger sliver) goes to the negative child.
      if (has_neg) {
        rec.face = std::move(parts.negative);
        rec.area = an;
      }
      retarget(rec, neg_index);
      records_of_cell_[neg_index].push_back(r);
    } else {
      if (has_pos) {
        rec.face = std::move(parts.positive);
        rec.area = ap;
      }
      retarget(rec, pos_index);
      records_of_cell_[pos_index].push_back(r);
    }
  }
}

std::array<bool, 6> CellComplex::boundary_flags(int cell) const {
  std::array<bool, 6> flags{};
  for (const auto& f : cells_[cell].faces()) {
    if (is_wall_source(f.source)) flags[wall_index(f.source)] = true;
  }
  return flags;
}

double CellComplex::max_face_area() const {
  double a = 0.0;
  for (const auto& r : adjacency_) a = std::max(a, r.area);
  for (const auto& c : cells_) {
    for (std::size_t f = 0; f < c.faces().size(); ++f) {
      if (is_wall_source(c.faces()[f].source)) a = std::max(a, polygon_area(c.face_polygon(f)));
    }
  }
  return a;
}

double CellComplex::total_volume() const {
  double v = 0.0;
  for (const auto& c : cells_) v += c.volume();
  return v;
}

Aabb complex_bounds(std::span<const PlanarSegment> segments, const PointCloud& cloud, double padding) {
  if (padding < 0.0) throw std::invalid_argument("complex_bounds: padding must be >= 0");
  Aabb box = Aabb::empty();
  for (const auto& s : segments) {
    for (int i : s.inliers) box.expand(cloud[i]);
  }
  if (box.is_empty()) box = Aabb::of_points(cloud);
  if (box.is_empty()) throw std::invalid_argument("complex_bounds: no points");
  const Vec3 e = box.extent();
  const double m = std::max(e.maxCoeff(), 1e-9);
  // Degenerate (flat) axes are padded as if they spanned a tenth of the largest side.
  const Vec3 pad = padding * e.cwiseMax(Vec3::Constant(0.1 * m)) + Vec3::Constant(padding > 0.0 ? 0.0 : 1e-6 * m);
  return {box.min - pad, box.max + pad};
}

Primitive make_primitive(const PlanarSegment& seg, const PointCloud& cloud, double padding, int id) {
  Aabb box = Aabb::empty();
  for (int i : seg.inliers) box.expand(cloud[i]);
  if (box.is_empty()) box = {seg.plane.project(Point3::Zero()), seg.plane.project(Point3::Zero())};
  return {seg.plane, box.padded(padding), id};
}

CellComplex build_complex(std::span<const Primitive> ordered, const Aabb& bounds, const PartitionStrategy& strategy) {
  CellComplex cx(bounds);
  for (const auto& p : ordered) cx.insert(p, strategy.mode, strategy.max_cells);
  return cx;
}

CellComplex build_complex(std::span<const PlanarSegment> segments, const PointCloud& cloud,
                          const InsertionPlan& plan, const Aabb& bounds, const PartitionStrategy& strategy) {
  std::vector<Primitive> ordered;
  const auto walls = bounds.walls();
  for (const auto& e : plan.entries) {
    if (is_wall_source(e.segment)) {
      ordered.push_back({walls[wall_index(e.segment)], bounds, e.segment});
    } else {
      ordered.push_back(make_primitive(segments[e.segment], cloud, strategy.segment_padding, e.segment));
    }
  }
  CellComplex cx = build_complex(ordered, bounds, strategy);
  cx.set_wall_faces(plan.wall_faces);
  return cx;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

nlohmann::json plane_json(const Plane& p) { return {{"normal", vec_json(p.normal)}, {"offset", p.offset}}; }

}  // namespace

nlohmann::json complex_to_json(const CellComplex& cx) {
  using nlohmann::json;
  json cells = json::array();
  for (std::size_t i = 0; i < cx.cells().size(); ++i) {
    const auto& c = cx.cells()[i];
    json hs = json::array();
    for (const auto& h : c.halfspaces()) {
      json e = plane_json(h.plane);
      e["side"] = h.side == Side::Negative ? "negative" : "positive";
      hs.push_back(e);
    }
    json walls = json::array();
    const auto flags = cx.boundary_flags(static_cast<int>(i));
    for (bool f : flags) walls.push_back(f);
    cells.push_back({{"halfspaces", hs},
                     {"volume", c.volume()},
                     {"centroid", vec_json(c.centroid())},
                     {"walls", walls}});
  }
  json adj = json::array();
  for (const auto& r : cx.adjacency()) {
    json ring = json::array();
    for (const auto& p : r.face) ring.push_back(vec_json(p));
    adj.push_back({{"i", r.a}, {"j", r.b}, {"area", r.area}, {"plane", r.source}, {"face", ring}});
  }
  json log = json::array();
  for (std::size_t k = 0; k < cx.log().size(); ++k) {
    log.push_back({{"segment", cx.log()[k].source}, {"splits", cx.log()[k].splits}, {"plane", plane_json(cx.planes()[k])}});
  }
  return {{"bounds", {{"min", vec_json(cx.bounds().min)}, {"max", vec_json(cx.bounds().max)}}},
          {"wall_faces", cx.wall_faces()},
          {"truncated", cx.truncated()},
          {"cells", cells},
          {"adjacency", adj},
          {"insertions", log}};
}

}  // namespace polyrecon
