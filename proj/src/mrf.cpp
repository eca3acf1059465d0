#include "polyrecon/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace polyrecon {

MrfProblem build_mrf(std::span<const double> occupancy, std::span<const Edge> edges, double lambda, double max_area) {
  if (occupancy.empty()) throw std::invalid_argument("build_mrf: empty complex");
  if (!(lambda >= 0.0)) throw std::invalid_argument("build_mrf: lambda must be >= 0");
  if (!(max_area > 0.0)) throw std::invalid_argument("build_mrf: max area must be > 0");
  MrfProblem p;
  p.n = occupancy.size();
  p.lambda = lambda;
  p.max_area = max_area;
  const double inv_n = 1.0 / static_cast<double>(p.n);
  p.cost_in.reserve(p.n);
  p.cost_out.reserve(p.n);
  for (double o : occupancy) {
    if (!(o >= 0.0 && o <= 1.0)) throw std::invalid_argument("build_mrf: occupancy outside [0, 1]");
    p.cost_in.push_back((1.0 - o) * inv_n);
    p.cost_out.push_back(o * inv_n);
  }
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || static_cast<std::size_t>(e.i) >= p.n || static_cast<std::size_t>(e.j) >= p.n) {
      throw std::invalid_argument("build_mrf: edge index out of range");
    }
    if (!(e.area >= 0.0)) throw std::invalid_argument("build_mrf: negative area");
    p.pairwise.push_back({e.i, e.j, e.area, lambda * e.area / max_area});
  }
  p.forced_out.assign(p.n, 0);
  return p;
}

MrfProblem build_mrf(const CellComplex& complex, std::span<const double> occupancy, double lambda) {
  if (occupancy.size() != complex.cells().size()) {
    throw std::invalid_argument("build_mrf: occupancy does not match the cell count");
  }
  std::vector<Edge> edges;
  edges.reserve(complex.adjacency().size());
  for (const auto& r : complex.adjacency()) edges.push_back({r.a, r.b, r.area});
  MrfProblem p = build_mrf(occupancy, edges, lambda, complex.max_face_area());
  if (!complex.wall_faces()) {
    for (std::size_t i = 0; i < p.n; ++i) {
      const auto f = complex.boundary_flags(static_cast<int>(i));
      p.forced_out[i] = std::any_of(f.begin(), f.end(), [](bool b) { return b; });
    }
  }
  return p;
}

EnergyTerms energy_terms(const MrfProblem& p, const Labeling& x) {
  if (x.size() != p.n) throw std::invalid_argument("energy: labeling size mismatch");
  EnergyTerms e;
  bool violated = false;
  for (std::size_t i = 0; i < p.n; ++i) {
    e.data += x[i] == Label::In ? p.cost_in[i] : p.cost_out[i];
    if (!p.forced_out.empty() && p.forced_out[i] && x[i] == Label::In) violated = true;
  }
  double weighted = 0.0;
  for (const auto& t : p.pairwise) {
    if (x[t.i] != x[t.j]) {
      e.smooth += t.area;
      weighted += t.weight;
    }
  }
  e.smooth /= p.max_area;
  e.total = violated ? std::numeric_limits<double>::infinity() : e.data + weighted;
  return e;
}

MaxFlow::MaxFlow(int nodes) : graph_(nodes), level_(nodes), it_(nodes) {}

void MaxFlow::add_edge(int from, int to, double capacity, double reverse_capacity) {
  graph_[from].push_back({to, static_cast<int>(graph_[to].size()), capacity});
  graph_[to].push_back({from, static_cast<int>(graph_[from].size()) - 1, reverse_capacity});
  if (std::isfinite(capacity)) max_cap_ = std::max(max_cap_, capacity);
  if (std::isfinite(reverse_capacity)) max_cap_ = std::max(max_cap_, reverse_capacity);
}

bool MaxFlow::bfs(int s, int t) {
  std::fill(level_.begin(), level_.end(), -1);
  std::queue<int> q;
  level_[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const auto& a : graph_[u]) {
      if (a.cap > eps_ && level_[a.to] < 0) {
        level_[a.to] = level_[u] + 1;
        q.push(a.to);
      }
    }
  }
  return level_[t] >= 0;
}

double MaxFlow::dfs(int u, int t, double pushed) {
  if (u == t) return pushed;
  for (std::size_t& i = it_[u]; i < graph_[u].size(); ++i) {
    Arc& a = graph_[u][i];
    if (a.cap <= eps_ || level_[a.to] != level_[u] + 1) continue;
    const double got = dfs(a.to, t, std::min(pushed, a.cap));
    if (got > 0.0) {
      a.cap -= got;
      graph_[a.to][a.rev].cap += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::solve(int source, int sink) {
  // Residuals below eps_ are treated as saturated.
  eps_ = 1e-13 * std::max(max_cap_, 1e-300);
  double flow = 0.0;
  while (bfs(source, sink)) {
    std::fill(it_.begin(), it_.end(), 0);
    while (true) {
      const double f = dfs(source, sink, std::numeric_limits<double>::infinity());
      if (f <= 0.0) break;
      flow += f;
    }
  }
  return flow;
}

std::vector<char> MaxFlow::source_side(int source) const {
  std::vector<char> seen(graph_.size(), 0);
  std::vector<int> stack{source};
  seen[source] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& a : graph_[u]) {
      if (a.cap > eps_ && !seen[a.to]) {
        seen[a.to] = 1;
        stack.push_back(a.to);
      }
    }
  }
  return seen;
}

Labeling solve_mincut(const MrfProblem& p) {
  const int n = static_cast<int>(p.n);
  const int s = n, t = n + 1;
  MaxFlow g(n + 2);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    // Source side means In: cutting s->i pays cost_out, cutting i->t pays cost_in.
    // Only the difference matters; the common part is a constant.
    const double base = std::min(p.cost_in[i], p.cost_out[i]);
    const double to_source = p.cost_out[i] - base;
    const double to_sink = p.cost_in[i] - base;
    if (to_source > 0.0) g.add_edge(s, i, to_source);
    if (!p.forced_out.empty() && p.forced_out[i]) {
      g.add_edge(i, t, inf);
    } else if (to_sink > 0.0) {
      g.add_edge(i, t, to_sink);
    }
  }
  for (const auto& e : p.pairwise) {
    if (e.weight > 0.0 && e.i != e.j) g.add_edge(e.i, e.j, e.weight, e.weight);
  }
  g.solve(s, t);
  const auto side = g.source_side(s);
  Labeling x(p.n);
  for (int i = 0; i < n; ++i) x[i] = side[i] ? Label::In : Label::Out;
  return x;
}

nlohmann::json labeling_to_json(const MrfProblem& problem, const Labeling& labeling, std::span<const double> occupancy) {
  nlohmann::json labels = nlohmann::json::array();
  for (Label l : labeling) labels.push_back(l == Label::In ? "in" : "out");
  const EnergyTerms e = energy_terms(problem, labeling);
  return {{"labels", labels},
          {"occupancy", std::vector<double>(occupancy.begin(), occupancy.end())},
          {"lambda", problem.lambda},
          {"max_area", problem.max_area},
          {"energy", {{"D", e.data}, {"V", e.smooth}, {"E", e.total}}}};
}

}  // namespace polyrecon
