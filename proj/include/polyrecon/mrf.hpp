#pragma once

// Binary in/out labeling of cells: data term against occupancy plus an
// area-weighted Potts smoothness term, minimized exactly by s-t min-cut.

#include "polyrecon/complex.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace polyrecon {

enum class Label : std::uint8_t { Out = 0, In = 1 };
using Labeling = std::vector<Label>;

inline constexpr double kDefaultLambda = 0.001;

struct PairwiseTerm {
  int i = 0;
  int j = 0;
  double area = 0.0;    // shared facet area a_ij
  double weight = 0.0;  // lambda * a_ij / A
};

struct MrfProblem {
  std::size_t n = 0;
  std::vector<double> cost_in;   // (1 - o_i) / n
  std::vector<double> cost_out;  // o_i / n
  std::vector<PairwiseTerm> pairwise;
  double lambda = 0.0;
  double max_area = 1.0;  // A
  /// Cells that must be labeled Out (e.g. cells on inadmissible box walls).
  std::vector<char> forced_out;
};

struct Edge {
  int i = 0;
  int j = 0;
  double area = 0.0;
};

/// Throws std::invalid_argument for n == 0, mismatched sizes, lambda < 0,
/// max_area <= 0 or a negative area.
MrfProblem build_mrf(std::span<const double> occupancy, std::span<const Edge> edges, double lambda, double max_area);
/// Pairs come from the complex adjacency; A is the complex's largest facet.
/// When the complex does not admit wall faces, wall-touching cells are forced Out.
MrfProblem build_mrf(const CellComplex& complex, std::span<const double> occupancy, double lambda);

struct EnergyTerms {
  double data = 0.0;    // D
  double smooth = 0.0;  // V, before the lambda factor
  double total = 0.0;   // D + lambda * V (infinite when a forced cell is In)
};

EnergyTerms energy_terms(const MrfProblem& problem, const Labeling& labeling);
inline double energy(const MrfProblem& problem, const Labeling& labeling) {
  return energy_terms(problem, labeling).total;
}

/// Global minimizer via max-flow (Dinic). Among minimizers, the cut closest
/// to the source is returned, i.e. a tie resolves to Out.
Labeling solve_mincut(const MrfProblem& problem);

/// Max-flow on a directed graph with real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes);
  void add_edge(int from, int to, double capacity, double reverse_capacity = 0.0);
  double solve(int source, int sink);
  /// Nodes reachable from the source in the residual graph after solve().
  std::vector<char> source_side(int source) const;

 private:
  struct Arc {
    int to;
    int rev;
    double cap;
  };
  bool bfs(int s, int t);
  double dfs(int u, int t, double pushed);

  std::vector<std::vector<Arc>> graph_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
  double eps_ = 0.0;
  double max_cap_ = 0.0;
};

nlohmann::json labeling_to_json(const MrfProblem& problem, const Labeling& labeling, std::span<const double> occupancy);

}  // namespace polyrecon
