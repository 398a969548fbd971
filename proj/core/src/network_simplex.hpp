#pragma once

// Primal network simplex for the uncapacitated transportation problem
//
//   min Σ c_ij x_ij   s.t.  Σ_j x_ij = a_i,  Σ_i x_ij = b_j,  x >= 0,
//
// on an explicit (possibly sparse) arc set that may grow between solves.
// The initial basis is the big-M artificial star around an extra root node,
// which is strongly feasible; the leaving arc is the last blocking arc of the
// pivot cycle (Cunningham's rule), so degenerate pivots cannot cycle.
// Entering arcs come from deterministic block search over the arc list.

#include <cstdint>
#include <vector>

#include "wbc/transport.hpp"

namespace wbc::detail {

class TransportSimplex {
 public:
  // supply (m1) and demand (m2) must be strictly positive. `max_cost` bounds
  // every arc cost that will ever be added; it sets the artificial cost.
  TransportSimplex(const Vector& supply, const Vector& demand, double max_cost);

  // Adds arc source i -> target j and returns its id. Duplicates are the
  // caller's problem.
  int add_arc(int i, int j, double cost);

  // Replaces the artificial starting basis with `arcs` (m1 + m2 - 1 added
  // arcs spanning every node, carrying `flows`), hung from the root through
  // target `anchor`. The basis must be strongly feasible: every zero-flow arc
  // points away from the anchor. Call before the first solve.
  void warm_start(const std::vector<int>& arcs, const std::vector<double>& flows, int anchor);

  // Pivots until no real arc has reduced cost below -tolerance(). Throws
  // ConvergenceError after `max_pivots` pivots.
  std::int64_t solve(std::int64_t max_pivots);

  // c_ij - u_i - v_j under the current basis potentials.
  double reduced_cost(int i, int j, double cost) const {
    return cost + pot_[static_cast<std::size_t>(i)] - pot_[static_cast<std::size_t>(m1_ + j)];
  }

  // Node potentials: sources 0..m1-1, then targets m1..m1+m2-1.
  const std::vector<double>& potentials() const { return pot_; }

  double tolerance() const { return tolerance_; }
  std::size_t arc_count() const { return src_.size() - artificial_; }

  // Positive flows on real arcs, row-major order.
  std::vector<PlanEntry> flows() const;

  // Largest flow left on an artificial arc (nonzero only for unbalanced data).
  double artificial_flow() const;

 private:
  int find_entering();
  void pivot(int entering);
  void detach(int arc);
  void attach(int arc);
  void rehang(int new_root, int new_parent, int via_arc);
  void hang(int child, int parent, int arc);

  int m1_;
  int m2_;
  int root_;
  std::size_t artificial_;
  double tolerance_;

  // Arc arrays (artificial arcs first).
  std::vector<int> src_;
  std::vector<int> tgt_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<int> pos_src_;  // position in tree_adj_[src] or -1
  std::vector<int> pos_tgt_;

  // Spanning tree rooted at root_.
  std::vector<int> parent_;
  std::vector<int> pred_arc_;
  std::vector<char> up_;  // pred arc points node -> parent
  std::vector<int> depth_;
  std::vector<double> pot_;  // pot[tgt] - pot[src] = cost on tree arcs
  std::vector<std::vector<int>> tree_adj_;

  std::size_t cursor_ = 0;
  std::vector<int> stack_;
};

}  // namespace wbc::detail
