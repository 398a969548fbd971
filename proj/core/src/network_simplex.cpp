#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wbc/errors.hpp"

namespace wbc::detail {
namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TransportSimplex::TransportSimplex(const Vector& supply, const Vector& demand, double max_cost)
    : m1_(static_cast<int>(supply.size())),
      m2_(static_cast<int>(demand.size())),
      root_(m1_ + m2_),
      artificial_(static_cast<std::size_t>(m1_ + m2_)) {
  if (m1_ < 1 || m2_ < 1) throw std::invalid_argument("TransportSimplex: empty marginal");
  if ((supply.array() <= 0.0).any() || (demand.array() <= 0.0).any()) {
    throw std::invalid_argument("TransportSimplex: marginals must be strictly positive");
  }
  const int nodes = m1_ + m2_ + 1;
  const double scale = std::max(max_cost, 1e-300);
  const double big_m = (scale + 1.0) * nodes;
  // Potentials carry multiples of big_m, so rounding is relative to it.
  tolerance_ = std::max(1e-13 * scale, 4.0 * std::numeric_limits<double>::epsilon() * big_m);

  parent_.assign(static_cast<std::size_t>(nodes), -1);
  pred_arc_.assign(static_cast<std::size_t>(nodes), -1);
  up_.assign(static_cast<std::size_t>(nodes), 0);
  depth_.assign(static_cast<std::size_t>(nodes), 0);
  pot_.assign(static_cast<std::size_t>(nodes), 0.0);
  tree_adj_.assign(static_cast<std::size_t>(nodes), {});

  src_.reserve(artificial_);
  for (int i = 0; i < m1_; ++i) {
    const int a = static_cast<int>(src_.size());
    src_.push_back(i);
    tgt_.push_back(root_);
    cost_.push_back(big_m);
    flow_.push_back(supply[i]);
    pos_src_.push_back(-1);
    pos_tgt_.push_back(-1);
    attach(a);
    parent_[static_cast<std::size_t>(i)] = root_;
    pred_arc_[static_cast<std::size_t>(i)] = a;
    up_[static_cast<std::size_t>(i)] = 1;
    depth_[static_cast<std::size_t>(i)] = 1;
    pot_[static_cast<std::size_t>(i)] = -big_m;
  }
  for (int j = 0; j < m2_; ++j) {
    const int node = m1_ + j;
    const int a = static_cast<int>(src_.size());
    src_.push_back(root_);
    tgt_.push_back(node);
    cost_.push_back(big_m);
    flow_.push_back(demand[j]);
    pos_src_.push_back(-1);
    pos_tgt_.push_back(-1);
    attach(a);
    parent_[static_cast<std::size_t>(node)] = root_;
    pred_arc_[static_cast<std::size_t>(node)] = a;
    up_[static_cast<std::size_t>(node)] = 0;
    depth_[static_cast<std::size_t>(node)] = 1;
    pot_[static_cast<std::size_t>(node)] = big_m;
  }
}

int TransportSimplex::add_arc(int i, int j, double cost) {
  const int id = static_cast<int>(src_.size());
  src_.push_back(i);
  tgt_.push_back(m1_ + j);
  cost_.push_back(cost);
  flow_.push_back(0.0);
  pos_src_.push_back(-1);
  pos_tgt_.push_back(-1);
  return id;
}

void TransportSimplex::warm_start(const std::vector<int>& arcs, const std::vector<double>& flows,
                                  int anchor) {
  const int nodes = m1_ + m2_ + 1;
  if (arcs.size() != static_cast<std::size_t>(m1_ + m2_ - 1) || flows.size() != arcs.size()) {
    throw std::invalid_argument("TransportSimplex::warm_start: need m1 + m2 - 1 basic arcs");
  }
  if (anchor < 0 || anchor >= m2_) throw std::invalid_argument("TransportSimplex::warm_start: bad anchor");
  const auto kept = static_cast<std::size_t>(m1_ + anchor);
  for (std::size_t a = 0; a < artificial_; ++a) {
    if (pos_src_[a] >= 0 && a != kept) detach(static_cast<int>(a));
    flow_[a] = 0.0;
  }
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    const auto a = static_cast<std::size_t>(arcs[k]);
    if (a < artificial_ || a >= src_.size() || pos_src_[a] >= 0) {
      throw std::invalid_argument("TransportSimplex::warm_start: invalid basic arc");
    }
    flow_[a] = std::max(flows[k], 0.0);
    attach(arcs[k]);
  }

  std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
  seen[static_cast<std::size_t>(root_)] = 1;
  const int first = m1_ + anchor;
  seen[static_cast<std::size_t>(first)] = 1;
  hang(first, root_, static_cast<int>(kept));
  int reached = 2;
  stack_.assign(1, first);
  while (!stack_.empty()) {
    const int node = stack_.back();
    stack_.pop_back();
    for (int arc : tree_adj_[static_cast<std::size_t>(node)]) {
      if (arc == pred_arc_[static_cast<std::size_t>(node)]) continue;
      const int other = src_[arc] == node ? tgt_[arc] : src_[arc];
      if (seen[static_cast<std::size_t>(other)]) {
        throw std::invalid_argument("TransportSimplex::warm_start: basis contains a cycle");
      }
      seen[static_cast<std::size_t>(other)] = 1;
      ++reached;
      hang(other, node, arc);
      stack_.push_back(other);
    }
  }
  if (reached != nodes) throw std::invalid_argument("TransportSimplex::warm_start: basis does not span");
}

void TransportSimplex::attach(int arc) {
  auto& ls = tree_adj_[static_cast<std::size_t>(src_[arc])];
  pos_src_[arc] = static_cast<int>(ls.size());
  ls.push_back(arc);
  auto& lt = tree_adj_[static_cast<std::size_t>(tgt_[arc])];
  pos_tgt_[arc] = static_cast<int>(lt.size());
  lt.push_back(arc);
}

void TransportSimplex::detach(int arc) {
  auto remove = [this](int node, int pos) {
    auto& list = tree_adj_[static_cast<std::size_t>(node)];
    const int moved = list.back();
    list[static_cast<std::size_t>(pos)] = moved;
    list.pop_back();
    if (pos < static_cast<int>(list.size())) {
      (src_[moved] == node ? pos_src_ : pos_tgt_)[static_cast<std::size_t>(moved)] = pos;
    }
  };
  remove(src_[arc], pos_src_[arc]);
  remove(tgt_[arc], pos_tgt_[arc]);
  pos_src_[arc] = -1;
  pos_tgt_[arc] = -1;
}

int TransportSimplex::find_entering() {
  const std::size_t total = src_.size();
  const std::size_t real = total - artificial_;
  if (real == 0) return -1;
  const std::size_t block =
      std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(real))));
  if (cursor_ < artificial_ || cursor_ >= total) cursor_ = artificial_;
  double best = -tolerance_;
  int best_arc = -1;
  std::size_t in_block = 0;
  for (std::size_t scanned = 0; scanned < real; ++scanned) {
    const std::size_t a = cursor_;
    if (++cursor_ >= total) cursor_ = artificial_;
    if (pos_src_[a] < 0) {
      const double rc = cost_[a] + pot_[static_cast<std::size_t>(src_[a])] -
                        pot_[static_cast<std::size_t>(tgt_[a])];
      if (rc < best) {
        best = rc;
        best_arc = static_cast<int>(a);
      }
    }
    if (++in_block == block) {
      if (best_arc >= 0) return best_arc;
      in_block = 0;
    }
  }
  return best_arc;
}

void TransportSimplex::pivot(int e) {
  // Flow runs join -> ... -> first -> (e) -> second -> ... -> join.
  const int first = src_[e];
  const int second = tgt_[e];
  int a = first;
  int b = second;
  while (a != b) {
    if (depth_[static_cast<std::size_t>(a)] >= depth_[static_cast<std::size_t>(b)]) {
      a = parent_[static_cast<std::size_t>(a)];
    } else {
      b = parent_[static_cast<std::size_t>(b)];
    }
  }
  const int join = a;

  double delta = kInf;
  int u_out = -1;
  int side = 0;
  for (int x = first; x != join; x = parent_[static_cast<std::size_t>(x)]) {
    if (up_[static_cast<std::size_t>(x)]) {
      const double d = flow_[static_cast<std::size_t>(pred_arc_[static_cast<std::size_t>(x)])];
      if (d < delta) {
        delta = d;
        u_out = x;
        side = 1;
      }
    }
  }
  for (int x = second; x != join; x = parent_[static_cast<std::size_t>(x)]) {
    if (!up_[static_cast<std::size_t>(x)]) {
      const double d = flow_[static_cast<std::size_t>(pred_arc_[static_cast<std::size_t>(x)])];
      if (d <= delta) {
        delta = d;
        u_out = x;
        side = 2;
      }
    }
  }
  if (u_out < 0) throw std::logic_error("TransportSimplex: unbounded pivot cycle");
  delta = std::max(delta, 0.0);

  if (delta > 0.0) {
    for (int x = first; x != join; x = parent_[static_cast<std::size_t>(x)]) {
      auto& f = flow_[static_cast<std::size_t>(pred_arc_[static_cast<std::size_t>(x)])];
      f = up_[static_cast<std::size_t>(x)] ? std::max(f - delta, 0.0) : f + delta;
    }
    for (int x = second; x != join; x = parent_[static_cast<std::size_t>(x)]) {
      auto& f = flow_[static_cast<std::size_t>(pred_arc_[static_cast<std::size_t>(x)])];
      f = up_[static_cast<std::size_t>(x)] ? f + delta : std::max(f - delta, 0.0);
    }
  }
  flow_[static_cast<std::size_t>(e)] = delta;
  const int leaving = pred_arc_[static_cast<std::size_t>(u_out)];
  flow_[static_cast<std::size_t>(leaving)] = 0.0;

  detach(leaving);
  attach(e);
  if (side == 1) {
    rehang(first, second, e);
  } else {
    rehang(second, first, e);
  }
}

void TransportSimplex::hang(int child, int par, int arc) {
  const auto c = static_cast<std::size_t>(child);
  const auto p = static_cast<std::size_t>(par);
  parent_[c] = par;
  pred_arc_[c] = arc;
  depth_[c] = depth_[p] + 1;
  if (src_[arc] == child) {
    up_[c] = 1;
    pot_[c] = pot_[p] - cost_[static_cast<std::size_t>(arc)];
  } else {
    up_[c] = 0;
    pot_[c] = pot_[p] + cost_[static_cast<std::size_t>(arc)];
  }
}

void TransportSimplex::rehang(int new_root, int new_parent, int via_arc) {
  hang(new_root, new_parent, via_arc);
  stack_.clear();
  stack_.push_back(new_root);
  while (!stack_.empty()) {
    const int node = stack_.back();
    stack_.pop_back();
    for (int arc : tree_adj_[static_cast<std::size_t>(node)]) {
      if (arc == pred_arc_[static_cast<std::size_t>(node)]) continue;
      const int other = src_[arc] == node ? tgt_[arc] : src_[arc];
      hang(other, node, arc);
      stack_.push_back(other);
    }
  }
}

std::int64_t TransportSimplex::solve(std::int64_t max_pivots) {
  std::int64_t pivots = 0;
  for (;;) {
    const int e = find_entering();
    if (e < 0) return pivots;
    if (pivots >= max_pivots) {
      throw ConvergenceError("network simplex: pivot cap reached", 0.0, pivots);
    }
    pivot(e);
    ++pivots;
  }
}

std::vector<PlanEntry> TransportSimplex::flows() const {
  std::vector<PlanEntry> out;
  for (std::size_t a = artificial_; a < src_.size(); ++a) {
    if (pos_src_[a] >= 0 && flow_[a] > 0.0) {
      out.push_back({src_[a], tgt_[a] - m1_, flow_[a]});
    }
  }
  std::sort(out.begin(), out.end(), [](const PlanEntry& x, const PlanEntry& y) {
    return x.source != y.source ? x.source < y.source : x.target < y.target;
  });
  return out;
}

double TransportSimplex::artificial_flow() const {
  double worst = 0.0;
  for (std::size_t a = 0; a < artificial_; ++a) {
    if (pos_src_[a] >= 0) worst = std::max(worst, flow_[a]);
  }
  return worst;
}

}  // namespace wbc::detail
