#include "wbc/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace wbc {

const char* to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::complete:
      return "complete";
    case ScheduleKind::ring_rotating:
      return "ring_rotating";
    case ScheduleKind::random_jointly_connected:
      return "random_jointly_connected";
    case ScheduleKind::leaderless_neighbors:
      return "leaderless_neighbors";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "complete") return ScheduleKind::complete;
  if (name == "ring_rotating") return ScheduleKind::ring_rotating;
  if (name == "random_jointly_connected") return ScheduleKind::random_jointly_connected;
  if (name == "leaderless_neighbors" || name == "leaderless") return ScheduleKind::leaderless_neighbors;
  throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

GraphSchedule::GraphSchedule(int n, std::vector<Matrix> rounds, std::vector<std::int64_t> partition,
                             int L, double delta, bool periodic)
    : n_(n),
      rounds_(std::move(rounds)),
      partition_(std::move(partition)),
      L_(L),
      delta_(delta),
      periodic_(periodic) {
  if (n_ < 1) throw std::invalid_argument("GraphSchedule: n must be >= 1");
  if (rounds_.empty()) throw std::invalid_argument("GraphSchedule: no rounds");
  for (std::size_t t = 0; t < rounds_.size(); ++t) {
    if (rounds_[t].rows() != n_ || rounds_[t].cols() != n_) {
      throw std::invalid_argument("GraphSchedule: W(" + std::to_string(t) + ") is not n x n");
    }
    if (!rounds_[t].allFinite()) {
      throw std::invalid_argument("GraphSchedule: W(" + std::to_string(t) + ") has non-finite entries");
    }
  }
  if (partition_.size() < 2 || partition_.front() != 0) {
    throw std::invalid_argument("GraphSchedule: partition must start at 0 and have >= 2 points");
  }
  for (std::size_t k = 1; k < partition_.size(); ++k) {
    if (partition_[k] <= partition_[k - 1]) {
      throw std::invalid_argument("GraphSchedule: partition must be strictly increasing");
    }
  }
  if (L_ < 1) throw std::invalid_argument("GraphSchedule: L must be >= 1");
  if (!(delta_ > 0.0 && delta_ < 1.0)) {
    throw std::invalid_argument("GraphSchedule: delta must lie in (0, 1)");
  }
  if (periodic_ && partition_.back() != static_cast<std::int64_t>(rounds_.size())) {
    throw std::invalid_argument("GraphSchedule: periodic partition must end at the period length");
  }
}

bool GraphSchedule::defined_at(std::int64_t t) const {
  return t >= 0 && (periodic_ || t < stored_rounds());
}

const Matrix& GraphSchedule::weights_at(std::int64_t t) const {
  if (t < 0) throw std::out_of_range("GraphSchedule: negative round");
  if (periodic_) return rounds_[static_cast<std::size_t>(t % stored_rounds())];
  if (t >= stored_rounds()) {
    throw std::out_of_range("GraphSchedule: round " + std::to_string(t) + " is past the horizon " +
                            std::to_string(stored_rounds()));
  }
  return rounds_[static_cast<std::size_t>(t)];
}

std::int64_t GraphSchedule::tau(std::int64_t k) const {
  if (k < 0) throw std::out_of_range("GraphSchedule: negative partition index");
  const auto size = static_cast<std::int64_t>(partition_.size());
  if (periodic_) {
    const std::int64_t per = size - 1;
    return partition_[static_cast<std::size_t>(k % per)] + (k / per) * stored_rounds();
  }
  if (k >= size) {
    throw std::out_of_range("GraphSchedule: partition index " + std::to_string(k) +
                            " past the stored partition");
  }
  return partition_[static_cast<std::size_t>(k)];
}

std::optional<std::int64_t> GraphSchedule::partition_size() const {
  if (periodic_) return std::nullopt;
  return static_cast<std::int64_t>(partition_.size());
}

namespace {

bool has_tau(const GraphSchedule& s, std::int64_t k) {
  const auto size = s.partition_size();
  return !size || k < *size;
}

bool union_connected(const GraphSchedule& s, std::int64_t from, std::int64_t to) {
  const int n = s.n();
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (std::int64_t t = from; t < to; ++t) {
    const Matrix& W = s.weights_at(t);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (W(i, j) > 0.0 || W(j, i) > 0.0) parent[static_cast<std::size_t>(find(i))] = find(j);
      }
    }
  }
  const int root = find(0);
  for (int i = 1; i < n; ++i) {
    if (find(i) != root) return false;
  }
  return true;
}

}  // namespace

ValidationReport validate_schedule(const GraphSchedule& s, std::int64_t horizon,
                                   const ValidationOptions& options) {
  ValidationReport report;
  auto add = [&](std::string kind, std::int64_t t, int i, int j, std::string msg) {
    report.violations.push_back({std::move(kind), t, i, j, std::move(msg)});
  };
  const int n = s.n();
  const double delta = s.delta();
  std::int64_t checked = horizon;
  for (std::int64_t t = 0; t < horizon; ++t) {
    if (!s.defined_at(t)) {
      add("horizon", t, -1, -1,
          "schedule defines " + std::to_string(s.stored_rounds()) + " rounds, horizon is " +
              std::to_string(horizon));
      checked = t;
      break;
    }
    const Matrix& W = s.weights_at(t);
    for (int i = 0; i < n; ++i) {
      const double row = W.row(i).sum();
      if (std::abs(row - 1.0) > options.row_sum_tolerance) {
        add("row_sum", t, i, -1, "row sums to " + std::to_string(row));
      }
      if (!(W(i, i) > 0.0)) add("self_loop", t, i, i, "w_ii must be positive");
      for (int j = 0; j < n; ++j) {
        const double w = W(i, j);
        if (w < 0.0) add("negative_weight", t, i, j, "negative weight " + std::to_string(w));
        if (w > 0.0 && w < delta) {
          add("delta_bound", t, i, j,
              "w_ij = " + std::to_string(w) + " < delta = " + std::to_string(delta));
        }
        if (j > i) {
          if ((W(i, j) > 0.0) != (W(j, i) > 0.0)) {
            add("asymmetric_pattern", t, i, j, "w_ij > 0 but w_ji = 0 (or vice versa)");
          } else if (options.strict_symmetric_values &&
                     std::abs(W(i, j) - W(j, i)) > options.row_sum_tolerance) {
            add("value_asymmetry", t, i, j, "w_ij != w_ji");
          }
        }
      }
    }
  }
  for (std::int64_t k = 0; has_tau(s, k) && s.tau(k) < horizon; ++k) {
    if (!has_tau(s, k + 1)) {
      add("partition", k, -1, -1,
          "partition ends at tau_" + std::to_string(k) + " = " + std::to_string(s.tau(k)) +
              " before the horizon " + std::to_string(horizon));
      break;
    }
    const auto start = s.tau(k);
    const auto end = s.tau(k + 1);
    if (end - start > s.L()) {
      add("window_length", k, -1, -1,
          "window " + std::to_string(k) + " has length " + std::to_string(end - start) + " > L = " +
              std::to_string(s.L()));
    }
    if (end <= checked && !union_connected(s, start, end)) {
      add("disconnected_window", k, -1, -1,
          "union graph over rounds [" + std::to_string(start) + ", " + std::to_string(end - 1) +
              "] is not connected");
    }
  }
  return report;
}

bool MeetingCertificate::valid_for(const GraphSchedule& schedule) const {
  if (m2 <= m1) return false;
  if (static_cast<std::int64_t>(sequence.size()) != m2 - m1 + 1) return false;
  if (sequence.front() != i || sequence.back() != j) return false;
  for (std::int64_t s = m1; s < m2; ++s) {
    const int from = sequence[static_cast<std::size_t>(s - m1)];
    const int to = sequence[static_cast<std::size_t>(s - m1 + 1)];
    if (!schedule.adjacent(s, to, from)) return false;
  }
  return true;
}

std::vector<char> reachable_from(const GraphSchedule& schedule, int i, std::int64_t m1,
                                 std::int64_t m2) {
  const int n = schedule.n();
  std::vector<char> reach(static_cast<std::size_t>(n), 0);
  reach[static_cast<std::size_t>(i)] = 1;
  std::vector<char> next(static_cast<std::size_t>(n));
  for (std::int64_t s = m1; s < m2; ++s) {
    const Matrix& W = schedule.weights_at(s);
    for (int q = 0; q < n; ++q) {
      char hit = 0;
      for (int p = 0; p < n && !hit; ++p) hit = reach[static_cast<std::size_t>(p)] && W(q, p) > 0.0;
      next[static_cast<std::size_t>(q)] = hit;
    }
    reach.swap(next);
  }
  return reach;
}

std::optional<MeetingCertificate> meets(const GraphSchedule& schedule, int i, int j,
                                        std::int64_t m1, std::int64_t m2) {
  const int n = schedule.n();
  if (m2 <= m1) throw std::invalid_argument("meets: need m1 < m2");
  if (i < 0 || i >= n || j < 0 || j >= n) throw std::out_of_range("meets: agent out of range");
  const auto steps = static_cast<std::size_t>(m2 - m1);
  // pred[s][q]: agent at step s whose value reaches q at step s + 1.
  std::vector<std::vector<int>> pred(steps, std::vector<int>(static_cast<std::size_t>(n), -1));
  std::vector<char> reach(static_cast<std::size_t>(n), 0);
  reach[static_cast<std::size_t>(i)] = 1;
  std::vector<char> next(static_cast<std::size_t>(n));
  for (std::size_t step = 0; step < steps; ++step) {
    const Matrix& W = schedule.weights_at(m1 + static_cast<std::int64_t>(step));
    for (int q = 0; q < n; ++q) {
      int via = -1;
      if (reach[static_cast<std::size_t>(q)] && W(q, q) > 0.0) {
        via = q;
      } else {
        for (int p = 0; p < n; ++p) {
          if (reach[static_cast<std::size_t>(p)] && W(q, p) > 0.0) {
            via = p;
            break;
          }
        }
      }
      next[static_cast<std::size_t>(q)] = via >= 0;
      pred[step][static_cast<std::size_t>(q)] = via;
    }
    reach.swap(next);
  }
  if (!reach[static_cast<std::size_t>(j)]) return std::nullopt;
  MeetingCertificate cert{i, j, m1, m2, std::vector<int>(steps + 1)};
  cert.sequence[steps] = j;
  for (std::size_t step = steps; step > 0; --step) {
    cert.sequence[step - 1] = pred[step - 1][static_cast<std::size_t>(cert.sequence[step])];
  }
  return cert;
}

MeetingLemmaReport verify_meeting_lemma(const GraphSchedule& schedule, std::int64_t k_max) {
  MeetingLemmaReport report;
  const int n = schedule.n();
  const std::int64_t stride = std::max(1, n - 1);
  report.M_bound = 2LL * schedule.L() * (n - 1);
  if (n < 2) return report;
  auto t_of = [&](std::int64_t k) { return schedule.tau(k * stride); };
  auto available = [&](std::int64_t k) { return has_tau(schedule, k * stride); };
  for (std::int64_t k = 0; k <= k_max; ++k) {
    if (!available(k + 1)) {
      report.notes.push_back("partition too short for k = " + std::to_string(k) +
                             "; needs tau_" + std::to_string((k + 1) * stride));
      break;
    }
    const auto lo = t_of(k);
    const auto hi = t_of(k + 1);
    if (!schedule.defined_at(hi - 1)) {
      report.notes.push_back("schedule undefined on [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
      break;
    }
    for (int i = 0; i < n; ++i) {
      const auto reach = reachable_from(schedule, i, lo, hi);
      for (int j = 0; j < n; ++j) {
        if (!reach[static_cast<std::size_t>(j)]) report.failures.push_back({i, j, k});
      }
    }
    ++report.windows_checked;
    if (k >= 1) report.M = std::max(report.M, hi - t_of(k - 1));
  }
  report.M_ok = report.M <= report.M_bound;
  return report;
}

Matrix leaderless_weights(const Eigen::MatrixXi& adjacency) {
  const auto n = adjacency.rows();
  if (adjacency.cols() != n) throw std::invalid_argument("leaderless_weights: adjacency not square");
  Matrix W = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int degree = 0;
    for (Eigen::Index j = 0; j < n; ++j) degree += (i == j || adjacency(i, j) != 0) ? 1 : 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || adjacency(i, j) != 0) W(i, j) = 1.0 / degree;
    }
  }
  return W;
}

namespace {

GraphSchedule complete_schedule(int n, int L, double delta) {
  if (delta > 1.0 / n) {
    throw std::invalid_argument("complete schedule: delta = " + std::to_string(delta) +
                                " exceeds 1/n = " + std::to_string(1.0 / n));
  }
  std::vector<Matrix> rounds{Matrix::Constant(n, n, 1.0 / n)};
  return GraphSchedule(n, std::move(rounds), {0, 1}, L, delta, true);
}

GraphSchedule ring_schedule(int n, int L, double delta, std::int64_t horizon) {
  if (delta > 0.5) throw std::invalid_argument("ring_rotating: delta must be <= 1/2");
  const int spacing = std::max(1, n - 1);
  if (L < spacing) {
    throw std::invalid_argument("ring_rotating: needs L >= n - 1 = " + std::to_string(spacing));
  }
  std::vector<std::int64_t> partition{0};
  while (partition.back() < horizon) partition.push_back(partition.back() + spacing);
  std::vector<Matrix> rounds;
  for (std::int64_t t = 0; t < partition.back(); ++t) {
    Matrix W = Matrix::Identity(n, n);
    const auto a = static_cast<Eigen::Index>(t % n);
    const auto b = static_cast<Eigen::Index>((t + 1) % n);
    if (a != b) {
      W(a, a) = W(b, b) = 0.5;
      W(a, b) = W(b, a) = 0.5;
    }
    rounds.push_back(std::move(W));
  }
  return GraphSchedule(n, std::move(rounds), std::move(partition), L, delta, false);
}

// Per window: a random spanning tree whose edges are spread over the
// window's rounds, plus random extra edges subject to |N_i| <= 1/delta.
GraphSchedule random_schedule(int n, int L, double delta, std::uint64_t seed, std::int64_t horizon,
                              bool leaderless) {
  const int max_degree = static_cast<int>(std::floor(1.0 / delta + 1e-12));
  if (max_degree < 2) {
    throw std::invalid_argument("random schedule: delta = " + std::to_string(delta) +
                                " leaves no room for a neighbour besides the self-loop");
  }
  constexpr double kExtraEdgeProbability = 0.3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> gap_dist(1, L);

  std::vector<std::int64_t> partition{0};
  std::vector<Matrix> rounds;
  while (partition.back() < horizon) {
    const int gap = gap_dist(rng);
    std::vector<Eigen::MatrixXi> adj(static_cast<std::size_t>(gap), Eigen::MatrixXi::Zero(n, n));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 1; k < n; ++k) {
      std::uniform_int_distribution<int> earlier(0, k - 1);
      const int a = order[static_cast<std::size_t>(k)];
      const int b = order[static_cast<std::size_t>(earlier(rng))];
      std::uniform_int_distribution<int> slot(0, gap - 1);
      auto& A = adj[static_cast<std::size_t>(slot(rng))];
      A(a, b) = A(b, a) = 1;
    }
    for (auto& A : adj) {
      const Eigen::VectorXi deg = A.rowwise().sum().array() + 1;
      for (int i = 0; i < n; ++i) {
        if (deg[i] > max_degree) {
          throw std::invalid_argument("random schedule: delta = " + std::to_string(delta) +
                                      " is too large for the sampled tree degree");
        }
      }
      Eigen::VectorXi d = deg;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (A(i, j) != 0 || unit(rng) >= kExtraEdgeProbability) continue;
          if (d[i] + 1 > max_degree || d[j] + 1 > max_degree) continue;
          A(i, j) = A(j, i) = 1;
          ++d[i];
          ++d[j];
        }
      }
      if (leaderless) {
        rounds.push_back(leaderless_weights(A));
        continue;
      }
      Matrix W = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        const double cap = 1.0 / d[i];
        double off = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i || A(i, j) == 0) continue;
          W(i, j) = delta + unit(rng) * (cap - delta);
          off += W(i, j);
        }
        W(i, i) = 1.0 - off;
      }
      rounds.push_back(std::move(W));
    }
    partition.push_back(partition.back() + gap);
  }
  return GraphSchedule(n, std::move(rounds), std::move(partition), L, delta, false);
}

}  // namespace

GraphSchedule generate_schedule(ScheduleKind kind, int n, int L, double delta, std::uint64_t seed,
                                std::int64_t horizon) {
  if (n < 2) throw std::invalid_argument("generate_schedule: n must be >= 2");
  if (L < 1) throw std::invalid_argument("generate_schedule: L must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("generate_schedule: delta must lie in (0, 1)");
  if (horizon < 1) throw std::invalid_argument("generate_schedule: horizon must be >= 1");
  GraphSchedule out = [&] {
    switch (kind) {
      case ScheduleKind::complete:
        return complete_schedule(n, L, delta);
      case ScheduleKind::ring_rotating:
        return ring_schedule(n, L, delta, horizon);
      case ScheduleKind::random_jointly_connected:
        return random_schedule(n, L, delta, seed, horizon, false);
      case ScheduleKind::leaderless_neighbors:
        return random_schedule(n, L, delta, seed, horizon, true);
    }
    throw std::invalid_argument("generate_schedule: unknown kind");
  }();
  out.set_descriptor({kind, n, L, delta, seed, horizon});
  return out;
}

GraphSchedule generate_schedule(const GeneratorDescriptor& d) {
  return generate_schedule(d.kind, d.n, d.L, d.delta, d.seed, d.horizon);
}

void write_window_edges_csv(const GraphSchedule& s, std::int64_t horizon, std::ostream& out) {
  out << "window,tau_start,tau_end,i,j\n";
  for (std::int64_t k = 0; has_tau(s, k + 1) && s.tau(k) < horizon; ++k) {
    const auto start = s.tau(k);
    const auto end = s.tau(k + 1);
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(s.n(), s.n());
    for (std::int64_t t = start; t < end && s.defined_at(t); ++t) {
      const Matrix& W = s.weights_at(t);
      for (int i = 0; i < s.n(); ++i) {
        for (int j = i + 1; j < s.n(); ++j) {
          if (W(i, j) > 0.0 || W(j, i) > 0.0) seen(i, j) = 1;
        }
      }
    }
    for (int i = 0; i < s.n(); ++i) {
      for (int j = i + 1; j < s.n(); ++j) {
        if (seen(i, j)) out << k << ',' << start << ',' << end - 1 << ',' << i << ',' << j << '\n';
      }
    }
  }
}

}  // namespace wbc
