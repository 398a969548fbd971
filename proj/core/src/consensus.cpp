#include "wbc/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "wbc/errors.hpp"
#include "wbc/log.hpp"
#include "wbc/random.hpp"

namespace wbc {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct AgentUpdate {
  Measure measure;
  double jensen = 0.0;
  std::vector<NeighborDisplacement> displacements;
  BarycenterTelemetry telemetry;
};

AgentUpdate update_agent(const ConsensusState& state, const Matrix& W, int i,
                         const SolverConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(state.agents.size());
  std::vector<Measure> measures;
  std::vector<double> weights;
  std::vector<int> neighbors;
  for (int j = 0; j < n; ++j) {
    if (W(i, j) > 0.0) {
      measures.push_back(state.agents[static_cast<std::size_t>(j)]);
      weights.push_back(W(i, j));
      neighbors.push_back(j);
    }
  }

  BarycenterProblem problem(measures, weights);
  BarycenterResult result =
      solve_barycenter(problem, cfg, derive_seed(seed, {static_cast<std::uint64_t>(state.t),
                                                        static_cast<std::uint64_t>(i)}));

  AgentUpdate out{result.measure, 0.0, {}, result.telemetry};
  const double v2_bar = second_moment(out.measure);
  double mixed_v2 = 0.0;
  double mixed_w2 = 0.0;
  for (std::size_t k = 0; k < measures.size(); ++k) {
    const double d = w2(out.measure, measures[k], cfg);
    const double d2 = d * d;
    mixed_v2 += weights[k] * second_moment(measures[k]);
    mixed_w2 += weights[k] * d2;
    out.displacements.push_back({i, neighbors[k], d2});
  }
  out.jensen = v2_bar - mixed_v2 + mixed_w2;
  return out;
}

}  // namespace

void ConsensusState::validate() const {
  if (agents.size() < 2) throw std::invalid_argument("consensus needs at least two agents");
  require_homogeneous(agents);
}

double MetricsRecord::max_jensen_residual() const {
  double best = jensen_residuals.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (double r : jensen_residuals) best = std::max(best, r);
  return best;
}

void StopCriteria::validate() const {
  if (max_rounds < 0) throw std::invalid_argument("max_rounds must be >= 0");
  if (!(diameter_threshold >= 0.0) || !std::isfinite(diameter_threshold))
    throw std::invalid_argument("diameter threshold must be finite and >= 0");
}

StepOutcome step_with_report(const ConsensusState& state, const GraphSchedule& schedule,
                             const SolverConfig& cfg, std::uint64_t seed) {
  state.validate();
  cfg.validate();
  const int n = static_cast<int>(state.agents.size());
  if (schedule.n() != n)
    throw std::invalid_argument("schedule has " + std::to_string(schedule.n()) +
                                " agents, state has " + std::to_string(n));
  const Matrix& W = schedule.weights_at(state.t);

  std::vector<std::optional<AgentUpdate>> updates(static_cast<std::size_t>(n));
  detail::parallel_for(n, cfg.threads, [&](std::int64_t k) {
    const int i = static_cast<int>(k);
    try {
      updates[static_cast<std::size_t>(k)] = update_agent(state, W, i, cfg, seed);
    } catch (const RoundError&) {
      throw;
    } catch (const std::exception& e) {
      throw RoundError(e.what(), state.t, i);
    }
  });

  StepOutcome out;
  out.state.t = state.t + 1;
  out.state.agents.reserve(static_cast<std::size_t>(n));
  for (auto& u : updates) {
    out.state.agents.push_back(u->measure);
    out.jensen_residuals.push_back(u->jensen);
    out.displacements.insert(out.displacements.end(), u->displacements.begin(),
                             u->displacements.end());
    out.telemetry.barycenter_iterations += u->telemetry.iterations;
    out.telemetry.max_residual = std::max(out.telemetry.max_residual, u->telemetry.residual);
    out.telemetry.restarts += u->telemetry.restarts;
  }
  return out;
}

double check_jensen(const std::vector<Measure>& measures, const std::vector<double>& weights,
                    const Measure& bar_out, double k, const SolverConfig& cfg) {
  if (measures.size() != weights.size() || measures.empty())
    throw std::invalid_argument("check_jensen: measures and weights differ in length");
  double v2 = second_moment(bar_out);
  double mixed_v2 = 0.0;
  double mixed_w2 = 0.0;
  for (std::size_t j = 0; j < measures.size(); ++j) {
    const double d = w2(bar_out, measures[j], cfg);
    mixed_v2 += weights[j] * second_moment(measures[j]);
    mixed_w2 += weights[j] * d * d;
  }
  return v2 - mixed_v2 + 0.5 * k * mixed_w2;
}

Matrix pairwise_w2(const std::vector<Measure>& agents, const SolverConfig& cfg) {
  const auto n = static_cast<std::int64_t>(agents.size());
  Matrix D = Matrix::Zero(n, n);
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> values(pairs.size());
  detail::parallel_for(static_cast<std::int64_t>(pairs.size()), cfg.threads, [&](std::int64_t k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    values[static_cast<std::size_t>(k)] =
        w2(agents[static_cast<std::size_t>(i)], agents[static_cast<std::size_t>(j)], cfg);
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    D(pairs[k].first, pairs[k].second) = values[k];
    D(pairs[k].second, pairs[k].first) = values[k];
  }
  return D;
}

double diameter(const ConsensusState& state, const SolverConfig& cfg) {
  const Matrix D = pairwise_w2(state.agents, cfg);
  return D.size() == 0 ? 0.0 : D.maxCoeff();
}

MetricsRecord compute_metrics(const ConsensusState& state, const SolverConfig& cfg) {
  MetricsRecord m;
  m.t = state.t;
  m.v2.reserve(state.agents.size());
  for (const auto& mu : state.agents) m.v2.push_back(second_moment(mu));
  m.v2_max = *std::max_element(m.v2.begin(), m.v2.end());
  m.w2_pairwise = pairwise_w2(state.agents, cfg);
  m.diameter = m.w2_pairwise.maxCoeff();
  m.jensen_residuals.assign(state.agents.size(), 0.0);
  return m;
}

Trace run(const ConsensusState& initial, const GraphSchedule& schedule, const SolverConfig& cfg,
          const StopCriteria& stop, std::uint64_t seed, const TraceObserver& observer) {
  initial.validate();
  cfg.validate();
  stop.validate();

  Trace trace;
  auto record = [&](TraceEntry entry) {
    trace.entries.push_back(std::move(entry));
    if (observer) observer(trace.entries.back());
  };

  record(TraceEntry{initial, compute_metrics(initial, cfg), {}});
  std::int64_t rounds = 0;
  while (true) {
    const MetricsRecord& last = trace.entries.back().metrics;
    if (last.diameter <= stop.diameter_threshold) {
      trace.converged = true;
      break;
    }
    if (rounds >= stop.max_rounds) break;

    StepOutcome out = step_with_report(trace.entries.back().state, schedule, cfg, seed);
    MetricsRecord metrics = compute_metrics(out.state, cfg);
    metrics.jensen_residuals = out.jensen_residuals;
    metrics.solver_telemetry = out.telemetry;
    ++rounds;
    if (log_level() >= LogLevel::debug) {
      log(LogLevel::debug, "round " + std::to_string(metrics.t) + ": diameter " +
                               fmt(metrics.diameter) + ", v2_max " + fmt(metrics.v2_max));
    }
    record(TraceEntry{std::move(out.state), std::move(metrics), std::move(out.displacements)});
  }
  log(LogLevel::info, std::string(trace.converged ? "converged" : "stopped") + " after " +
                          std::to_string(rounds) + " rounds, diameter " +
                          fmt(trace.entries.back().metrics.diameter));
  return trace;
}

Matrix functional_trace(const Trace& trace, const Matrix& Q, const Vector& b, double c) {
  if (Q.rows() != Q.cols() || (Q - Q.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    log(LogLevel::warn, "functional_trace: Q is not symmetric");
    throw std::invalid_argument("functional_trace: Q must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  if (Q.size() > 0 && eig.eigenvalues().minCoeff() < kPsdTolerance) {
    log(LogLevel::warn, "functional_trace: Q is not positive semidefinite; the functional is "
                        "not monotone along consensus");
    throw std::invalid_argument("functional_trace: Q must be positive semidefinite");
  }
  if (trace.entries.empty()) return Matrix(0, 0);
  const auto n = static_cast<Eigen::Index>(trace.entries.front().state.agents.size());
  Matrix out(static_cast<Eigen::Index>(trace.entries.size()), n);
  for (std::size_t r = 0; r < trace.entries.size(); ++r)
    for (Eigen::Index i = 0; i < n; ++i)
      out(static_cast<Eigen::Index>(r), i) = quadratic_functional(
          trace.entries[r].state.agents[static_cast<std::size_t>(i)], Q, b, c);
  return out;
}

ToleranceLadder tolerance_ladder(MeasureKind kind, TransportMethod method) {
  ToleranceLadder tl;
  if (kind == MeasureKind::gaussian) return tl;
  if (method == TransportMethod::sinkhorn) {
    tl.monotone_abs = 1e-9;
    tl.monotone_rel = 0.02;
    tl.jensen_abs = 1e-9;
    tl.jensen_rel = 0.02;
    tl.displacement_abs = 1e-6;
    tl.displacement_rel = 0.02;
    tl.v2_spread_abs = 1e-6;
    tl.v2_spread_rel = 0.02;
  } else {
    tl.monotone_abs = 1e-6;
    tl.jensen_abs = 1e-6;
    tl.jensen_rel = 0.02;
    tl.displacement_abs = 1e-6;
    tl.v2_spread_abs = 1e-6;
  }
  return tl;
}

std::vector<TraceRow> trace_rows(const Trace& trace) {
  std::vector<TraceRow> rows;
  rows.reserve(trace.entries.size());
  for (const auto& e : trace.entries)
    rows.push_back({e.metrics.t, e.metrics.v2, e.metrics.v2_max, e.metrics.diameter,
                    e.metrics.max_jensen_residual()});
  return rows;
}

std::map<std::int64_t, std::vector<Measure>> trace_snapshots(const Trace& trace) {
  std::map<std::int64_t, std::vector<Measure>> out;
  for (const auto& e : trace.entries) out.emplace(e.state.t, e.state.agents);
  return out;
}

TraceCheckReport check_trace(const std::vector<TraceRow>& rows,
                             const std::map<std::int64_t, std::vector<Measure>>& snapshots,
                             const GraphSchedule& schedule, const SolverConfig& cfg,
                             const TraceCheckOptions& options) {
  const ToleranceLadder& tl = options.tolerances;
  TraceCheckReport rep;
  auto fail = [&](std::int64_t t, const std::string& what) {
    rep.violations.push_back("t=" + std::to_string(t) + ": " + what);
  };
  if (rows.empty()) {
    rep.violations.push_back("trace has no rows");
    return rep;
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const TraceRow& row = rows[r];
    ++rep.rows_checked;
    if (row.v2.empty()) {
      fail(row.t, "no V_2 columns");
      continue;
    }
    const double mx = *std::max_element(row.v2.begin(), row.v2.end());
    if (mx != row.v2_max) fail(row.t, "v2_max " + fmt(row.v2_max) + " != max(v2) " + fmt(mx));
    if (!(row.diameter >= 0.0)) fail(row.t, "negative or non-finite diameter");
    if (r > 0) {
      const TraceRow& prev = rows[r - 1];
      if (row.t != prev.t + 1) fail(row.t, "rounds are not consecutive");
      const double allowed = tl.monotone_abs + tl.monotone_rel * std::abs(prev.v2_max);
      if (row.v2_max > prev.v2_max + allowed)
        fail(row.t, "v2_max increased from " + fmt(prev.v2_max) + " to " + fmt(row.v2_max));
      const double jensen_allowed = tl.jensen_abs + tl.jensen_rel * prev.v2_max;
      if (row.max_jensen_residual > jensen_allowed)
        fail(row.t, "Jensen residual " + fmt(row.max_jensen_residual) + " exceeds " +
                        fmt(jensen_allowed));
    }
  }

  const TraceRow& last = rows.back();
  if (last.diameter <= options.diameter_threshold) {
    const auto [lo, hi] = std::minmax_element(last.v2.begin(), last.v2.end());
    // |V_2(mu) - V_2(nu)| <= W_2(mu, nu) (sqrt V_2(mu) + sqrt V_2(nu)).
    const double lipschitz = 2.0 * std::sqrt(std::max(*hi, 0.0)) * last.diameter;
    const double allowed =
        std::max(tl.v2_spread_abs + tl.v2_spread_rel * std::abs(*hi), lipschitz * (1.0 + 1e-9));
    if (*hi - *lo > allowed)
      fail(last.t, "final V_2 spread " + fmt(*hi - *lo) + " exceeds " + fmt(allowed));
  }

  std::map<std::int64_t, const TraceRow*> by_t;
  for (const auto& row : rows) by_t[row.t] = &row;
  const double inv_delta = 1.0 / schedule.delta();
  for (const auto& [t, agents] : snapshots) {
    auto next = snapshots.find(t + 1);
    if (next == snapshots.end()) continue;
    if (!schedule.defined_at(t)) {
      rep.warnings.push_back("t=" + std::to_string(t) + ": schedule undefined, pair skipped");
      continue;
    }
    const auto& after = next->second;
    const int n = static_cast<int>(agents.size());
    if (after.size() != agents.size() || schedule.n() != n) {
      fail(t + 1, "agent count mismatch between snapshots and schedule");
      continue;
    }
    ++rep.snapshot_pairs_checked;
    std::vector<double> v2(agents.size());
    std::vector<double> v2_next(after.size());
    for (int i = 0; i < n; ++i) {
      v2[static_cast<std::size_t>(i)] = second_moment(agents[static_cast<std::size_t>(i)]);
      v2_next[static_cast<std::size_t>(i)] = second_moment(after[static_cast<std::size_t>(i)]);
    }
    for (auto [tt, vals] : {std::pair{t, &v2}, std::pair{t + 1, &v2_next}}) {
      auto it = by_t.find(tt);
      if (it == by_t.end() || it->second->v2.size() != vals->size()) continue;
      for (std::size_t i = 0; i < vals->size(); ++i) {
        const double a = (*vals)[i];
        const double b = it->second->v2[i];
        if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(a)))
          fail(tt, "snapshot V_2 of agent " + std::to_string(i) + " disagrees with trace row");
      }
    }
    double spread_sum = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        spread_sum += std::abs(v2[static_cast<std::size_t>(p)] - v2[static_cast<std::size_t>(q)]);
    const double bound = inv_delta * spread_sum;
    const Matrix& W = schedule.weights_at(t);
    for (int i = 0; i < n; ++i) {
      double mixed_v2 = 0.0;
      double mixed_w2 = 0.0;
      for (int l = 0; l < n; ++l) {
        if (!(W(i, l) > 0.0)) continue;
        const double d = w2(after[static_cast<std::size_t>(i)], agents[static_cast<std::size_t>(l)],
                            cfg);
        const double d2 = d * d;
        mixed_v2 += W(i, l) * v2[static_cast<std::size_t>(l)];
        mixed_w2 += W(i, l) * d2;
        const double allowed = bound + tl.displacement_abs + tl.displacement_rel * bound;
        if (d2 > allowed)
          fail(t + 1, "displacement W_2^2(mu_" + std::to_string(i) + "(t+1), mu_" +
                          std::to_string(l) + "(t)) = " + fmt(d2) + " exceeds bound " +
                          fmt(bound));
      }
      const double residual = v2_next[static_cast<std::size_t>(i)] - mixed_v2 + mixed_w2;
      const double allowed = tl.jensen_abs + tl.jensen_rel * mixed_v2;
      if (residual > allowed)
        fail(t + 1, "recomputed Jensen residual of agent " + std::to_string(i) + " is " +
                        fmt(residual));
    }
  }
  return rep;
}

}  // namespace wbc
