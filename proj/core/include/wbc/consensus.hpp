#pragma once

// Synchronous barycentric consensus: every round, agent i replaces its
// measure with the W_2 barycenter of its neighbours' measures weighted by
// row i of W(t). All agents read the round-t snapshot.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wbc/barycenter.hpp"
#include "wbc/measures.hpp"
#include "wbc/network.hpp"
#include "wbc/transport.hpp"

namespace wbc {

struct ConsensusState {
  std::int64_t t = 0;
  std::vector<Measure> agents;

  // n >= 2, homogeneous tag and dimension.
  void validate() const;
};

struct SolverTelemetry {
  std::int64_t barycenter_iterations = 0;  // summed over agents
  double max_residual = 0.0;
  std::int64_t restarts = 0;
};

struct NeighborDisplacement {
  int agent;
  int neighbor;
  double w2_squared;  // W_2^2(mu_agent(t+1), mu_neighbor(t))
};

struct MetricsRecord {
  std::int64_t t = 0;
  std::vector<double> v2;
  double v2_max = 0.0;
  Matrix w2_pairwise;
  double diameter = 0.0;
  // Residuals of the barycenters that produced round t (zero at t = 0).
  std::vector<double> jensen_residuals;
  SolverTelemetry solver_telemetry;

  double max_jensen_residual() const;
};

struct StopCriteria {
  std::int64_t max_rounds = 100;
  double diameter_threshold = 0.0;

  void validate() const;
};

struct StepOutcome {
  ConsensusState state;
  std::vector<double> jensen_residuals;
  std::vector<NeighborDisplacement> displacements;
  SolverTelemetry telemetry;
};

// One synchronous round. Failures are rethrown as RoundError carrying the
// round and agent.
StepOutcome step_with_report(const ConsensusState& state, const GraphSchedule& schedule,
                             const SolverConfig& cfg, std::uint64_t seed);

inline ConsensusState step(const ConsensusState& state, const GraphSchedule& schedule,
                           const SolverConfig& cfg, std::uint64_t seed) {
  return step_with_report(state, schedule, cfg, seed).state;
}

// V_2(bar) - Σ lambda_j V_2(mu_j) + (k/2) Σ lambda_j W_2^2(bar, mu_j).
// Nonpositive (up to solver accuracy) at a true barycenter for k <= 2.
double check_jensen(const std::vector<Measure>& measures, const std::vector<double>& weights,
                    const Measure& bar_out, double k, const SolverConfig& cfg);

// Max pairwise W_2 among agents.
double diameter(const ConsensusState& state, const SolverConfig& cfg);

// Pairwise W_2 matrix (symmetric, zero diagonal).
Matrix pairwise_w2(const std::vector<Measure>& agents, const SolverConfig& cfg);

MetricsRecord compute_metrics(const ConsensusState& state, const SolverConfig& cfg);

struct TraceEntry {
  ConsensusState state;
  MetricsRecord metrics;
  // Empty for t = 0.
  std::vector<NeighborDisplacement> displacements;
};

struct Trace {
  std::vector<TraceEntry> entries;
  bool converged = false;
};

using TraceObserver = std::function<void(const TraceEntry&)>;

// Iterates `step` from `initial`, recording metrics every round (including
// round 0). Halts once diameter <= threshold or after max_rounds steps. Each
// entry is passed to `observer` as soon as it exists, so a RoundError thrown
// from a later round leaves the partial trace with the observer.
Trace run(const ConsensusState& initial, const GraphSchedule& schedule, const SolverConfig& cfg,
          const StopCriteria& stop, std::uint64_t seed, const TraceObserver& observer = {});

// V(mu_i(t)) for V(x) = xᵀQx + b·x + c; rows are rounds, columns agents.
// Rejects (std::invalid_argument, plus a warning on the log) a Q that is not
// positive semidefinite.
Matrix functional_trace(const Trace& trace, const Matrix& Q, const Vector& b, double c);

// Tolerances for offline verification, by solver accuracy. Each check
// allows abs + rel * scale, with the scale named per field.
struct ToleranceLadder {
  double monotone_abs = 1e-9;      // scale: v2_max(t)
  double monotone_rel = 0.0;
  double jensen_abs = 1e-8;        // scale: Σ lambda_j V_2(mu_j)
  double jensen_rel = 0.0;
  double displacement_abs = 1e-6;  // scale: the bound itself
  double displacement_rel = 0.0;
  double v2_spread_abs = 1e-6;     // scale: max V_2
  double v2_spread_rel = 0.0;
};

ToleranceLadder tolerance_ladder(MeasureKind kind, TransportMethod method);

// One CSV trace row.
struct TraceRow {
  std::int64_t t = 0;
  std::vector<double> v2;
  double v2_max = 0.0;
  double diameter = 0.0;
  double max_jensen_residual = 0.0;
};

struct TraceCheckReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  std::int64_t rows_checked = 0;
  std::int64_t snapshot_pairs_checked = 0;
  bool ok() const { return violations.empty(); }
};

struct TraceCheckOptions {
  ToleranceLadder tolerances;
  // Diameter threshold the run used; the final-round V_2 spread is only
  // checked when the last row reached it.
  double diameter_threshold = 0.0;
};

// Re-verifies the engine invariants offline: v2_max monotone and equal to
// max(v2), Jensen residuals, diameter >= 0, the final V_2 spread on converged
// runs, and, for consecutive snapshot pairs (t, t+1), the recomputed
// V_2 values, Jensen residuals and the per-step displacement bound.
TraceCheckReport check_trace(const std::vector<TraceRow>& rows,
                             const std::map<std::int64_t, std::vector<Measure>>& snapshots,
                             const GraphSchedule& schedule, const SolverConfig& cfg,
                             const TraceCheckOptions& options);

// Rows and full snapshots of an in-memory trace.
std::vector<TraceRow> trace_rows(const Trace& trace);
std::map<std::int64_t, std::vector<Measure>> trace_snapshots(const Trace& trace);

}  // namespace wbc
