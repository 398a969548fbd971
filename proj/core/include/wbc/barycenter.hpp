#pragma once

// Weighted W_2 barycenters bar({(mu_j, lambda_j)}) = argmin_nu Σ lambda_j W_2^2(mu_j, nu).

#include <cstdint>
#include <vector>

#include "wbc/measures.hpp"
#include "wbc/transport.hpp"

namespace wbc {

class BarycenterProblem {
 public:
  // Nonempty, homogeneous (tag and dimension), weights > 0 summing to one
  // within 1e-12. Throws std::invalid_argument otherwise.
  BarycenterProblem(std::vector<Measure> measures, std::vector<double> weights);

  const std::vector<Measure>& measures() const { return measures_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return measures_.size(); }
  MeasureKind kind() const { return measures_.front().kind(); }
  Eigen::Index dim() const { return measures_.front().dim(); }

 private:
  std::vector<Measure> measures_;
  std::vector<double> weights_;
};

struct BarycenterTelemetry {
  std::int64_t iterations = 0;
  double residual = 0.0;       // fixed-point residual (Gaussian) or last relative decrease
  std::int64_t restarts = 0;   // free-support atoms re-seeded after receiving no mass
  std::vector<double> objective_history;  // free support: objective per sweep
};

struct BarycenterResult {
  Measure measure;
  BarycenterTelemetry telemetry;
};

// Fixed-point iteration on the covariance; mean is Σ lambda_j m_j. Needs at
// least one positive definite covariance. Throws ConvergenceError after
// cfg.fixed_point_max_iters.
BarycenterResult bar_gaussian(const BarycenterProblem& problem, const SolverConfig& cfg = {});

// Exact one-dimensional barycenter by averaging quantile functions.
DiscreteMeasure bar_1d(const BarycenterProblem& problem);

// Alternating minimization over uniform measures on `support_size` atoms:
// couplings by the configured solver, then barycentric projection of the
// atoms. Initial atoms are drawn from the weighted inputs with `seed`.
BarycenterResult bar_free_support(const BarycenterProblem& problem, std::int64_t support_size,
                                  const SolverConfig& cfg, std::uint64_t seed);

// Dispatch: singleton or all-identical inputs are returned unchanged;
// Gaussian -> bar_gaussian; discrete 1-D with an exact method -> bar_1d;
// other discrete -> bar_free_support with cfg.support_size (0 = largest
// input atom count).
BarycenterResult solve_barycenter(const BarycenterProblem& problem, const SolverConfig& cfg,
                                  std::uint64_t seed);

inline Measure bar(const BarycenterProblem& problem, const SolverConfig& cfg, std::uint64_t seed) {
  return solve_barycenter(problem, cfg, seed).measure;
}

// Σ lambda_j W_2^2(mu_j, candidate) with the configured solvers.
double barycenter_objective(const BarycenterProblem& problem, const Measure& candidate,
                            const SolverConfig& cfg);

}  // namespace wbc
