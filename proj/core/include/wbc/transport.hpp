#pragma once

// Wasserstein distances, optimal couplings and displacement interpolation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wbc/measures.hpp"

namespace wbc {

enum class TransportMethod { exact_lp, sinkhorn, closed_form };

const char* to_string(TransportMethod method);
TransportMethod transport_method_from_string(const std::string& name);

struct SolverConfig {
  // Discrete-measure solver. Gaussian pairs always use the closed form;
  // `closed_form` on discrete data selects the exact routes (quantile
  // formula in 1-D, LP otherwise).
  TransportMethod method = TransportMethod::exact_lp;
  double sinkhorn_epsilon = 1e-3;
  std::int64_t sinkhorn_max_iters = 10'000;
  double sinkhorn_tolerance = 1e-8;
  double fixed_point_tolerance = 1e-12;
  std::int64_t fixed_point_max_iters = 1'000;

  // Largest m1*m2 accepted by the exact LP.
  std::size_t max_plan_entries = 1'000'000;

  // Free-support barycenter: atom count (0 = largest input atom count),
  // alternating-minimization cap and relative stopping tolerance.
  std::int64_t support_size = 0;
  std::int64_t free_support_max_iters = 100;
  double free_support_tolerance = 1e-12;

  // Worker threads for per-agent solves and pairwise metrics.
  int threads = 1;

  // Throws std::invalid_argument when a tolerance is <= 0 or a cap < 1.
  void validate() const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct PlanEntry {
  Eigen::Index source;
  Eigen::Index target;
  double mass;
};

// Coupling between an m1-atom source and an m2-atom target, stored as its
// nonzero entries (row-major order). Sinkhorn plans are dense, LP plans are
// basic solutions with at most m1+m2-1 entries.
struct TransportPlan {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<PlanEntry> entries;
  double cost_p = 0.0;  // ∫|x-y|^p dγ
  double p = 2.0;

  Matrix dense() const;
  Vector row_sums() const;
  Vector col_sums() const;
  double min_entry() const;
};

struct TransportResult {
  double distance = 0.0;
  TransportPlan plan;
  std::int64_t iterations = 0;
  double marginal_residual = 0.0;
};

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at
// zero. Rejects non-symmetric input.
Matrix matrix_sqrt_psd(const Matrix& S);

// Bures closed form for W_2 between Gaussians.
double w2_gaussian(const GaussianMeasure& mu, const GaussianMeasure& nu);

// Exact W_p in one dimension by integrating the quantile difference over the
// merged partition of [0, 1].
double wp_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Exact W_p by network simplex on the transportation LP.
TransportResult wp_discrete_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                                  const SolverConfig& cfg = {});

// Debiased Sinkhorn estimate of W_2 with the entropic plan of (mu, nu).
// Throws ConvergenceError when the marginal residual stays above
// cfg.sinkhorn_tolerance after cfg.sinkhorn_max_iters iterations.
TransportResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const SolverConfig& cfg);

// W_p dispatch: Gaussian pairs (p = 2 only) by closed form, discrete pairs by
// the configured method.
double wasserstein(const Measure& mu, const Measure& nu, double p, const SolverConfig& cfg);
inline double w2(const Measure& mu, const Measure& nu, const SolverConfig& cfg) {
  return wasserstein(mu, nu, 2.0, cfg);
}

// McCann interpolant between mu (t = 0) and nu (t = 1). Gaussian mode needs a
// positive definite source covariance; discrete mode interpolates the exact
// W_2 coupling atom by atom.
Measure displacement_interpolate(const Measure& mu, const Measure& nu, double t,
                                 const SolverConfig& cfg = {});

}  // namespace wbc
