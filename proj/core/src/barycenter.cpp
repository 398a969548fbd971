#include "wbc/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "linalg.hpp"
#include "wbc/errors.hpp"
#include "wbc/log.hpp"

namespace wbc {

BarycenterProblem::BarycenterProblem(std::vector<Measure> measures, std::vector<double> weights)
    : measures_(std::move(measures)), weights_(std::move(weights)) {
  if (measures_.empty()) throw std::invalid_argument("BarycenterProblem: no measures");
  if (measures_.size() != weights_.size()) {
    throw std::invalid_argument("BarycenterProblem: " + std::to_string(weights_.size()) +
                                " weights for " + std::to_string(measures_.size()) + " measures");
  }
  require_homogeneous(measures_);
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw std::invalid_argument("BarycenterProblem: weights must be > 0");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw std::invalid_argument("BarycenterProblem: weights sum to " + std::to_string(total));
  }
}

namespace {

// Lexicographic order on (weight, parameters) so that sums and seeded draws
// do not depend on how the caller listed the inputs.
bool lex_less(const double* a, const double* b, Eigen::Index n, int& verdict) {
  for (Eigen::Index k = 0; k < n; ++k) {
    if (a[k] != b[k]) {
      verdict = a[k] < b[k] ? 1 : 0;
      return true;
    }
  }
  return false;
}

std::vector<std::size_t> canonical_order(const BarycenterProblem& problem) {
  std::vector<std::size_t> order(problem.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key_less = [&](std::size_t x, std::size_t y) {
    if (problem.weights()[x] != problem.weights()[y]) {
      return problem.weights()[x] < problem.weights()[y];
    }
    int verdict = 0;
    const auto& mx = problem.measures()[x];
    const auto& my = problem.measures()[y];
    if (mx.is_gaussian()) {
      const auto& gx = mx.gaussian();
      const auto& gy = my.gaussian();
      if (lex_less(gx.mean().data(), gy.mean().data(), gx.dim(), verdict)) return verdict == 1;
      lex_less(gx.covariance().data(), gy.covariance().data(), gx.covariance().size(), verdict);
      return verdict == 1;
    }
    const auto& dx = mx.discrete();
    const auto& dy = my.discrete();
    if (dx.size() != dy.size()) return dx.size() < dy.size();
    if (lex_less(dx.atoms().data(), dy.atoms().data(), dx.atoms().size(), verdict)) {
      return verdict == 1;
    }
    lex_less(dx.weights().data(), dy.weights().data(), dx.size(), verdict);
    return verdict == 1;
  };
  std::stable_sort(order.begin(), order.end(), key_less);
  return order;
}

}  // namespace

BarycenterResult bar_gaussian(const BarycenterProblem& problem, const SolverConfig& cfg) {
  if (problem.kind() != MeasureKind::gaussian) {
    throw std::invalid_argument("bar_gaussian: inputs must be Gaussian");
  }
  const auto d = problem.dim();
  bool any_pd = false;
  for (const auto& m : problem.measures()) any_pd = any_pd || m.gaussian().positive_definite();
  if (!any_pd) {
    throw std::invalid_argument("bar_gaussian: at least one covariance must be positive definite");
  }

  const auto order = canonical_order(problem);
  Vector mean = Vector::Zero(d);
  Matrix S = Matrix::Zero(d, d);
  for (auto j : order) {
    const auto& g = problem.measures()[j].gaussian();
    mean += problem.weights()[j] * g.mean();
    S += problem.weights()[j] * g.covariance();
  }
  S = detail::symmetrized(S);

  BarycenterTelemetry tel;
  for (;;) {
    const Matrix root = matrix_sqrt_psd(S);
    Matrix T = Matrix::Zero(d, d);
    for (auto j : order) {
      const auto& cov = problem.measures()[j].gaussian().covariance();
      T += problem.weights()[j] * matrix_sqrt_psd(detail::symmetrized(root * cov * root));
    }
    T = detail::symmetrized(T);
    tel.residual = (S - T).norm();
    if (tel.residual <= cfg.fixed_point_tolerance * (1.0 + S.norm())) break;
    if (tel.iterations >= cfg.fixed_point_max_iters) {
      throw ConvergenceError("bar_gaussian: fixed point did not converge", tel.residual,
                             tel.iterations);
    }
    // S <- S^{-1/2} T^2 S^{-1/2}; stays in the positive definite cone.
    const Matrix inv_root = detail::inverse_sqrt_pd(S);
    S = detail::symmetrized(inv_root * T * T * inv_root);
    ++tel.iterations;
  }
  return {GaussianMeasure(std::move(mean), std::move(S)), std::move(tel)};
}

DiscreteMeasure bar_1d(const BarycenterProblem& problem) {
  if (problem.kind() != MeasureKind::discrete || problem.dim() != 1) {
    throw std::invalid_argument("bar_1d: inputs must be one-dimensional discrete measures");
  }
  struct Line {
    std::vector<double> x;
    std::vector<double> cum;
  };
  const auto order = canonical_order(problem);
  std::vector<Line> lines;
  std::vector<double> breaks;
  for (auto j : order) {
    const auto& dm = problem.measures()[j].discrete();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(dm.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return dm.atoms()(a, 0) < dm.atoms()(b, 0);
    });
    Line line;
    double acc = 0.0;
    for (auto k : idx) {
      if (dm.weights()[k] <= 0.0) continue;
      acc += dm.weights()[k];
      line.x.push_back(dm.atoms()(k, 0));
      line.cum.push_back(acc);
    }
    line.cum.back() = 1.0;
    breaks.insert(breaks.end(), line.cum.begin(), line.cum.end());
    lines.push_back(std::move(line));
  }
  std::sort(breaks.begin(), breaks.end());
  // Breakpoints closer than rounding noise describe the same quantile level.
  constexpr double kMergeTol = 1e-14;
  std::vector<double> levels;
  for (double u : breaks) {
    if (levels.empty() || u - levels.back() > kMergeTol) {
      levels.push_back(u);
    } else {
      levels.back() = std::max(levels.back(), u);
    }
  }
  levels.back() = 1.0;

  std::vector<double> atoms;
  std::vector<double> weights;
  double prev = 0.0;
  for (double u : levels) {
    const double mid = 0.5 * (prev + u);
    double x = 0.0;
    for (std::size_t j = 0; j < lines.size(); ++j) {
      const auto& line = lines[j];
      auto it = std::lower_bound(line.cum.begin(), line.cum.end(), mid);
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - line.cum.begin()),
                                           line.x.size() - 1);
      x += problem.weights()[order[j]] * line.x[k];
    }
    const double w = u - prev;
    if (!atoms.empty() && atoms.back() == x) {
      weights.back() += w;
    } else {
      atoms.push_back(x);
      weights.push_back(w);
    }
    prev = u;
  }
  Matrix X(static_cast<Eigen::Index>(atoms.size()), 1);
  Vector W(static_cast<Eigen::Index>(atoms.size()));
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    X(static_cast<Eigen::Index>(k), 0) = atoms[k];
    W[static_cast<Eigen::Index>(k)] = weights[k];
  }
  return DiscreteMeasure(std::move(X), std::move(W));
}

namespace {

TransportResult couple(const DiscreteMeasure& support, const DiscreteMeasure& target,
                       const SolverConfig& cfg) {
  if (cfg.method == TransportMethod::sinkhorn) return sinkhorn(support, target, cfg);
  return wp_discrete_exact(support, target, 2.0, cfg);
}

}  // namespace

BarycenterResult bar_free_support(const BarycenterProblem& problem, std::int64_t support_size,
                                  const SolverConfig& cfg, std::uint64_t seed) {
  if (problem.kind() != MeasureKind::discrete) {
    throw std::invalid_argument("bar_free_support: inputs must be discrete");
  }
  if (support_size < 1) throw std::invalid_argument("bar_free_support: support_size must be >= 1");
  const auto d = problem.dim();
  const auto K = static_cast<Eigen::Index>(support_size);

  const auto order = canonical_order(problem);

  // Seeded draw from the mixture Σ lambda_j mu_j.
  std::vector<double> pooled_w;
  std::vector<std::pair<std::size_t, Eigen::Index>> pooled;
  for (auto j : order) {
    const auto& dm = problem.measures()[j].discrete();
    for (Eigen::Index k = 0; k < dm.size(); ++k) {
      pooled_w.push_back(problem.weights()[j] * dm.weights()[k]);
      pooled.emplace_back(j, k);
    }
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(pooled_w.begin(), pooled_w.end());
  Matrix atoms(K, d);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto [j, q] = pooled[pick(rng)];
    atoms.row(k) = problem.measures()[j].discrete().atoms().row(q);
  }

  Vector reseed_point = Vector::Zero(d);
  for (auto j : order) {
    reseed_point += problem.weights()[j] * problem.measures()[j].discrete().mean();
  }

  BarycenterTelemetry tel;
  double previous = std::numeric_limits<double>::infinity();
  for (std::int64_t iter = 0;; ++iter) {
    const auto support = DiscreteMeasure::uniform(atoms);
    Matrix pushed = Matrix::Zero(K, d);
    double objective = 0.0;
    std::vector<Vector> received;
    for (auto j : order) {
      const auto& target = problem.measures()[j].discrete();
      const auto plan = couple(support, target, cfg).plan;
      objective += problem.weights()[j] * plan.cost_p;
      Matrix moved = Matrix::Zero(K, d);
      Vector mass = Vector::Zero(K);
      for (const auto& e : plan.entries) {
        moved.row(e.source) += e.mass * target.atoms().row(e.target);
        mass[e.source] += e.mass;
      }
      for (Eigen::Index k = 0; k < K; ++k) {
        if (mass[k] > 0.0) pushed.row(k) += problem.weights()[j] * moved.row(k) / mass[k];
      }
      received.push_back(std::move(mass));
    }
    tel.objective_history.push_back(objective);
    const double decrease = previous - objective;
    const bool converged =
        iter > 0 && decrease <= cfg.free_support_tolerance * (1.0 + std::abs(objective));
    tel.residual = std::isfinite(decrease) ? decrease : objective;
    previous = objective;

    // Barycentric projection; an atom that some input sends no mass to is
    // re-seeded at the weighted mean of the input means.
    const double empty = 1e-14 / static_cast<double>(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      bool starved = false;
      for (const auto& mass : received) starved = starved || mass[k] <= empty;
      if (starved) {
        atoms.row(k) = reseed_point.transpose();
        ++tel.restarts;
        log(LogLevel::info, "bar_free_support: atom " + std::to_string(k) +
                                " received no mass; re-seeded (restart " +
                                std::to_string(tel.restarts) + ")");
      } else {
        atoms.row(k) = pushed.row(k);
      }
    }
    tel.iterations = iter + 1;
    if (converged || tel.iterations >= cfg.free_support_max_iters) break;
  }
  const double scale = 1.0 + atoms.cwiseAbs().maxCoeff();
  return {DiscreteMeasure::uniform(std::move(atoms)).merged(1e-13 * scale), std::move(tel)};
}

BarycenterResult solve_barycenter(const BarycenterProblem& problem, const SolverConfig& cfg,
                                  std::uint64_t seed) {
  const auto& ms = problem.measures();
  const bool all_same =
      std::all_of(ms.begin() + 1, ms.end(), [&](const Measure& m) { return m == ms.front(); });
  if (all_same) return {ms.front(), {}};
  if (problem.kind() == MeasureKind::gaussian) return bar_gaussian(problem, cfg);
  if (problem.dim() == 1 && cfg.method != TransportMethod::sinkhorn) {
    return {bar_1d(problem), {}};
  }
  std::int64_t k = cfg.support_size;
  if (k == 0) {
    for (const auto& m : ms) k = std::max<std::int64_t>(k, m.discrete().size());
  }
  return bar_free_support(problem, k, cfg, seed);
}

double barycenter_objective(const BarycenterProblem& problem, const Measure& candidate,
                            const SolverConfig& cfg) {
  double total = 0.0;
  for (std::size_t j = 0; j < problem.size(); ++j) {
    const double w = wasserstein(problem.measures()[j], candidate, 2.0, cfg);
    total += problem.weights()[j] * w * w;
  }
  return total;
}

}  // namespace wbc
