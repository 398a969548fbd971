#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "transport_internal.hpp"
#include "wbc/errors.hpp"
#include "wbc/transport.hpp"

namespace wbc {
namespace {

struct EntropicSolution {
  Vector f;
  Vector g;
  double value = 0.0;  // <a, f> + <b, g>
  std::int64_t iterations = 0;
  double residual = 0.0;
};

// -eps * log Σ_k exp(log w_k + (h_k - c_k) / eps), stabilized by the max term.
double soft_min(const double* cost, const Vector& log_w, const Vector& h, double eps) {
  const auto n = h.size();
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) top = std::max(top, log_w[k] + (h[k] - cost[k]) / eps);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) sum += std::exp(log_w[k] + (h[k] - cost[k]) / eps - top);
  return -eps * (top + std::log(sum));
}

// L1 marginal violation (rows plus columns) of the plan induced by (f, g).
double marginal_violation(const Matrix& C, const Vector& a, const Vector& b, const Vector& f,
                          const Vector& g, double eps) {
  double total = 0.0;
  Vector cols = Vector::Zero(b.size());
  for (Eigen::Index j = 0; j < C.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      col += a[i] * std::exp((f[i] + g[j] - C(i, j)) / eps);
    cols[j] = b[j] * col;
  }
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < C.cols(); ++j) row += b[j] * std::exp((f[i] + g[j] - C(i, j)) / eps);
    total += std::abs(a[i] * row - a[i]);
  }
  return total + (cols - b).cwiseAbs().sum();
}

std::vector<double> annealing_schedule(const Matrix& C, double eps) {
  std::vector<double> schedule;
  for (double e = std::max(C.maxCoeff(), eps); e > eps; e *= 0.5) schedule.push_back(e);
  schedule.push_back(eps);
  return schedule;
}

constexpr std::int64_t kStageIters = 50;
constexpr double kStageTarget = 1e-3;
constexpr double kOverRelaxation = 1.8;
constexpr double kDivergenceFactor = 10.0;
constexpr std::int64_t kNewtonAfter = 200;
constexpr Eigen::Index kNewtonMaxSize = 1200;

// One damped Newton step on the concave dual
// <a,f> + <b,g> - eps Σ a_i b_j exp((f_i + g_j - C_ij) / eps), with g fixed at
// its last coordinate to remove the additive gauge. The step is halved until
// the marginal violation decreases. Returns false when no decrease is found.
bool newton_step(const Matrix& C, const Vector& a, const Vector& b, double eps, Vector& f,
                 Vector& g, double& residual) {
  const Eigen::Index m = a.size();
  const Eigen::Index n = b.size();
  Matrix P(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) P(i, j) = a[i] * b[j] * std::exp((f[i] + g[j] - C(i, j)) / eps);
  const Vector r = P.rowwise().sum();
  const Vector c = P.colwise().sum().transpose();

  const Eigen::Index k = m + n - 1;
  Matrix H = Matrix::Zero(k, k);
  Vector grad(k);
  H.topLeftCorner(m, m).diagonal() = r;
  H.topRightCorner(m, n - 1) = P.leftCols(n - 1);
  H.bottomLeftCorner(n - 1, m) = P.leftCols(n - 1).transpose();
  H.bottomRightCorner(n - 1, n - 1).diagonal() = c.head(n - 1);
  H /= eps;
  H.diagonal().array() += 1e-14 * H.diagonal().maxCoeff();
  grad.head(m) = a - r;
  grad.tail(n - 1) = (b - c).head(n - 1);
  const Vector step = H.ldlt().solve(grad);
  if (!step.allFinite()) return false;

  for (double t = 1.0; t > 1e-6; t *= 0.5) {
    Vector f2 = f + t * step.head(m);
    Vector g2 = g;
    g2.head(n - 1) += t * step.tail(n - 1);
    const double r2 = marginal_violation(C, a, b, f2, g2, eps);
    if (r2 < residual) {
      f = std::move(f2);
      g = std::move(g2);
      residual = r2;
      return true;
    }
  }
  return false;
}

// Log-domain Sinkhorn with geometric epsilon annealing from the cost scale
// down to `eps`, warm-starting each stage from the previous potentials. The
// final stage uses over-relaxed updates and drops back to plain sweeps if the
// violation grows well past its best value. When sweeps stall on a small
// problem, damped Newton steps on the dual finish the stage.
EntropicSolution entropic_ot(const Vector& a, const Vector& b, const Matrix& C, double eps,
                             const SolverConfig& cfg) {
  const Matrix Ct = C.transpose();
  const Vector log_a = a.array().log().matrix();
  const Vector log_b = b.array().log().matrix();
  EntropicSolution s;
  s.f = Vector::Zero(a.size());
  s.g = Vector::Zero(b.size());

  auto sweep = [&](double e, double omega) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      s.f[i] = (1.0 - omega) * s.f[i] + omega * soft_min(Ct.col(i).data(), log_b, s.g, e);
    for (Eigen::Index j = 0; j < b.size(); ++j)
      s.g[j] = (1.0 - omega) * s.g[j] + omega * soft_min(C.col(j).data(), log_a, s.f, e);
  };

  const auto schedule = annealing_schedule(C, eps);
  constexpr std::int64_t kCheckEvery = 10;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double e = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const double target = last ? cfg.sinkhorn_tolerance : std::max(cfg.sinkhorn_tolerance, kStageTarget);
    double omega = last ? kOverRelaxation : 1.0;
    double best = std::numeric_limits<double>::infinity();
    bool newton = last && a.size() + b.size() <= kNewtonMaxSize && b.size() > 1;
    for (std::int64_t local = 1;; ++local) {
      if (s.iterations >= cfg.sinkhorn_max_iters) {
        s.residual = marginal_violation(C, a, b, s.f, s.g, e);
        if (s.residual <= target) break;
        throw ConvergenceError("sinkhorn: marginal tolerance not reached", s.residual,
                               s.iterations);
      }
      if (newton && local > kNewtonAfter) {
        if (!newton_step(C, a, b, e, s.f, s.g, s.residual)) newton = false;
        ++s.iterations;
        if (s.residual <= target) break;
        continue;
      }
      sweep(e, omega);
      ++s.iterations;
      if (!last && local >= kStageIters) break;
      if (local % kCheckEvery == 0) {
        s.residual = marginal_violation(C, a, b, s.f, s.g, e);
        if (s.residual <= target) break;
        if (s.residual > kDivergenceFactor * best) omega = 1.0;
        best = std::min(best, s.residual);
      }
    }
  }
  s.residual = marginal_violation(C, a, b, s.f, s.g, eps);
  s.value = a.dot(s.f) + b.dot(s.g);
  return s;
}

// Self-transport OT(a, a): symmetric potential f with plan
// a_i a_j exp((f_i + f_j - C_ij) / eps). Uses the averaged update
// f <- (f + T(f)) / 2, which avoids the slow oscillation of alternating
// sweeps on symmetric problems.
EntropicSolution entropic_self(const Vector& a, const Matrix& C, double eps,
                               const SolverConfig& cfg) {
  const Vector log_a = a.array().log().matrix();
  EntropicSolution s;
  s.f = Vector::Zero(a.size());
  Vector next(a.size());

  const auto schedule = annealing_schedule(C, eps);
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double e = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const double target = last ? cfg.sinkhorn_tolerance : std::max(cfg.sinkhorn_tolerance, kStageTarget);
    for (std::int64_t local = 1;; ++local) {
      if (s.iterations >= cfg.sinkhorn_max_iters) {
        s.residual = marginal_violation(C, a, a, s.f, s.f, e);
        if (s.residual <= target) break;
        throw ConvergenceError("sinkhorn: marginal tolerance not reached", s.residual,
                               s.iterations);
      }
      for (Eigen::Index i = 0; i < a.size(); ++i)
        next[i] = 0.5 * (s.f[i] + soft_min(C.col(i).data(), log_a, s.f, e));
      s.f = next;
      ++s.iterations;
      s.residual = marginal_violation(C, a, a, s.f, s.f, e);
      if (s.residual <= target || (!last && local >= kStageIters)) break;
    }
  }
  s.g = s.f;
  s.residual = marginal_violation(C, a, a, s.f, s.f, eps);
  s.value = 2.0 * a.dot(s.f);
  return s;
}

}  // namespace

TransportResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const SolverConfig& cfg) {
  cfg.validate();
  if (mu.dim() != nu.dim()) throw std::invalid_argument("sinkhorn: dimension mismatch");

  // Drop zero-weight atoms (log-domain needs positive weights).
  auto compact = [](const DiscreteMeasure& m, std::vector<Eigen::Index>& keep) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      if (m.weights()[k] > 0.0) keep.push_back(k);
    }
    Matrix X(static_cast<Eigen::Index>(keep.size()), m.dim());
    Vector w(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t q = 0; q < keep.size(); ++q) {
      X.row(static_cast<Eigen::Index>(q)) = m.atoms().row(keep[q]);
      w[static_cast<Eigen::Index>(q)] = m.weights()[keep[q]];
    }
    return std::pair{X, w};
  };
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  const auto [X, a] = compact(mu, rows);
  const auto [Y, b] = compact(nu, cols);

  // Costs are normalized by the squared diameter of the joint bounding box,
  // so epsilon is relative to unit-scale data.
  Matrix both(X.rows() + Y.rows(), X.cols());
  both << X, Y;
  double scale2 = (both.colwise().maxCoeff() - both.colwise().minCoeff()).squaredNorm();
  if (!(scale2 > 0.0)) scale2 = 1.0;

  const Matrix Cxy = detail::cost_matrix(X, Y, 2.0) / scale2;
  const Matrix Cxx = detail::cost_matrix(X, X, 2.0) / scale2;
  const Matrix Cyy = detail::cost_matrix(Y, Y, 2.0) / scale2;
  const double eps = cfg.sinkhorn_epsilon;

  const auto xy = entropic_ot(a, b, Cxy, eps, cfg);
  const auto xx = entropic_self(a, Cxx, eps, cfg);
  const auto yy = entropic_self(b, Cyy, eps, cfg);
  const double divergence = xy.value - 0.5 * xx.value - 0.5 * yy.value;

  TransportResult out;
  out.distance = std::sqrt(std::max(divergence, 0.0) * scale2);
  out.iterations = std::max({xy.iterations, xx.iterations, yy.iterations});
  out.marginal_residual = xy.residual;
  out.plan.rows = mu.size();
  out.plan.cols = nu.size();
  out.plan.p = 2.0;
  double cost = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      const double mass = a[i] * b[j] * std::exp((xy.f[i] + xy.g[j] - Cxy(i, j)) / eps);
      if (mass <= 0.0) continue;
      out.plan.entries.push_back({rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], mass});
      cost += mass * Cxy(i, j) * scale2;
    }
  }
  out.plan.cost_p = cost;
  return out;
}

}  // namespace wbc
