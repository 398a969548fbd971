#pragma once

// Reference computations used as test oracles. None of them call into the
// library's solvers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// W_2 between 1-D Gaussians.
inline double w2_gaussian_1d(double m1, double s1, double m2, double s2) {
  return std::sqrt((m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2));
}

// W_2 between Gaussians using tr((S1^½ S2 S1^½)^½) = Σ sqrt(eig(S1 S2)).
inline double w2_gaussian_eig(const Vector& m1, const Matrix& S1, const Vector& m2,
                              const Matrix& S2) {
  Eigen::EigenSolver<Matrix> es(S1 * S2);
  double cross = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    cross += std::sqrt(std::max(0.0, es.eigenvalues()(k).real()));
  const double w2sq = (m1 - m2).squaredNorm() + S1.trace() + S2.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, w2sq));
}

// Draws from N(m, S) by Cholesky factor; independent of the library sampler.
inline Matrix gaussian_draws(const Vector& m, const Matrix& S, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix L = S.llt().matrixL();
  Matrix out(count, m.size());
  Vector z(m.size());
  for (int k = 0; k < count; ++k) {
    for (Eigen::Index a = 0; a < z.size(); ++a) z(a) = normal(rng);
    out.row(k) = (m + L * z).transpose();
  }
  return out;
}

// Exact 1-D W_p^p by the north-west corner rule on sorted atoms, which is
// optimal for convex costs on the line.
inline double wpp_northwest(std::vector<double> x, std::vector<double> a, std::vector<double> y,
                            std::vector<double> b, double p) {
  auto sort_by = [](std::vector<double>& pts, std::vector<double>& w) {
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return pts[i] < pts[j]; });
    std::vector<double> p2, w2;
    for (auto i : idx) {
      p2.push_back(pts[i]);
      w2.push_back(w[i]);
    }
    pts = p2;
    w = w2;
  };
  sort_by(x, a);
  sort_by(y, b);
  std::size_t i = 0, j = 0;
  double cost = 0.0;
  while (i < x.size() && j < y.size()) {
    const double m = std::min(a[i], b[j]);
    cost += m * std::pow(std::abs(x[i] - y[j]), p);
    a[i] -= m;
    b[j] -= m;
    if (a[i] <= 1e-15) ++i;
    if (b[j] <= 1e-15) ++j;
  }
  return cost;
}

// min Σ γ_ij C_ij over the transport polytope by enumerating every basic
// feasible solution (subsets of m1 + m2 - 1 cells). Small problems only.
inline double transport_vertex_enumeration(const Matrix& C, const Vector& a, const Vector& b) {
  const int m1 = static_cast<int>(a.size());
  const int m2 = static_cast<int>(b.size());
  const int cells = m1 * m2;
  const int basis = m1 + m2 - 1;
  // Marginal equations with the last column constraint dropped (redundant).
  Matrix A = Matrix::Zero(basis, cells);
  Vector rhs(basis);
  for (int i = 0; i < m1; ++i) {
    for (int j = 0; j < m2; ++j) A(i, i * m2 + j) = 1.0;
    rhs(i) = a(i);
  }
  for (int j = 0; j < m2 - 1; ++j) {
    for (int i = 0; i < m1; ++i) A(m1 + j, i * m2 + j) = 1.0;
    rhs(m1 + j) = b(j);
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(basis));
  std::iota(pick.begin(), pick.end(), 0);
  for (;;) {
    Matrix B(basis, basis);
    for (int k = 0; k < basis; ++k) B.col(k) = A.col(pick[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Matrix> lu(B);
    if (lu.rank() == basis) {
      const Vector g = lu.solve(rhs);
      if ((g.array() >= -1e-12).all()) {
        double cost = 0.0;
        for (int k = 0; k < basis; ++k) {
          const int c = pick[static_cast<std::size_t>(k)];
          cost += g(k) * C(c / m2, c % m2);
        }
        best = std::min(best, cost);
      }
    }
    int k = basis - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == cells - basis + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (int r = k + 1; r < basis; ++r)
      pick[static_cast<std::size_t>(r)] = pick[static_cast<std::size_t>(r - 1)] + 1;
  }
  return best;
}

// |x - y|^p cost matrix between atom rows.
inline Matrix cost_matrix(const Matrix& X, const Matrix& Y, double p) {
  Matrix C(X.rows(), Y.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.rows(); ++j)
      C(i, j) = std::pow((X.row(i) - Y.row(j)).norm(), p);
  return C;
}

// x(t+1) = W(t) x(t): classical linear consensus on the rows of X.
inline Matrix vector_consensus_step(const Matrix& W, const Matrix& X) { return W * X; }

// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(int d, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> eig(lo, hi);
  const Matrix G = Matrix::NullaryExpr(d, d, [&] { return normal(rng); });
  const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();
  Vector lambda(d);
  for (int k = 0; k < d; ++k) lambda(k) = eig(rng);
  const Matrix S = Q * lambda.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

inline Vector random_vector(int d, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (int k = 0; k < d; ++k) v(k) = u(rng);
  return v;
}

}  // namespace oracle
