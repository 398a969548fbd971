#include "wbc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "linalg.hpp"
#include "network_simplex.hpp"
#include "transport_internal.hpp"
#include "wbc/errors.hpp"

namespace wbc {

const char* to_string(TransportMethod method) {
  switch (method) {
    case TransportMethod::exact_lp:
      return "exact_lp";
    case TransportMethod::sinkhorn:
      return "sinkhorn";
    case TransportMethod::closed_form:
      return "closed_form";
  }
  return "?";
}

TransportMethod transport_method_from_string(const std::string& name) {
  if (name == "exact_lp") return TransportMethod::exact_lp;
  if (name == "sinkhorn") return TransportMethod::sinkhorn;
  if (name == "closed_form") return TransportMethod::closed_form;
  throw std::invalid_argument("unknown transport method '" + name +
                              "' (expected exact_lp, sinkhorn or closed_form)");
}

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("SolverConfig.") + name + " must be > 0");
  };
  auto at_least_one = [](std::int64_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("SolverConfig.") + name + " must be >= 1");
  };
  positive(sinkhorn_epsilon, "sinkhorn_epsilon");
  positive(sinkhorn_tolerance, "sinkhorn_tolerance");
  positive(fixed_point_tolerance, "fixed_point_tolerance");
  positive(free_support_tolerance, "free_support_tolerance");
  at_least_one(sinkhorn_max_iters, "sinkhorn_max_iters");
  at_least_one(fixed_point_max_iters, "fixed_point_max_iters");
  at_least_one(free_support_max_iters, "free_support_max_iters");
  at_least_one(static_cast<std::int64_t>(max_plan_entries), "max_plan_entries");
  at_least_one(threads, "threads");
  if (support_size < 0) throw std::invalid_argument("SolverConfig.support_size must be >= 0");
}

Matrix TransportPlan::dense() const {
  Matrix out = Matrix::Zero(rows, cols);
  for (const auto& e : entries) out(e.source, e.target) += e.mass;
  return out;
}

Vector TransportPlan::row_sums() const {
  Vector out = Vector::Zero(rows);
  for (const auto& e : entries) out[e.source] += e.mass;
  return out;
}

Vector TransportPlan::col_sums() const {
  Vector out = Vector::Zero(cols);
  for (const auto& e : entries) out[e.target] += e.mass;
  return out;
}

double TransportPlan::min_entry() const {
  double lo = entries.empty() ? 0.0 : entries.front().mass;
  for (const auto& e : entries) lo = std::min(lo, e.mass);
  return lo;
}

double w2_gaussian(const GaussianMeasure& mu, const GaussianMeasure& nu) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("w2_gaussian: dimension mismatch");
  const double sq = (mu.mean() - nu.mean()).squaredNorm() +
                    detail::bures_squared(mu.covariance(), nu.covariance());
  return std::sqrt(std::max(sq, 0.0));
}

namespace detail {

double ground_cost(double squared_distance, double p) {
  if (p == 2.0) return squared_distance;
  if (p == 1.0) return std::sqrt(squared_distance);
  return std::pow(squared_distance, 0.5 * p);
}

Matrix cost_matrix(const Matrix& X, const Matrix& Y, double p) {
  Matrix C(X.rows(), Y.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
      C(i, j) = ground_cost((X.row(i) - Y.row(j)).squaredNorm(), p);
    }
  }
  return C;
}

}  // namespace detail

namespace {

void require_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("transport: p must be >= 1");
}

struct SortedLine {
  std::vector<double> x;
  std::vector<double> w;
};

SortedLine sorted_line(const DiscreteMeasure& m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return m.atoms()(a, 0) < m.atoms()(b, 0);
  });
  SortedLine out;
  for (auto k : order) {
    if (m.weights()[k] <= 0.0) continue;
    out.x.push_back(m.atoms()(k, 0));
    out.w.push_back(m.weights()[k]);
  }
  return out;
}

// Row-major copy of an atom matrix for tight inner loops.
struct Points {
  int n = 0;
  int d = 0;
  std::vector<double> v;
  const double* row(int i) const { return v.data() + static_cast<std::ptrdiff_t>(i) * d; }
};

Points to_points(const Matrix& M) {
  Points P;
  P.n = static_cast<int>(M.rows());
  P.d = static_cast<int>(M.cols());
  P.v.resize(static_cast<std::size_t>(M.size()));
  for (int i = 0; i < P.n; ++i)
    for (int k = 0; k < P.d; ++k) P.v[static_cast<std::size_t>(i) * P.d + k] = M(i, k);
  return P;
}

inline double squared_distance(const double* x, const double* y, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    const double t = x[k] - y[k];
    s += t * t;
  }
  return s;
}

// Coordinates stored column by column so distance loops vectorize.
struct Columns {
  int n = 0;
  int d = 0;
  std::vector<std::vector<double>> c;
};

Columns to_columns(const Matrix& M) {
  Columns C;
  C.n = static_cast<int>(M.rows());
  C.d = static_cast<int>(M.cols());
  C.c.resize(static_cast<std::size_t>(C.d));
  for (int k = 0; k < C.d; ++k) {
    C.c[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(C.n));
    for (int j = 0; j < C.n; ++j) C.c[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = M(j, k);
  }
  return C;
}

// out[j] = |x - Q_j|^2 for every row j of Q.
void row_distances(const double* x, const Columns& Q, double* out) {
  const int n = Q.n;
  const double* c0 = Q.c[0].data();
  const double x0 = x[0];
  for (int j = 0; j < n; ++j) {
    const double t = x0 - c0[j];
    out[j] = t * t;
  }
  for (int k = 1; k < Q.d; ++k) {
    const double* ck = Q.c[static_cast<std::size_t>(k)].data();
    const double xk = x[k];
    for (int j = 0; j < n; ++j) {
      const double t = xk - ck[j];
      out[j] += t * t;
    }
  }
}

// Indices of the k rows of Q closest to each row of P, flattened (n_P x k).
std::vector<int> nearest_rows(const Points& P, const Columns& Q, int k) {
  std::vector<int> out(static_cast<std::size_t>(P.n) * k);
  std::vector<double> dist(static_cast<std::size_t>(Q.n));
  std::vector<double> best_d(static_cast<std::size_t>(k));
  std::vector<int> best_j(static_cast<std::size_t>(k));
  for (int i = 0; i < P.n; ++i) {
    row_distances(P.row(i), Q, dist.data());
    int filled = 0;
    for (int j = 0; j < Q.n; ++j) {
      const double dj = dist[static_cast<std::size_t>(j)];
      if (filled == k && dj >= best_d[static_cast<std::size_t>(k - 1)]) continue;
      int pos = filled < k ? filled++ : k - 1;
      while (pos > 0 && best_d[static_cast<std::size_t>(pos - 1)] > dj) {
        best_d[static_cast<std::size_t>(pos)] = best_d[static_cast<std::size_t>(pos - 1)];
        best_j[static_cast<std::size_t>(pos)] = best_j[static_cast<std::size_t>(pos - 1)];
        --pos;
      }
      best_d[static_cast<std::size_t>(pos)] = dj;
      best_j[static_cast<std::size_t>(pos)] = j;
    }
    for (int q = 0; q < k; ++q)
      out[static_cast<std::size_t>(i) * k + q] = best_j[static_cast<std::size_t>(q)];
  }
  return out;
}

// Image of X under the W_2-optimal affine map between the Gaussians with the
// moments of (X, a) and (Y, b). Falls back to the mean shift when the source
// covariance is singular.
Matrix affine_transport_image(const Matrix& X, const Vector& a, const Matrix& Y, const Vector& b) {
  const Vector mx = X.transpose() * a;
  const Vector my = Y.transpose() * b;
  const Matrix Xc = X.rowwise() - mx.transpose();
  const Matrix Yc = Y.rowwise() - my.transpose();
  const Matrix Sx = detail::symmetrized(Xc.transpose() * a.asDiagonal() * Xc);
  const Matrix Sy = detail::symmetrized(Yc.transpose() * b.asDiagonal() * Yc);
  Matrix T = Matrix::Identity(X.cols(), X.cols());
  try {
    const Matrix inv_root = detail::inverse_sqrt_pd(Sx, 1e-12 * (1.0 + Sx.trace()));
    const Matrix root = matrix_sqrt_psd(Sx);
    T = inv_root * matrix_sqrt_psd(detail::symmetrized(root * Sy * root)) * inv_root;
  } catch (const std::domain_error&) {
  }
  return (Xc * T.transpose()).rowwise() + my.transpose();
}

struct Staircase {
  std::vector<PlanEntry> entries;
  int anchor = 0;
};

// North-west corner rule on atoms sorted by coordinate: m1 + m2 - 1 cells
// forming a path that ends at the largest target (the anchor). On a tie the
// source advances first, so every zero-flow cell (i+1, j) hangs target j below
// source i+1 when the path is rooted at the anchor.
Staircase monotone_staircase(const Matrix& X, const Vector& a, const Matrix& Y, const Vector& b) {
  auto order = [](const Matrix& P) {
    std::vector<int> idx(static_cast<std::size_t>(P.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int l, int r) { return P(l, 0) < P(r, 0); });
    return idx;
  };
  const auto ox = order(X);
  const auto oy = order(Y);
  Staircase s;
  std::size_t i = 0;
  std::size_t j = 0;
  double ra = a[ox[0]];
  double rb = b[oy[0]];
  for (;;) {
    const double f = std::max(std::min(ra, rb), 0.0);
    s.entries.push_back({ox[i], oy[j], f});
    ra -= f;
    rb -= f;
    const bool last_i = i + 1 == ox.size();
    const bool last_j = j + 1 == oy.size();
    if (last_i && last_j) break;
    if (!last_i && (ra <= rb || last_j)) {
      ra = a[ox[++i]];
    } else {
      rb = b[oy[++j]];
    }
  }
  s.anchor = oy.back();
  return s;
}

}  // namespace

double wp_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  require_p(p);
  if (mu.dim() != 1 || nu.dim() != 1) {
    throw std::invalid_argument("wp_1d: both measures must be one-dimensional");
  }
  const auto a = sorted_line(mu);
  const auto b = sorted_line(nu);
  // Walk the merged quantile partition: on each piece both quantile
  // functions are constant.
  std::size_t i = 0;
  std::size_t j = 0;
  double ra = a.w.empty() ? 0.0 : a.w[0];
  double rb = b.w.empty() ? 0.0 : b.w[0];
  double total = 0.0;
  while (i < a.x.size() && j < b.x.size()) {
    const double step = std::min(ra, rb);
    const double gap = std::abs(a.x[i] - b.x[j]);
    total += step * detail::ground_cost(gap * gap, p);
    ra -= step;
    rb -= step;
    if (ra <= 0.0) {
      if (++i < a.x.size()) ra = a.w[i];
    }
    if (rb <= 0.0) {
      if (++j < b.x.size()) rb = b.w[j];
    }
  }
  return std::pow(std::max(total, 0.0), 1.0 / p);
}

TransportResult wp_discrete_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                                  const SolverConfig& cfg) {
  require_p(p);
  if (mu.dim() != nu.dim()) throw std::invalid_argument("wp_discrete_exact: dimension mismatch");
  const auto m1 = mu.size();
  const auto m2 = nu.size();
  if (static_cast<double>(m1) * static_cast<double>(m2) > static_cast<double>(cfg.max_plan_entries)) {
    throw SizeError("wp_discrete_exact: " + std::to_string(m1) + "x" + std::to_string(m2) +
                    " plan exceeds max_plan_entries = " + std::to_string(cfg.max_plan_entries));
  }

  // Zero-weight atoms carry no flow; the simplex needs strictly positive
  // marginals.
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < m1; ++i) {
    if (mu.weights()[i] > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < m2; ++j) {
    if (nu.weights()[j] > 0.0) cols.push_back(j);
  }
  const auto n1 = static_cast<Eigen::Index>(rows.size());
  const auto n2 = static_cast<Eigen::Index>(cols.size());
  Matrix X(n1, mu.dim());
  Matrix Y(n2, nu.dim());
  Vector a(n1);
  Vector b(n2);
  for (Eigen::Index i = 0; i < n1; ++i) {
    X.row(i) = mu.atoms().row(rows[static_cast<std::size_t>(i)]);
    a[i] = mu.weights()[rows[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index j = 0; j < n2; ++j) {
    Y.row(j) = nu.atoms().row(cols[static_cast<std::size_t>(j)]);
    b[j] = nu.weights()[cols[static_cast<std::size_t>(j)]];
  }

  const Points cx = to_points(X);
  const Points cy = to_points(Y);
  auto cost = [&](Eigen::Index i, Eigen::Index j) {
    return detail::ground_cost(
        squared_distance(cx.row(static_cast<int>(i)), cy.row(static_cast<int>(j)), cx.d), p);
  };

  // Bounding-box diameter bounds every cost.
  Matrix both(n1 + n2, mu.dim());
  both << X, Y;
  const double diam2 = (both.colwise().maxCoeff() - both.colwise().minCoeff()).squaredNorm();
  const double max_cost = detail::ground_cost(diam2, p);

  detail::TransportSimplex simplex(a, b, max_cost);
  const std::int64_t pivot_cap = 1'000'000'000;
  std::int64_t pivots = 0;

  constexpr double kDenseArcLimit = 250'000.0;
  if (static_cast<double>(n1) * static_cast<double>(n2) <= kDenseArcLimit) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      for (Eigen::Index j = 0; j < n2; ++j) simplex.add_arc(static_cast<int>(i), static_cast<int>(j), cost(i, j));
    }
    pivots = simplex.solve(pivot_cap);
  } else {
    // Large instances: solve on a sparse candidate set, then price every
    // pair against the basis potentials and add the most violated arcs until
    // none remain. The final scan is an optimality certificate for the full
    // problem. Candidates are nearest neighbours under the affine map between
    // the moment-matched Gaussians, which tracks the optimal plan closely on
    // smooth data.
    const Points& px = cx;
    const Points& py = cy;
    const Matrix Z = affine_transport_image(X, a, Y, b);
    const Points pz = to_points(Z);
    const Columns ycols = to_columns(Y);
    std::vector<std::vector<int>> present(static_cast<std::size_t>(n1));
    // The first kSeed forward neighbours seed the arc set; the rest form a
    // local pool that is priced before falling back to full scans.
    const int k_local = static_cast<int>(std::min<Eigen::Index>(40, n2));
    const int k_seed = std::min(5, k_local);
    const int k_back = static_cast<int>(std::min<Eigen::Index>(5, n1));
    const auto local = nearest_rows(pz, ycols, k_local);
    for (int i = 0; i < px.n; ++i)
      for (int q = 0; q < k_seed; ++q)
        present[static_cast<std::size_t>(i)].push_back(local[static_cast<std::size_t>(i) * k_local + q]);
    const auto back = nearest_rows(py, to_columns(Z), k_back);
    for (int j = 0; j < py.n; ++j)
      for (int q = 0; q < k_back; ++q)
        present[static_cast<std::size_t>(back[static_cast<std::size_t>(j) * k_back + q])].push_back(j);
    // In one dimension the monotone (north-west corner) coupling on sorted
    // atoms is optimal; it becomes the starting basis and the pricing passes
    // below certify it.
    const auto staircase = mu.dim() == 1 ? monotone_staircase(X, a, Y, b) : Staircase{};
    for (const auto& e : staircase.entries)
      present[static_cast<std::size_t>(e.source)].push_back(static_cast<int>(e.target));
    std::vector<std::vector<int>> arc_ids(static_cast<std::size_t>(n1));
    for (int i = 0; i < px.n; ++i) {
      auto& row = present[static_cast<std::size_t>(i)];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      for (int j : row) arc_ids[static_cast<std::size_t>(i)].push_back(simplex.add_arc(i, j, cost(i, j)));
    }
    if (!staircase.entries.empty()) {
      std::vector<int> basis;
      std::vector<double> flows;
      for (const auto& e : staircase.entries) {
        const auto& row = present[static_cast<std::size_t>(e.source)];
        const auto pos = std::lower_bound(row.begin(), row.end(), static_cast<int>(e.target)) - row.begin();
        basis.push_back(arc_ids[static_cast<std::size_t>(e.source)][static_cast<std::size_t>(pos)]);
        flows.push_back(e.mass);
      }
      simplex.warm_start(basis, flows, staircase.anchor);
    }

    constexpr std::size_t kPerRow = 16;
    std::vector<std::pair<double, int>> violators;
    // Adds the most violated of the collected arcs of row i.
    auto admit = [&](int i) -> std::size_t {
      if (violators.empty()) return 0;
      if (violators.size() > kPerRow) {
        std::nth_element(violators.begin(), violators.begin() + (kPerRow - 1), violators.end());
        violators.resize(kPerRow);
      }
      std::size_t added = 0;
      auto& row = present[static_cast<std::size_t>(i)];
      for (const auto& [r, j] : violators) {
        auto it = std::lower_bound(row.begin(), row.end(), j);
        if (it != row.end() && *it == j) continue;
        row.insert(it, j);
        simplex.add_arc(i, j, cost(i, j));
        ++added;
      }
      return added;
    };

    std::vector<double> rc(static_cast<std::size_t>(py.n));
    for (;;) {
      pivots += simplex.solve(pivot_cap);
      const double tol = simplex.tolerance();
      const auto& pot = simplex.potentials();
      std::size_t added = 0;
      for (int i = 0; i < px.n; ++i) {
        violators.clear();
        const double ui = pot[static_cast<std::size_t>(i)];
        for (int q = k_seed; q < k_local; ++q) {
          const int j = local[static_cast<std::size_t>(i) * k_local + q];
          const double r = cost(i, j) + ui - pot[static_cast<std::size_t>(n1 + j)];
          if (r < -tol) violators.emplace_back(r, j);
        }
        added += admit(i);
      }
      if (added > 0) continue;

      for (int i = 0; i < px.n; ++i) {
        violators.clear();
        row_distances(px.row(i), ycols, rc.data());
        const double ui = pot[static_cast<std::size_t>(i)];
        const double* v = pot.data() + n1;
        if (p == 2.0) {
          for (int j = 0; j < py.n; ++j) rc[static_cast<std::size_t>(j)] += ui - v[j];
        } else {
          for (int j = 0; j < py.n; ++j)
            rc[static_cast<std::size_t>(j)] = detail::ground_cost(rc[static_cast<std::size_t>(j)], p) + ui - v[j];
        }
        for (int j = 0; j < py.n; ++j)
          if (rc[static_cast<std::size_t>(j)] < -tol) violators.emplace_back(rc[static_cast<std::size_t>(j)], j);
        added += admit(i);
      }
      if (added == 0) break;
    }
  }

  TransportResult result;
  result.iterations = pivots;
  result.plan.rows = m1;
  result.plan.cols = m2;
  result.plan.p = p;
  double total = 0.0;
  for (auto e : simplex.flows()) {
    total += e.mass * cost(e.source, e.target);
    e.source = rows[static_cast<std::size_t>(e.source)];
    e.target = cols[static_cast<std::size_t>(e.target)];
    result.plan.entries.push_back(e);
  }
  result.plan.cost_p = total;
  result.distance = std::pow(std::max(total, 0.0), 1.0 / p);
  result.marginal_residual =
      std::max((result.plan.row_sums() - mu.weights()).cwiseAbs().maxCoeff(),
               (result.plan.col_sums() - nu.weights()).cwiseAbs().maxCoeff());
  return result;
}

double wasserstein(const Measure& mu, const Measure& nu, double p, const SolverConfig& cfg) {
  require_p(p);
  if (mu.kind() != nu.kind()) throw std::invalid_argument("wasserstein: mixed measure kinds");
  if (mu.dim() != nu.dim()) throw std::invalid_argument("wasserstein: dimension mismatch");
  if (mu.is_gaussian()) {
    if (p != 2.0) throw std::invalid_argument("wasserstein: Gaussian closed form needs p = 2");
    return w2_gaussian(mu.gaussian(), nu.gaussian());
  }
  const auto& a = mu.discrete();
  const auto& b = nu.discrete();
  if (cfg.method == TransportMethod::sinkhorn) {
    if (p != 2.0) throw std::invalid_argument("wasserstein: Sinkhorn estimate is for p = 2");
    return sinkhorn(a, b, cfg).distance;
  }
  if (a.dim() == 1) return wp_1d(a, b, p);
  return wp_discrete_exact(a, b, p, cfg).distance;
}

Measure displacement_interpolate(const Measure& mu, const Measure& nu, double t,
                                 const SolverConfig& cfg) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("displacement_interpolate: t must lie in [0, 1]");
  if (mu.kind() != nu.kind()) throw std::invalid_argument("displacement_interpolate: mixed measure kinds");
  if (mu.dim() != nu.dim()) throw std::invalid_argument("displacement_interpolate: dimension mismatch");
  if (t == 0.0) return mu;
  if (t == 1.0) return nu;
  if (mu.is_gaussian()) {
    const auto& g0 = mu.gaussian();
    const auto& g1 = nu.gaussian();
    Matrix inv_root;
    try {
      inv_root = detail::inverse_sqrt_pd(g0.covariance(), 1e-14);
    } catch (const std::domain_error& e) {
      throw std::domain_error(std::string("displacement_interpolate: source covariance ") + e.what() +
                              "; add a small multiple of the identity (jitter)");
    }
    const Matrix root = matrix_sqrt_psd(g0.covariance());
    const Matrix middle = matrix_sqrt_psd(detail::symmetrized(root * g1.covariance() * root));
    const Matrix T = detail::symmetrized(inv_root * middle * inv_root);
    const auto d = g0.dim();
    const Matrix M = (1.0 - t) * Matrix::Identity(d, d) + t * T;
    return GaussianMeasure((1.0 - t) * g0.mean() + t * g1.mean(),
                           detail::symmetrized(M * g0.covariance() * M));
  }
  const auto& a = mu.discrete();
  const auto& b = nu.discrete();
  const auto plan = wp_discrete_exact(a, b, 2.0, cfg).plan;
  Matrix atoms(static_cast<Eigen::Index>(plan.entries.size()), a.dim());
  Vector w(static_cast<Eigen::Index>(plan.entries.size()));
  for (std::size_t q = 0; q < plan.entries.size(); ++q) {
    const auto& e = plan.entries[q];
    const auto r = static_cast<Eigen::Index>(q);
    atoms.row(r) = (1.0 - t) * a.atoms().row(e.source) + t * b.atoms().row(e.target);
    w[r] = e.mass;
  }
  w /= w.sum();
  return DiscreteMeasure(std::move(atoms), std::move(w)).merged(0.0);
}

}  // namespace wbc
