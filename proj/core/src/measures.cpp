#include "wbc/measures.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace wbc {
namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

template <typename A, typename B>
bool same_values(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

GaussianMeasure::GaussianMeasure(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  const auto d = mean_.size();
  if (d < 1) throw std::invalid_argument("GaussianMeasure: dimension must be >= 1");
  if (cov_.rows() != d || cov_.cols() != d) {
    throw std::invalid_argument("GaussianMeasure: covariance must be " + std::to_string(d) + "x" +
                                std::to_string(d));
  }
  if (!mean_.allFinite() || !all_finite(cov_)) {
    throw std::invalid_argument("GaussianMeasure: non-finite entries");
  }
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  // Symmetrization tolerates float round-trip noise relative to the entries.
  if (asym > kSymmetryTolerance * scale) {
    throw std::invalid_argument("GaussianMeasure: covariance is not symmetric (max |S-S^T| = " +
                                std::to_string(asym) + ")");
  }
  cov_ = (0.5 * (cov_ + cov_.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (lo < kPsdTolerance) {
    throw std::invalid_argument("GaussianMeasure: covariance is not PSD (min eigenvalue " +
                                std::to_string(lo) + ")");
  }
}

bool GaussianMeasure::positive_definite(double threshold) const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > threshold;
}

bool operator==(const GaussianMeasure& a, const GaussianMeasure& b) {
  return same_values(a.mean_, b.mean_) && same_values(a.cov_, b.cov_);
}

DiscreteMeasure::DiscreteMeasure(Matrix atoms, Vector weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.rows() < 1 || atoms_.cols() < 1) {
    throw std::invalid_argument("DiscreteMeasure: need at least one atom in dimension >= 1");
  }
  if (weights_.size() != atoms_.rows()) {
    throw std::invalid_argument("DiscreteMeasure: " + std::to_string(weights_.size()) +
                                " weights for " + std::to_string(atoms_.rows()) + " atoms");
  }
  if (!all_finite(atoms_) || !weights_.allFinite()) {
    throw std::invalid_argument("DiscreteMeasure: non-finite entries");
  }
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("DiscreteMeasure: negative weight");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(total));
  }
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix atoms) {
  const auto m = atoms.rows();
  if (m < 1) throw std::invalid_argument("DiscreteMeasure::uniform: no atoms");
  return DiscreteMeasure(std::move(atoms), Vector::Constant(m, 1.0 / static_cast<double>(m)));
}

DiscreteMeasure DiscreteMeasure::dirac(const Vector& point) {
  return DiscreteMeasure(point.transpose(), Vector::Ones(1));
}

Vector DiscreteMeasure::mean() const { return atoms_.transpose() * weights_; }

DiscreteMeasure DiscreteMeasure::merged(double tol) const {
  std::vector<Eigen::Index> keep;
  std::vector<double> mass;
  for (Eigen::Index k = 0; k < size(); ++k) {
    if (weights_[k] <= 0.0) continue;
    bool found = false;
    for (std::size_t q = 0; q < keep.size(); ++q) {
      if ((atoms_.row(keep[q]) - atoms_.row(k)).cwiseAbs().maxCoeff() <= tol) {
        mass[q] += weights_[k];
        found = true;
        break;
      }
    }
    if (!found) {
      keep.push_back(k);
      mass.push_back(weights_[k]);
    }
  }
  if (keep.empty()) return *this;
  Matrix atoms(static_cast<Eigen::Index>(keep.size()), dim());
  Vector w(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) {
    atoms.row(static_cast<Eigen::Index>(q)) = atoms_.row(keep[q]);
    w[static_cast<Eigen::Index>(q)] = mass[q];
  }
  return DiscreteMeasure(std::move(atoms), std::move(w));
}

bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return same_values(a.atoms_, b.atoms_) && same_values(a.weights_, b.weights_);
}

const GaussianMeasure& Measure::gaussian() const {
  if (const auto* g = std::get_if<GaussianMeasure>(&payload_)) return *g;
  throw std::logic_error("Measure: expected a gaussian measure, got discrete");
}

const DiscreteMeasure& Measure::discrete() const {
  if (const auto* d = std::get_if<DiscreteMeasure>(&payload_)) return *d;
  throw std::logic_error("Measure: expected a discrete measure, got gaussian");
}

Eigen::Index Measure::dim() const {
  return visit([](const auto& m) { return m.dim(); });
}

Vector Measure::mean() const {
  return visit([](const auto& m) -> Vector { return m.mean(); });
}

const char* to_string(MeasureKind kind) {
  return kind == MeasureKind::gaussian ? "gaussian" : "discrete";
}

double second_moment(const Measure& mu) {
  if (mu.is_gaussian()) {
    const auto& g = mu.gaussian();
    return g.mean().squaredNorm() + g.covariance().trace();
  }
  const auto& d = mu.discrete();
  return d.weights().dot(d.atoms().rowwise().squaredNorm());
}

double quadratic_functional(const Measure& mu, const Matrix& Q, const Vector& b, double c) {
  const auto d = mu.dim();
  if (Q.rows() != d || Q.cols() != d || b.size() != d) {
    throw std::invalid_argument("quadratic_functional: Q must be dxd and b length d");
  }
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw std::invalid_argument("quadratic_functional: Q is not symmetric");
  }
  if (mu.is_gaussian()) {
    const auto& g = mu.gaussian();
    return (Q * g.covariance()).trace() + g.mean().dot(Q * g.mean()) + b.dot(g.mean()) + c;
  }
  const auto& dm = mu.discrete();
  const Matrix& X = dm.atoms();
  // Row-wise xᵀQx via (XQ).*X.
  const Vector quad = (X * Q).cwiseProduct(X).rowwise().sum();
  return dm.weights().dot(quad + X * b) + c;
}

DiscreteMeasure sample(const Measure& mu, Eigen::Index count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  std::mt19937_64 rng(seed);
  const auto d = mu.dim();
  Matrix atoms(count, d);
  if (mu.is_gaussian()) {
    const auto& g = mu.gaussian();
    // Symmetric square root so that the same seed gives coupled samples for
    // different covariances.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.covariance());
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix S = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(d);
    for (Eigen::Index k = 0; k < count; ++k) {
      for (Eigen::Index a = 0; a < d; ++a) z[a] = normal(rng);
      atoms.row(k) = (g.mean() + S * z).transpose();
    }
  } else {
    const auto& dm = mu.discrete();
    const Vector& w = dm.weights();
    std::discrete_distribution<Eigen::Index> pick(w.data(), w.data() + w.size());
    for (Eigen::Index k = 0; k < count; ++k) atoms.row(k) = dm.atoms().row(pick(rng));
  }
  return DiscreteMeasure::uniform(std::move(atoms));
}

Measure push_affine(const Measure& mu, const Matrix& A, const Vector& v) {
  const auto d = mu.dim();
  if (A.rows() != d || A.cols() != d || v.size() != d) {
    throw std::invalid_argument("push_affine: A must be dxd and v length d");
  }
  if (mu.is_gaussian()) {
    const auto& g = mu.gaussian();
    Matrix cov = A * g.covariance() * A.transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();
    return GaussianMeasure(A * g.mean() + v, std::move(cov));
  }
  const auto& dm = mu.discrete();
  Matrix atoms = (dm.atoms() * A.transpose()).rowwise() + v.transpose();
  return DiscreteMeasure(std::move(atoms), dm.weights());
}

void require_homogeneous(const std::vector<Measure>& measures) {
  if (measures.empty()) throw std::invalid_argument("expected at least one measure");
  const auto kind = measures.front().kind();
  const auto d = measures.front().dim();
  for (std::size_t j = 1; j < measures.size(); ++j) {
    if (measures[j].kind() != kind) {
      throw std::invalid_argument(std::string("mixed measure kinds: ") + to_string(kind) +
                                  " and " + to_string(measures[j].kind()) + " at index " +
                                  std::to_string(j));
    }
    if (measures[j].dim() != d) {
      throw std::invalid_argument("dimension mismatch at index " + std::to_string(j));
    }
  }
}

}  // namespace wbc
