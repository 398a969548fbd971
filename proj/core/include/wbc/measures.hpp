#pragma once

// Probability measures on R^d: Gaussians (mean, covariance) and finitely
// supported measures (atoms, weights). Values are validated on construction
// and immutable afterwards.

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace wbc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPsdTolerance = -1e-10;
inline constexpr double kWeightSumTolerance = 1e-12;

class GaussianMeasure {
 public:
  // Symmetrizes `covariance` before checking it; throws std::invalid_argument
  // on shape mismatch, non-finite entries, asymmetry above 1e-12 or a
  // smallest eigenvalue below -1e-10.
  GaussianMeasure(Vector mean, Matrix covariance);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

  // Smallest eigenvalue > threshold.
  bool positive_definite(double threshold = 1e-14) const;

  // Exact (bitwise-value) equality; dimension mismatch compares unequal.
  friend bool operator==(const GaussianMeasure& a, const GaussianMeasure& b);

 private:
  Vector mean_;
  Matrix cov_;
};

class DiscreteMeasure {
 public:
  // atoms: m x d, one support point per row. Weights must be nonnegative and
  // sum to one within 1e-12.
  DiscreteMeasure(Matrix atoms, Vector weights);

  // Uniform weights 1/m.
  static DiscreteMeasure uniform(Matrix atoms);
  static DiscreteMeasure dirac(const Vector& point);

  const Matrix& atoms() const { return atoms_; }
  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return atoms_.rows(); }
  Eigen::Index dim() const { return atoms_.cols(); }

  // Mean of the measure, Σ w_k x_k.
  Vector mean() const;

  // Merges atoms whose coordinates agree within `tol` (max-norm) and drops
  // zero-weight atoms. Atom order follows first occurrence.
  DiscreteMeasure merged(double tol = 0.0) const;

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b);

 private:
  Matrix atoms_;
  Vector weights_;
};

enum class MeasureKind { gaussian, discrete };

class Measure {
 public:
  Measure(GaussianMeasure g) : payload_(std::move(g)) {}  // NOLINT(implicit)
  Measure(DiscreteMeasure d) : payload_(std::move(d)) {}  // NOLINT(implicit)

  MeasureKind kind() const {
    return std::holds_alternative<GaussianMeasure>(payload_) ? MeasureKind::gaussian
                                                             : MeasureKind::discrete;
  }
  bool is_gaussian() const { return kind() == MeasureKind::gaussian; }
  bool is_discrete() const { return kind() == MeasureKind::discrete; }

  // Throw std::logic_error on tag mismatch.
  const GaussianMeasure& gaussian() const;
  const DiscreteMeasure& discrete() const;

  Eigen::Index dim() const;
  Vector mean() const;

  template <typename Visitor>
  decltype(auto) visit(Visitor&& v) const {
    return std::visit(std::forward<Visitor>(v), payload_);
  }

  friend bool operator==(const Measure&, const Measure&) = default;

 private:
  std::variant<GaussianMeasure, DiscreteMeasure> payload_;
};

const char* to_string(MeasureKind kind);

// V_2(mu) = ∫|x|^2 dmu, exact in both representations.
double second_moment(const Measure& mu);

// ∫ (xᵀQx + b·x + c) dmu. Q must be symmetric (1e-12).
double quadratic_functional(const Measure& mu, const Matrix& Q, const Vector& b, double c);

// Uniform-weight empirical measure with `count` i.i.d. draws; bit-identical
// for identical (mu, count, seed).
DiscreteMeasure sample(const Measure& mu, Eigen::Index count, std::uint64_t seed);

// Pushforward under x -> A x + v.
Measure push_affine(const Measure& mu, const Matrix& A, const Vector& v);

// Throws std::invalid_argument unless every measure shares the tag and
// dimension of the first one.
void require_homogeneous(const std::vector<Measure>& measures);

}  // namespace wbc
