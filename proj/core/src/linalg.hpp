#pragma once

#include "wbc/measures.hpp"

namespace wbc::detail {

inline Matrix symmetrized(const Matrix& S) { return 0.5 * (S + S.transpose()); }

// S^{-1/2} for symmetric positive definite S; throws std::domain_error when
// the smallest eigenvalue is <= `floor`.
Matrix inverse_sqrt_pd(const Matrix& S, double floor = 0.0);

// Squared Bures distance between PSD matrices, computed as the Procrustes
// residual min_U ||S1^{1/2} - S2^{1/2} U||_F^2 so that nearby inputs do not
// lose digits to cancellation.
double bures_squared(const Matrix& S1, const Matrix& S2);

}  // namespace wbc::detail
