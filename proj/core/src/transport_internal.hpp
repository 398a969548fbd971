#pragma once

#include "wbc/measures.hpp"

namespace wbc::detail {

// |x - y|^p from |x - y|^2.
double ground_cost(double squared_distance, double p);

// C_ij = |X_i - Y_j|^p.
Matrix cost_matrix(const Matrix& X, const Matrix& Y, double p);

}  // namespace wbc::detail
