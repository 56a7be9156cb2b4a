// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#pragma once

#include <span>

#include "ligdoctor/numerics.h"

namespace ligdoctor {

// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
// before taking logs.
inline constexpr double kProbabilityFloor = 1e-8;

// Binary cross-entropy of one row, summed over codes and negated so that
// a better prediction gives a smaller value:
//   -sum_j (y_j log p_j + (1 - y_j) log(1 - p_j))
double cross_entropy_row(std::span<const double> y, std::span<const double> yhat);

// Mean of cross_entropy_row over the rows whose mask entry is non-zero.
// Returns 0 when no row is unmasked.
double cross_entropy_loss(const Matrix& y, const Matrix& yhat, std::span<const double> mask);

// Gradient of scale * sum over unmasked rows of cross_entropy_row with
// respect to yhat. The clamp has zero derivative where it is active.
Matrix cross_entropy_grad(const Matrix& y, const Matrix& yhat, std::span<const double> mask,
                          double scale);

}  // namespace ligdoctor
