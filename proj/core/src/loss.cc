// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/loss.h"

#include <algorithm>
#include <cmath>

namespace ligdoctor {

namespace {

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

void check(const Matrix& y, const Matrix& yhat, std::span<const double> mask) {
  if (!y.same_shape(yhat)) throw ShapeError("cross entropy: target/prediction shape mismatch");
  if (mask.size() != y.rows()) throw ShapeError("cross entropy: mask length mismatch");
}

}  // namespace

double cross_entropy_row(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw ShapeError("cross_entropy_row: length mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double p = clamp_probability(yhat[j]);
    acc += y[j] * std::log(p) + (1.0 - y[j]) * std::log(1.0 - p);
  }
  return -acc;
}

double cross_entropy_loss(const Matrix& y, const Matrix& yhat, std::span<const double> mask) {
  check(y, yhat, mask);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    if (mask[i] == 0.0) continue;
    total += cross_entropy_row(y.row(i), yhat.row(i));
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Matrix cross_entropy_grad(const Matrix& y, const Matrix& yhat, std::span<const double> mask,
                          double scale) {
  check(y, yhat, mask);
  Matrix g(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    if (mask[i] == 0.0) continue;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const double raw = yhat(i, j);
      if (raw < kProbabilityFloor || raw > 1.0 - kProbabilityFloor) continue;
      g(i, j) = -scale * (y(i, j) / raw - (1.0 - y(i, j)) / (1.0 - raw));
    }
  }
  return g;
}

}  // namespace ligdoctor
