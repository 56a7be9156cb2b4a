// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#pragma once

#include <cstdint>
#include <string>

#include "ligdoctor/cells.h"
#include "ligdoctor/ehr_data.h"

namespace ligdoctor {

struct GradCheckOptions {
  std::size_t code_width = 5;
  std::size_t hidden = 4;
  std::size_t patients = 2;
  std::size_t steps = 3;
  std::size_t layers = 1;
  CellKind cell = CellKind::kMgru;
  bool bidirectional = true;
  ExtraFeatures extras;
  std::size_t embedding_dim = 0;
  double eps = 1e-5;
  std::uint64_t seed = 7;
  // Negative control: perturbs one analytic gradient coordinate.
  bool corrupt_analytic = false;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

// Central differences at eps = 1e-5 resolve derivatives to about 1e-11
// absolute, so the relative-error denominator is floored here.
inline constexpr double kRelativeErrorFloor = 1e-6;

// |a - n| / max(|a|, |n|, floor) between an analytic and a numerical
// derivative.
double relative_error(double analytic, double numeric, double floor = kRelativeErrorFloor);

// Builds a random batch (patient 0 spans all steps, later patients are
// shorter so masking is exercised), perturbs the initial parameters, and
// compares backward() against central differences of batch_loss for every
// parameter coordinate.
GradCheckResult check_network_gradients(const GradCheckOptions& options);

}  // namespace ligdoctor
