// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/cells.h"

#include <gtest/gtest.h>

#include <cmath>

#include "ligdoctor/gradcheck.h"

namespace ligdoctor {
namespace {

Matrix scalar(double v) { return Matrix(1, 1, v); }

MgruParams scalar_mgru() {
  return {scalar(1.0), scalar(0.0), scalar(0.0), scalar(1.0), scalar(0.0), scalar(0.0)};
}

MgruParams zero_mgru(std::size_t in, std::size_t hid) {
  return {Matrix(in, hid), Matrix(hid, hid), Matrix(1, hid),
          Matrix(in, hid), Matrix(hid, hid), Matrix(1, hid)};
}

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng, double sd = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal(0.0, sd);
  return m;
}

TEST(MgruStep, HandEvaluatedScalar) {
  MgruTrace trace;
  const Matrix h = mgru_step(scalar(0.2), scalar(0.4), scalar_mgru(), &trace);
  EXPECT_NEAR(trace.f(0, 0), 0.549834, 1e-6);
  EXPECT_NEAR(trace.candidate(0, 0), 0.197375, 1e-6);
  // (1 - f) * 0.4 + f * tanh(0.2) evaluated independently.
  const double f = 1.0 / (1.0 + std::exp(-0.2));
  EXPECT_NEAR(h(0, 0), (1.0 - f) * 0.4 + f * std::tanh(0.2), 1e-15);
  EXPECT_NEAR(h(0, 0), 0.2885901, 1e-7);
}

TEST(MgruStep, ZeroWeightsHalveState) {
  Matrix v(2, 3, std::vector<double>{0.3, -0.6, 1.0, 2.0, 0.0, -0.1});
  MgruTrace trace;
  const Matrix h = mgru_step(Matrix(2, 4, 1.0), v, zero_mgru(4, 3), &trace);
  for (double f : trace.f.data()) EXPECT_DOUBLE_EQ(f, 0.5);
  for (double c : trace.candidate.data()) EXPECT_DOUBLE_EQ(c, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(h.data()[i], 0.5 * v.data()[i]);
}

TEST(MgruStep, ZeroStateZeroWeightsStaysZero) {
  const Matrix h = mgru_step(Matrix(2, 4, 0.7), Matrix(2, 3), zero_mgru(4, 3));
  for (double x : h.data()) EXPECT_EQ(x, 0.0);
}

TEST(MgruStep, StateIsConvexCombination) {
  SeededRng rng(21);
  CellParams cp = init_cell(CellKind::kMgru, 5, 4, rng);
  for (auto& b : cp.blocks)
    for (double& v : b.data()) v += rng.normal(0.0, 0.5);
  const MgruParams p = MgruParams::from_cell(cp);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(3, 5, rng);
    const Matrix h_prev = random_matrix(3, 4, rng);
    MgruTrace trace;
    const Matrix h = mgru_step(x, h_prev, p, &trace);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double lo = std::min(h_prev.data()[i], trace.candidate.data()[i]);
      const double hi = std::max(h_prev.data()[i], trace.candidate.data()[i]);
      EXPECT_GE(h.data()[i], lo - 1e-15);
      EXPECT_LE(h.data()[i], hi + 1e-15);
    }
  }
}

TEST(MgruStep, AgreesWithGenericCellStep) {
  SeededRng rng(22);
  const CellParams cp = init_cell(CellKind::kMgru, 3, 2, rng);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix h0 = random_matrix(4, 2, rng);
  const CellState next = cell_step(cp, x, CellState{{h0}});
  EXPECT_EQ(next.h(), mgru_step(x, h0, MgruParams::from_cell(cp)));
}

// Loss used for the cell-level checks: sum of (state parts . fixed weights).
double weighted_sum(const CellState& s, const std::vector<Matrix>& w) {
  double total = 0.0;
  for (std::size_t k = 0; k < s.parts.size(); ++k)
    for (std::size_t i = 0; i < s.parts[k].size(); ++i) total += s.parts[k].data()[i] * w[k].data()[i];
  return total;
}

std::vector<double> flatten(const CellParams& p) {
  std::vector<double> out;
  for (const auto& b : p.blocks) out.insert(out.end(), b.data().begin(), b.data().end());
  return out;
}

void assign(CellParams& p, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& b : p.blocks)
    for (double& v : b.data()) v = flat[off++];
}

class CellGradient : public ::testing::TestWithParam<CellKind> {};

TEST_P(CellGradient, MatchesFiniteDifferences) {
  const CellKind kind = GetParam();
  SeededRng rng(23);
  const std::size_t in = 3, hid = 4, batch = 2;
  CellParams p = init_cell(kind, in, hid, rng);
  for (auto& b : p.blocks)
    for (double& v : b.data()) v += rng.normal(0.0, 0.3);
  const Matrix x = random_matrix(batch, in, rng);
  CellState prev = zero_state(kind, batch, hid);
  for (auto& part : prev.parts)
    for (double& v : part.data()) v = rng.normal(0.0, 0.5);
  std::vector<Matrix> w;
  for (std::size_t k = 0; k < state_part_count(kind); ++k) w.push_back(random_matrix(batch, hid, rng));

  StepTrace trace;
  cell_step(p, x, prev, &trace);
  CellParams grads = zeros_like(p);
  const StepGradients g = cell_backward(p, trace, CellState{w}, grads);

  const auto analytic = flatten(grads);
  const auto theta = flatten(p);
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> t) {
        CellParams q = p;
        assign(q, t);
        return weighted_sum(cell_step(q, x, prev), w);
      },
      theta, 1e-6);
  ASSERT_EQ(analytic.size(), numeric.size());
  ASSERT_EQ(analytic.size(), param_count(kind, in, hid));
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    EXPECT_LE(relative_error(analytic[i], numeric[i]), 1e-5) << to_string(kind) << " param " << i;
  }

  const auto dx_num = finite_diff_grad(
      [&](std::span<const double> t) {
        Matrix xx(batch, in, std::vector<double>(t.begin(), t.end()));
        return weighted_sum(cell_step(p, xx, prev), w);
      },
      x.data(), 1e-6);
  for (std::size_t i = 0; i < dx_num.size(); ++i) {
    EXPECT_LE(relative_error(g.dx.data()[i], dx_num[i]), 1e-5) << to_string(kind) << " dx " << i;
  }
  for (std::size_t k = 0; k < prev.parts.size(); ++k) {
    const auto dprev_num = finite_diff_grad(
        [&](std::span<const double> t) {
          CellState s = prev;
          s.parts[k] = Matrix(batch, hid, std::vector<double>(t.begin(), t.end()));
          return weighted_sum(cell_step(p, x, s), w);
        },
        prev.parts[k].data(), 1e-6);
    for (std::size_t i = 0; i < dprev_num.size(); ++i) {
      EXPECT_LE(relative_error(g.dprev.parts[k].data()[i], dprev_num[i]), 1e-5)
          << to_string(kind) << " dprev part " << k << " " << i;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, CellGradient, ::testing::ValuesIn(kAllCellKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(MgruBackward, ZeroUpstreamGivesZeroGradients) {
  SeededRng rng(24);
  const MgruParams p = MgruParams::from_cell(init_cell(CellKind::kMgru, 3, 2, rng));
  MgruTrace trace;
  mgru_step(random_matrix(2, 3, rng), random_matrix(2, 2, rng), p, &trace);
  const MgruGradients g = mgru_backward(trace, Matrix(2, 2), p);
  EXPECT_EQ(max_abs(g.dx), 0.0);
  EXPECT_EQ(max_abs(g.dh_prev), 0.0);
  for (const auto& b : g.dparams.to_cell().blocks) EXPECT_EQ(max_abs(b), 0.0);
}

TEST(MgruBackward, ScalarCaseMatchesFiniteDifferences) {
  const MgruParams p = scalar_mgru();
  MgruTrace trace;
  mgru_step(scalar(0.2), scalar(0.4), p, &trace);
  const MgruGradients g = mgru_backward(trace, scalar(1.0), p);
  const auto analytic = flatten(g.dparams.to_cell());
  const CellParams cp = p.to_cell();
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> t) {
        CellParams q = cp;
        assign(q, t);
        return mgru_step(scalar(0.2), scalar(0.4), MgruParams::from_cell(q))(0, 0);
      },
      flatten(cp), 1e-6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_LE(relative_error(analytic[i], numeric[i]), 1e-5) << i;
}

TEST(MgruBackward, LinearInUpstream) {
  SeededRng rng(25);
  const MgruParams p = MgruParams::from_cell(init_cell(CellKind::kMgru, 3, 2, rng));
  MgruTrace trace;
  mgru_step(random_matrix(2, 3, rng), random_matrix(2, 2, rng), p, &trace);
  const Matrix dh = random_matrix(2, 2, rng);
  const MgruGradients g1 = mgru_backward(trace, dh, p);
  const MgruGradients g2 = mgru_backward(trace, dh * 2.0, p);
  const auto a = flatten(g1.dparams.to_cell());
  const auto b = flatten(g2.dparams.to_cell());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.0 * a[i], 1e-14);
  for (std::size_t i = 0; i < g1.dx.size(); ++i) EXPECT_NEAR(g2.dx.data()[i], 2.0 * g1.dx.data()[i], 1e-14);
}

TEST(Feedforward, ZeroParamsGiveZeroState) {
  CellParams p;
  p.kind = CellKind::kFeedforward;
  p.in = 3;
  p.hid = 2;
  p.blocks = {Matrix(3, 2), Matrix(1, 2)};
  const CellState s = cell_step(p, Matrix(2, 3, 1.5), zero_state(CellKind::kFeedforward, 2, 2));
  EXPECT_EQ(max_abs(s.h()), 0.0);
}

TEST(ParamCount, ClosedForms) {
  const std::size_t d = 7, n = 5;
  EXPECT_EQ(param_count(CellKind::kMgru, d, n), 2 * (d * n + n * n + n));
  EXPECT_EQ(param_count(CellKind::kGru, d, n), 3 * (d * n + n * n + n));
  EXPECT_EQ(param_count(CellKind::kLstm, d, n), 4 * (d * n + n * n + n));
  EXPECT_EQ(param_count(CellKind::kMgru, 1, 1), 6u);
}

TEST(ParamCount, OrderingAtDiagnosisScale) {
  const std::size_t d = 271, n = 271;
  EXPECT_LT(param_count(CellKind::kJordan, d, n), param_count(CellKind::kMgru, d, n));
  EXPECT_LT(param_count(CellKind::kMgru, d, n), param_count(CellKind::kGru, d, n));
  EXPECT_LT(param_count(CellKind::kGru, d, n), param_count(CellKind::kLstm, d, n));
  EXPECT_LE(param_count(CellKind::kLstm, d, n), param_count(CellKind::kLstmGoogle, d, n));
}

TEST(ParamCount, MatchesInitializedBlocks) {
  SeededRng rng(26);
  for (CellKind kind : kAllCellKinds) {
    const CellParams p = init_cell(kind, 6, 3, rng);
    EXPECT_EQ(p.scalar_count(), param_count(kind, 6, 3)) << to_string(kind);
    EXPECT_EQ(p.blocks.size(), block_names(kind).size());
    EXPECT_EQ(parse_cell_kind(to_string(kind)), kind);
  }
}

TEST(InitCell, RecurrentBlocksStartAsIdentity) {
  SeededRng rng(27);
  const MgruParams p = MgruParams::from_cell(init_cell(CellKind::kMgru, 4, 3, rng));
  EXPECT_EQ(p.uf, init_identity(3));
  EXPECT_EQ(p.uh, init_identity(3));
  EXPECT_EQ(max_abs(p.bf), 0.0);
}

}  // namespace
}  // namespace ligdoctor
