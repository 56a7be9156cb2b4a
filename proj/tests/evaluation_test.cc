// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/evaluation.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ligdoctor/error.h"
#include "ligdoctor/synth.h"

namespace ligdoctor {
namespace {

// Brute-force reference: rank every index by (score desc, index asc).
double reference_recall(const std::vector<double>& y, const std::vector<std::size_t>& target,
                        std::size_t k) {
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return y[a] != y[b] ? y[a] > y[b] : a < b;
  });
  const std::set<std::size_t> top(idx.begin(), idx.begin() + k);
  const std::set<std::size_t> truth(target.begin(), target.end());
  std::size_t hit = 0;
  for (std::size_t t : truth) hit += top.count(t);
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

TEST(Recall, AllTargetsInTopK) {
  std::vector<double> y(20, 0.0);
  y[1] = y[2] = y[3] = 1.0;
  const std::vector<std::size_t> t = {1, 2, 3};
  EXPECT_EQ(recall_at_k(y, t, 10), 1.0);
}

TEST(Recall, PartialHit) {
  std::vector<double> y(10, 0.0);
  y[1] = 0.9;
  y[9] = 0.8;
  const std::vector<std::size_t> t = {1, 2, 3, 4};
  EXPECT_EQ(recall_at_k(y, t, 2), 0.25);
}

TEST(Recall, DuplicateTargetsCountOnce) {
  const std::vector<double> y = {0.5, 0.3, 0.2};
  const std::vector<std::size_t> t = {0, 0, 2};
  EXPECT_EQ(recall_at_k(y, t, 1), 0.5);
}

TEST(Recall, BadArguments) {
  const std::vector<double> y = {0.5, 0.5};
  const std::vector<std::size_t> empty;
  const std::vector<std::size_t> t = {0};
  EXPECT_THROW(recall_at_k(y, empty, 1), std::invalid_argument);
  EXPECT_THROW(recall_at_k(y, t, 0), std::out_of_range);
  EXPECT_THROW(recall_at_k(y, t, 3), std::out_of_range);
}

TEST(Recall, MonotoneInKAndMatchesReference) {
  SeededRng rng(51);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30);
    std::vector<double> y(n);
    // Coarse values so ties are common.
    for (double& v : y) v = static_cast<double>(rng.uniform_index(5)) / 4.0;
    std::vector<std::size_t> t(1 + rng.uniform_index(n));
    for (auto& v : t) v = rng.uniform_index(n);
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      const double r = recall_at_k(y, t, k);
      ASSERT_EQ(r, reference_recall(y, t, k));
      ASSERT_GE(r, prev);
      prev = r;
    }
    ASSERT_EQ(prev, 1.0);
  }
}

std::vector<PatientRecord> cohort_271(std::size_t n, std::uint64_t seed) {
  return generate_cohort(make_synth_spec(n, 40, 0.1, seed));
}

TEST(RandomBaseline, NearKOverVocabulary) {
  const auto cohort = cohort_271(400, 52);
  const CodeVocabulary vocab = build_vocabulary(cohort);
  const std::vector<std::size_t> ks = {10};
  const auto r = evaluate_random_baseline(cohort, vocab, ks, 7);
  const auto& s = r[0].samples;
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (s.size() - 1) / s.size());
  const double expected = 10.0 / static_cast<double>(vocab.size());
  EXPECT_NEAR(r[0].mean, mean, 1e-12);
  EXPECT_LE(std::abs(mean - expected), 3.0 * se);
}

TEST(RandomBaseline, DeterministicPerSeed) {
  const auto cohort = cohort_271(50, 53);
  const CodeVocabulary vocab = build_vocabulary(cohort);
  const std::vector<std::size_t> ks = {10, 30};
  EXPECT_EQ(evaluate_random_baseline(cohort, vocab, ks, 1)[1].samples,
            evaluate_random_baseline(cohort, vocab, ks, 1)[1].samples);
}

LigDoctorParams uniform_params(std::size_t codes) {
  NetworkShape shape;
  shape.code_width = codes;
  shape.hidden = 4;
  SeededRng rng(1);
  LigDoctorParams p = init_params(shape, rng);
  p.w_out.fill(0.0);
  p.b_out.fill(0.0);
  return p;
}

TEST(EvaluateModel, UniformOutputRanksByIndex) {
  // With uniform scores the top k are the first k codes.
  PatientRecord p{"a", {}};
  Admission a0, a1;
  a0.codes = {"0"};
  a1.codes = {"0", "1", "3"};
  a1.timestamp = 1;
  p.admissions = {a0, a1};
  const CodeVocabulary vocab({"0", "1", "2", "3"});
  const std::vector<std::size_t> ks = {1, 2, 3, 4};
  const std::vector<PatientRecord> cohort = {p};
  const auto r = evaluate_model(uniform_params(4), cohort, vocab, {}, ks);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_DOUBLE_EQ(r[0].mean, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[1].mean, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[2].mean, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[3].mean, 1.0);
  EXPECT_EQ(r[0].samples.size(), 1u);
}

TEST(EvaluateModel, ProtocolsAgreeForUnidirectionalModels) {
  const auto cohort = generate_cohort(make_synth_spec(30, 5, 0.2, 54, 30, 5.0));
  const CodeVocabulary vocab = build_vocabulary(cohort);
  NetworkShape shape;
  shape.code_width = vocab.size();
  shape.hidden = 6;
  shape.bidirectional = false;
  SeededRng rng(2);
  const LigDoctorParams p = init_params(shape, rng);
  const std::vector<std::size_t> ks = {3, 10};
  const auto norm = compute_normalization(cohort);
  const auto full = evaluate_model(p, cohort, vocab, norm, ks, EvalProtocol::kFullSequence);
  const auto prefix = evaluate_model(p, cohort, vocab, norm, ks, EvalProtocol::kPrefix, 7);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    ASSERT_EQ(full[i].samples.size(), prefix[i].samples.size());
    EXPECT_NEAR(full[i].mean, prefix[i].mean, 1e-12);
  }
}

TEST(EvaluateModel, BatchSizeDoesNotChangeResult) {
  const auto cohort = generate_cohort(make_synth_spec(25, 5, 0.2, 55, 30, 5.0));
  const CodeVocabulary vocab = build_vocabulary(cohort);
  NetworkShape shape;
  shape.code_width = vocab.size();
  shape.hidden = 5;
  SeededRng rng(3);
  const LigDoctorParams p = init_params(shape, rng);
  const std::vector<std::size_t> ks = {5};
  const auto a = evaluate_model(p, cohort, vocab, {}, ks, EvalProtocol::kFullSequence, 256);
  const auto b = evaluate_model(p, cohort, vocab, {}, ks, EvalProtocol::kFullSequence, 3);
  EXPECT_EQ(a[0].samples, b[0].samples);
}

const char* kGrid = R"({
  "base": {"hidden_size": 6, "max_epochs": 3},
  "ks": [5, 10],
  "rows": [
    {"name": "random", "random": true},
    {"name": "mgru"},
    {"name": "gru", "cell_kind": "gru"}
  ]
})";

TEST(Grid, ParsesRowsWithOverrides) {
  const GridSpec spec = grid_from_json(kGrid);
  ASSERT_EQ(spec.rows.size(), 3u);
  EXPECT_TRUE(spec.rows[0].random_baseline);
  EXPECT_EQ(spec.rows[2].config.cell_kind, CellKind::kGru);
  EXPECT_EQ(spec.rows[2].config.hidden_size, 6u);
  EXPECT_EQ(spec.ks, (std::vector<std::size_t>{5, 10}));
  EXPECT_THROW(grid_from_json(R"({"rows": [{"name": "x", "bogus": 1}]})"), InputError);
  EXPECT_THROW(grid_from_json(R"({"rows": []})"), InputError);
}

TEST(Grid, DeterministicAcrossJobCounts) {
  const auto cohort = generate_cohort(make_synth_spec(30, 5, 0.2, 56, 30, 5.0));
  const GridSpec spec = grid_from_json(kGrid);
  const std::vector<std::uint64_t> seeds = {1, 2};
  const ComparisonGrid a = run_comparison(cohort, spec, seeds, 1);
  const ComparisonGrid b = run_comparison(cohort, spec, seeds, 3);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  EXPECT_EQ(a.to_json(), b.to_json());
  ASSERT_EQ(a.rows.size(), 3u);
  EXPECT_EQ(a.rows[0].iterations, 1.0);
  for (const auto& r : a.rows) EXPECT_TRUE(r.ok) << r.failure;
}

TEST(Grid, SingleRowMatchesDirectTraining) {
  const auto cohort = generate_cohort(make_synth_spec(30, 5, 0.2, 57, 30, 5.0));
  GridSpec spec;
  TrainConfig c;
  c.hidden_size = 6;
  c.max_epochs = 4;
  spec.rows.push_back({"mgru", c, false});
  spec.ks = {10, 20, 30};
  const std::vector<std::uint64_t> seeds = {3};
  const ComparisonGrid grid = run_comparison(cohort, spec, seeds);
  c.seed = 3;
  const TrainResult direct = train(cohort, c);
  for (std::size_t k : spec.ks) EXPECT_EQ(grid.rows[0].recall.at(k), direct.report.recall.at(k)) << k;
  EXPECT_EQ(grid.rows[0].iterations, static_cast<double>(direct.report.iterations));
}

TEST(Grid, FailingRowIsMarked) {
  const auto cohort = generate_cohort(make_synth_spec(20, 5, 0.2, 58, 30, 5.0));
  GridSpec spec;
  TrainConfig ok;
  ok.hidden_size = 4;
  ok.max_epochs = 2;
  TrainConfig diverges = ok;
  diverges.validation_hook = [](std::size_t, double) { return std::nan(""); };
  spec.rows = {{"ok", ok, false}, {"diverges", diverges, false}};
  const std::vector<std::uint64_t> seeds = {1};
  const ComparisonGrid grid = run_comparison(cohort, spec, seeds);
  EXPECT_TRUE(grid.rows[0].ok);
  EXPECT_FALSE(grid.rows[1].ok);
  EXPECT_NE(grid.to_csv().find("failed"), std::string::npos);
}

TEST(Grid, RandomRowNearExpectation) {
  const auto cohort = cohort_271(300, 59);
  GridSpec spec;
  spec.rows.push_back({"random", {}, true});
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const ComparisonGrid grid = run_comparison(cohort, spec, seeds);
  const double r10 = grid.rows[0].recall.at(10);
  EXPECT_NEAR(r10, 10.0 / build_vocabulary(cohort).size(), 0.02);
}

}  // namespace
}  // namespace ligdoctor
