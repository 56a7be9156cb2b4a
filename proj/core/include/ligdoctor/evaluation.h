// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Recall@k, the uniform random baseline and the comparison-grid harness.
// Every admission-to-admission transition is one sample; the reported value
// is the unweighted mean over samples.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ligdoctor/ehr_data.h"
#include "ligdoctor/network.h"
#include "ligdoctor/training.h"

namespace ligdoctor {

// |top-k(yhat) intersect target| / |target|, ties by ascending index.
// Throws std::invalid_argument on an empty target and std::out_of_range
// when k is outside [1, |yhat|].
double recall_at_k(std::span<const double> yhat, std::span<const std::size_t> target,
                   std::size_t k);

struct RecallResult {
  std::size_t k = 0;
  std::vector<double> samples;
  double mean = 0.0;
};

enum class EvalProtocol {
  // One pass over each complete stored sequence; the backward flow at step
  // t has read the later inputs of that patient.
  kFullSequence,
  // Transition i is scored from the history a_0..a_i alone.
  kPrefix,
};

std::string_view to_string(EvalProtocol protocol);

std::vector<RecallResult> evaluate_model(const LigDoctorParams& params,
                                         std::span<const PatientRecord> cohort,
                                         const CodeVocabulary& vocab,
                                         const FeatureNormalization& normalization,
                                         std::span<const std::size_t> ks,
                                         EvalProtocol protocol = EvalProtocol::kFullSequence,
                                         std::size_t batch_size = 256);

// Uniform random scores, one draw per code per transition.
std::vector<RecallResult> evaluate_random_baseline(std::span<const PatientRecord> cohort,
                                                   const CodeVocabulary& vocab,
                                                   std::span<const std::size_t> ks,
                                                   std::uint64_t seed);

// One grid row: a named configuration, or the random baseline.
struct GridRow {
  std::string name;
  TrainConfig config;
  bool random_baseline = false;
};

struct GridSpec {
  std::vector<GridRow> rows;
  std::vector<std::size_t> ks = {10, 20, 30};
};

// {"base": {<TrainConfig fields>}, "ks": [..], "rows": [{"name": .., "random": bool,
//  <TrainConfig fields overriding base>}, ..]}
GridSpec grid_from_json(std::string_view text);

struct GridResult {
  std::string name;
  bool random_baseline = false;
  TrainConfig config;
  bool ok = false;
  std::string failure;
  std::map<std::size_t, double> recall;  // mean across seeds
  double iterations = 0.0;               // mean across seeds
  double time_seconds = 0.0;             // mean across seeds
  std::size_t seeds_succeeded = 0;
};

struct ComparisonGrid {
  std::vector<std::size_t> ks;
  std::vector<GridResult> rows;

  std::string to_csv(bool include_time = false) const;
  std::string to_json(bool include_time = false) const;
};

// Trains every row on every seed's split and averages. A row whose training
// fails on any seed is kept with a failure marker. Rows run on up to `jobs`
// threads; results do not depend on `jobs`.
ComparisonGrid run_comparison(const std::vector<PatientRecord>& cohort, const GridSpec& spec,
                              std::span<const std::uint64_t> seeds, std::size_t jobs = 1);

}  // namespace ligdoctor
