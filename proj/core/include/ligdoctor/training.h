// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Patient-level split, ADADELTA with global-norm clipping, L2 / dropout /
// input-noise regularization, and the epoch loop with early stopping on the
// held-out cross-entropy.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ligdoctor/cells.h"
#include "ligdoctor/checkpoint.h"
#include "ligdoctor/ehr_data.h"
#include "ligdoctor/network.h"

namespace ligdoctor {

struct TrainConfig {
  std::uint64_t seed = 1;
  double split_fraction = 0.9;
  std::size_t patience_epochs = 10;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double clip_norm = 5.0;
  double l2_coeff = 1e-4;
  double dropout_rate = 0.0;
  double input_noise_std = 0.0;
  std::size_t max_epochs = 500;
  std::size_t hidden_size = 0;  // 0 means |D|
  CellKind cell_kind = CellKind::kMgru;
  std::size_t layers = 1;
  bool bidirectional = true;
  ExtraFeatures extra_features;
  std::size_t embedding_dim = 0;  // 0 disables the embedding layer
  std::size_t batch_size = 0;     // 0 means the whole split in one batch
  bool unsupervised_pretraining = false;  // accepted, not implemented

  // Test hook: replaces the validation loss of each epoch (1-based).
  std::function<double(std::size_t epoch, double computed)> validation_hook;

  // Throws InputError when a field is out of range.
  void validate() const;
};

// Flat JSON object whose keys are TrainConfig field names. Unknown keys are
// rejected. Fields absent from the JSON keep the values already in `base`.
TrainConfig config_from_json(std::string_view text, TrainConfig base = {});
std::string config_to_json(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  bool improved = false;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t iterations = 0;  // epochs run
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  std::string stop_reason;
  std::size_t train_patients = 0;
  std::size_t test_patients = 0;
  std::size_t vocabulary_size = 0;
  std::map<std::size_t, double> recall;         // k -> held-out Recall@k, full sequences
  std::map<std::size_t, double> recall_prefix;  // k -> held-out Recall@k, history prefixes
  double wall_time_seconds = 0.0;

  // Wall time is left out unless asked for, so reports are reproducible.
  std::string to_json(bool include_wall_time = false) const;
};

struct PatientSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffles patient indices by seed; both parts are non-empty.
PatientSplit split_patients(std::size_t count, double fraction, std::uint64_t seed);

// Global L2 norm of every gradient tensor.
double gradient_norm(const LigDoctorParams& grads);
// Scales all gradients by clip_norm / norm when norm exceeds clip_norm.
// Returns the norm before clipping.
double clip_gradients(LigDoctorParams& grads, double clip_norm);

// l2_coeff times the sum of squared weight-matrix entries; biases and slopes
// are excluded.
double l2_penalty(const LigDoctorParams& p, double l2_coeff);
void add_l2_gradient(const LigDoctorParams& p, double l2_coeff, LigDoctorParams& grads);

struct AdadeltaState {
  std::vector<double> grad_acc;  // running E[g^2]
  std::vector<double> step_acc;  // running E[dx^2]

  explicit AdadeltaState(std::size_t n = 0) : grad_acc(n, 0.0), step_acc(n, 0.0) {}
};

// One ADADELTA update over flat vectors:
//   E[g^2] = rho E[g^2] + (1 - rho) g^2
//   dx     = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//   E[dx^2]= rho E[dx^2] + (1 - rho) dx^2
//   x     += dx
void adadelta_update(std::span<double> params, std::span<const double> grads,
                     AdadeltaState& state, double rho, double eps);
void adadelta_update(LigDoctorParams& params, const LigDoctorParams& grads, AdadeltaState& state,
                     double rho, double eps);

// Adds N(0, stddev) noise to the code slots of unmasked positions.
void add_input_noise(BatchTensor& batch, double stddev, SeededRng& rng);

// Groups patients into padded batches. With batch_size 0 everything is one
// batch; otherwise patients are ordered by admission count (stable) and cut
// into groups of at most batch_size.
std::vector<BatchTensor> make_batches(std::span<const PatientRecord> patients,
                                      const CodeVocabulary& vocab, const ExtraFeatures& extras,
                                      const FeatureNormalization& normalization,
                                      std::size_t batch_size);

struct TrainResult {
  Model model;
  TrainReport report;
};

// Throws InputError for a cohort with fewer than two patients and
// DivergenceError when a loss or gradient becomes non-finite.
TrainResult train(const std::vector<PatientRecord>& cohort, const TrainConfig& config,
                  const std::map<std::string, std::string>& descriptions = {});

}  // namespace ligdoctor
