// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Bidirectional recurrent predictor over the admission axis.
//
//   h_fwd[t]  : forward flow after reading steps 0..t
//   h_bwd[t]  : backward flow after reading steps T-1..t (reversed input)
//   joint[t]  = lrelu(h_fwd[t] Vfwd + h_bwd[t] Vbwd + b_joint, alpha_j)
//   yhat[t]   = softmax(lrelu(joint[t] Wout + b_out, alpha_o))
//
// Padded steps carry the previous state through unchanged, so the backward
// flow of a short patient starts from zero at its own last admission.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ligdoctor/cells.h"
#include "ligdoctor/ehr_data.h"
#include "ligdoctor/numerics.h"

namespace ligdoctor {

inline constexpr double kInitialLeakySlope = 0.01;

struct NetworkShape {
  std::size_t code_width = 0;  // |D|
  ExtraFeatures extras;
  std::size_t hidden = 0;
  std::size_t layers = 1;
  CellKind cell = CellKind::kMgru;
  bool bidirectional = true;
  std::size_t embedding_dim = 0;  // 0 disables the embedding layer

  std::size_t input_width() const { return code_width + extras.width(); }
  std::size_t cell_input_width() const {
    return (embedding_dim > 0 ? embedding_dim : code_width) + extras.width();
  }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct ParamRef {
  std::string name;
  Matrix* value;
  bool is_weight;  // biases and slopes are not
};

struct ConstParamRef {
  std::string name;
  const Matrix* value;
  bool is_weight;
};

struct LigDoctorParams {
  NetworkShape shape;
  Matrix embedding;                // |D| x embedding_dim, empty when disabled
  std::vector<CellParams> fwd;     // one per layer
  std::vector<CellParams> bwd;     // empty when unidirectional
  Matrix v_fwd, v_bwd, b_joint;    // hid x hid, hid x hid, 1 x hid
  Matrix alpha_j;                  // 1 x 1
  Matrix w_out, b_out;             // hid x |D|, 1 x |D|
  Matrix alpha_o;                  // 1 x 1

  // Every trainable tensor in a fixed order.
  std::vector<ParamRef> tensors();
  std::vector<ConstParamRef> tensors() const;
  std::size_t scalar_count() const;

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  friend bool operator==(const LigDoctorParams&, const LigDoctorParams&) = default;
};

LigDoctorParams init_params(const NetworkShape& shape, SeededRng& rng);
LigDoctorParams zeros_like(const LigDoctorParams& p);

struct FlowTrace {
  std::vector<std::vector<StepTrace>> steps;   // [layer][t]
  std::vector<std::vector<CellState>> states;  // [layer][t], after masking
};

struct ForwardTrace {
  std::vector<Matrix> cell_inputs;  // [t], after the optional embedding
  FlowTrace fwd, bwd;
  std::vector<Matrix> h_fwd, h_bwd;  // [t], top layer
  std::vector<Matrix> joint_pre;     // [t]
  std::vector<Matrix> joint;         // [t], after dropout
  std::vector<Matrix> dropout_scale; // [t], empty when dropout is off
  std::vector<Matrix> out_pre;       // [t]
  std::vector<Matrix> yhat;          // [t], rows sum to 1
};

struct ForwardOptions {
  double dropout_rate = 0.0;     // applied to the joint-layer output
  SeededRng* rng = nullptr;      // required when dropout_rate > 0
};

ForwardTrace forward(const BatchTensor& batch, const LigDoctorParams& p,
                     const ForwardOptions& options = {});

// Mean cross-entropy over unmasked (step, patient) positions.
double batch_loss(const ForwardTrace& trace, const BatchTensor& batch);

// Gradients of batch_loss with respect to every parameter.
LigDoctorParams backward(const ForwardTrace& trace, const BatchTensor& batch,
                         const LigDoctorParams& p);

// Input embedding: code slots become x_codes * E, extras are appended.
Matrix embed_input(const Matrix& x, const Matrix& embedding, std::size_t code_width);

struct ScoredCode {
  std::size_t index;
  std::string label;
  double probability;
};

// Indices of the k largest values, descending, ties by ascending index.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

// Ranks codes for the admission following `history`.
std::vector<ScoredCode> predict_topk(const LigDoctorParams& p, const PatientRecord& history,
                                     const CodeVocabulary& vocab,
                                     const FeatureNormalization& normalization, std::size_t k);

// Full next-admission distribution after `history`.
std::vector<double> predict_distribution(const LigDoctorParams& p, const PatientRecord& history,
                                         const CodeVocabulary& vocab,
                                         const FeatureNormalization& normalization);

}  // namespace ligdoctor
