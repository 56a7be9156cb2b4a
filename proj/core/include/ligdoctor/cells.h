// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Recurrent and feed-forward cells with single-step forward and
// hand-derived single-step backward passes. Rows are patients, columns are
// features, so every affine map is written x * W.
//
//   mgru        f = sig(x Wf + h Uf + bf)
//               c = tanh(x Wh + (f . h) Uh + bh)
//               h' = (1 - f) . h + f . c
//   gru         update/reset gates, candidate uses (r . h) Un
//   lstm        input/forget/output gates, carry c
//   lstm_google lstm whose recurrent input is a projection r = h Wp
//   jordan      h = tanh(x W + y_prev U + b), y = sig(h Wy + by)
//   feedforward h = tanh(x W + b), no recurrence

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ligdoctor/numerics.h"

namespace ligdoctor {

enum class CellKind { kMgru, kGru, kLstm, kLstmGoogle, kJordan, kFeedforward };

inline constexpr CellKind kAllCellKinds[] = {CellKind::kMgru,       CellKind::kGru,
                                             CellKind::kLstm,       CellKind::kLstmGoogle,
                                             CellKind::kJordan,     CellKind::kFeedforward};

std::string_view to_string(CellKind kind);
// Accepts the names produced by to_string; throws InputError otherwise.
CellKind parse_cell_kind(std::string_view name);

// Exact number of trainable scalars for a cell.
std::size_t param_count(CellKind kind, std::size_t in, std::size_t hid);

// Trainable blocks of one cell, in a fixed per-kind order (see block_names).
struct CellParams {
  CellKind kind = CellKind::kMgru;
  std::size_t in = 0;
  std::size_t hid = 0;
  std::vector<Matrix> blocks;

  std::size_t scalar_count() const;
  friend bool operator==(const CellParams&, const CellParams&) = default;
};

std::vector<std::string> block_names(CellKind kind);
// True for weight matrices, false for biases.
std::vector<bool> block_is_weight(CellKind kind);

// Square recurrent matrices start at identity, the rest Gaussian, biases 0.
CellParams init_cell(CellKind kind, std::size_t in, std::size_t hid, SeededRng& rng);
CellParams zeros_like(const CellParams& p);

// parts[0] is the cell output seen by the next layer; LSTM variants keep
// the carry in parts[1], Jordan keeps its previous output in parts[1].
struct CellState {
  std::vector<Matrix> parts;

  const Matrix& h() const { return parts.front(); }
};

std::size_t state_part_count(CellKind kind);
CellState zero_state(CellKind kind, std::size_t patients, std::size_t hid);

// Everything a backward step needs; filled by cell_step.
struct StepTrace {
  Matrix x;
  CellState prev;
  std::vector<Matrix> saved;
};

struct StepGradients {
  Matrix dx;
  CellState dprev;
};

CellState cell_step(const CellParams& p, const Matrix& x, const CellState& prev,
                    StepTrace* trace = nullptr);

// Accumulates parameter gradients into `grads` (which must match p) and
// returns gradients for the step input and the previous state. `dnext` holds
// one gradient per state part.
StepGradients cell_backward(const CellParams& p, const StepTrace& trace, const CellState& dnext,
                            CellParams& grads);

struct MgruParams {
  Matrix wf, uf, bf;
  Matrix wh, uh, bh;

  static MgruParams from_cell(const CellParams& p);
  CellParams to_cell() const;
};

struct MgruTrace {
  Matrix x, h_prev, f, candidate;
};

struct MgruGradients {
  Matrix dx, dh_prev;
  MgruParams dparams;
};

Matrix mgru_step(const Matrix& x, const Matrix& h_prev, const MgruParams& p,
                 MgruTrace* trace = nullptr);
MgruGradients mgru_backward(const MgruTrace& trace, const Matrix& dh, const MgruParams& p);

}  // namespace ligdoctor
