// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/network.h"

#include <algorithm>
#include <numeric>

#include "ligdoctor/error.h"
#include "ligdoctor/loss.h"

namespace ligdoctor {

namespace {

// Rows of `next` whose mask entry is zero are replaced by the rows of `prev`.
void carry_masked_rows(CellState& next, const CellState& prev, std::span<const double> mask) {
  for (std::size_t k = 0; k < next.parts.size(); ++k) {
    for (std::size_t h = 0; h < mask.size(); ++h) {
      if (mask[h] != 0.0) continue;
      auto dst = next.parts[k].row(h);
      auto src = prev.parts[k].row(h);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
}

// Splits a state gradient by mask: unmasked rows go to the cell, masked rows
// pass straight to the previous state.
std::pair<CellState, CellState> split_by_mask(const CellState& d, std::span<const double> mask) {
  CellState to_cell = d;
  CellState passthrough = d;
  for (std::size_t k = 0; k < d.parts.size(); ++k) {
    for (std::size_t h = 0; h < mask.size(); ++h) {
      auto zeroed = mask[h] != 0.0 ? passthrough.parts[k].row(h) : to_cell.parts[k].row(h);
      std::fill(zeroed.begin(), zeroed.end(), 0.0);
    }
  }
  return {std::move(to_cell), std::move(passthrough)};
}

FlowTrace run_flow(const std::vector<CellParams>& layers, const std::vector<Matrix>& inputs,
                   const Matrix& mask, bool reverse) {
  const std::size_t steps = inputs.size();
  const std::size_t patients = mask.cols();
  FlowTrace trace;
  trace.steps.assign(layers.size(), std::vector<StepTrace>(steps));
  trace.states.assign(layers.size(), std::vector<CellState>(steps));
  std::vector<CellState> carry;
  for (const CellParams& layer : layers) {
    carry.push_back(zero_state(layer.kind, patients, layer.hid));
  }
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const auto m = mask.row(t);
    const Matrix* in = &inputs[t];
    for (std::size_t l = 0; l < layers.size(); ++l) {
      CellState next = cell_step(layers[l], *in, carry[l], &trace.steps[l][t]);
      carry_masked_rows(next, carry[l], m);
      carry[l] = next;
      trace.states[l][t] = std::move(next);
      in = &trace.states[l][t].parts[0];
    }
  }
  return trace;
}

// Returns the gradient with respect to each step's flow input.
std::vector<Matrix> flow_backward(const std::vector<CellParams>& layers, const FlowTrace& trace,
                                  const std::vector<Matrix>& d_top, const Matrix& mask,
                                  bool reverse, std::vector<CellParams>& grads) {
  const std::size_t steps = d_top.size();
  const std::size_t patients = mask.cols();
  std::vector<CellState> dcarry;
  for (const CellParams& layer : layers) {
    dcarry.push_back(zero_state(layer.kind, patients, layer.hid));
  }
  std::vector<Matrix> d_inputs(steps);
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const auto m = mask.row(t);
    Matrix d_above = d_top[t];
    for (std::size_t l = layers.size(); l-- > 0;) {
      CellState dnext = dcarry[l];
      dnext.parts[0] += d_above;
      auto [to_cell, passthrough] = split_by_mask(dnext, m);
      StepGradients g = cell_backward(layers[l], trace.steps[l][t], to_cell, grads[l]);
      for (std::size_t k = 0; k < passthrough.parts.size(); ++k) {
        g.dprev.parts[k] += passthrough.parts[k];
      }
      dcarry[l] = std::move(g.dprev);
      d_above = std::move(g.dx);
    }
    d_inputs[t] = std::move(d_above);
  }
  return d_inputs;
}

void check_batch(const BatchTensor& batch, const LigDoctorParams& p) {
  if (batch.feature_width() != p.shape.input_width()) {
    throw ShapeError("forward: batch feature width " + std::to_string(batch.feature_width()) +
                     " does not match the model input width " +
                     std::to_string(p.shape.input_width()));
  }
  if (batch.code_width != p.shape.code_width) {
    throw ShapeError("forward: batch code width does not match the model vocabulary");
  }
  if (batch.mask.rows() != batch.steps() || batch.mask.cols() != batch.patients()) {
    throw ShapeError("forward: mask shape does not match the batch");
  }
}

void add_named(std::vector<ParamRef>& out, const std::string& name, Matrix& m, bool weight) {
  if (!m.empty()) out.push_back({name, &m, weight});
}

void add_cells(std::vector<ParamRef>& out, const std::string& prefix,
               std::vector<CellParams>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto names = block_names(layers[l].kind);
    const auto weights = block_is_weight(layers[l].kind);
    for (std::size_t b = 0; b < names.size(); ++b) {
      add_named(out, prefix + ".l" + std::to_string(l) + "." + names[b], layers[l].blocks[b],
                weights[b]);
    }
  }
}

// dL/dz and dL/dslope for y = lrelu(z, slope).
Matrix lrelu_backward(const Matrix& dy, const Matrix& z, double slope, double& dslope) {
  Matrix dz = dy;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double zi = z.data()[i];
    if (zi < 0.0) {
      dslope += dy.data()[i] * zi;
      dz.data()[i] *= slope;
    }
  }
  return dz;
}

}  // namespace

std::vector<ParamRef> LigDoctorParams::tensors() {
  std::vector<ParamRef> out;
  add_named(out, "embedding", embedding, true);
  add_cells(out, "fwd", fwd);
  add_cells(out, "bwd", bwd);
  add_named(out, "v_fwd", v_fwd, true);
  add_named(out, "v_bwd", v_bwd, true);
  add_named(out, "b_joint", b_joint, false);
  add_named(out, "alpha_j", alpha_j, false);
  add_named(out, "w_out", w_out, true);
  add_named(out, "b_out", b_out, false);
  add_named(out, "alpha_o", alpha_o, false);
  return out;
}

std::vector<ConstParamRef> LigDoctorParams::tensors() const {
  std::vector<ConstParamRef> out;
  for (const ParamRef& r : const_cast<LigDoctorParams*>(this)->tensors()) {
    out.push_back({r.name, r.value, r.is_weight});
  }
  return out;
}

std::size_t LigDoctorParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& r : tensors()) n += r.value->size();
  return n;
}

std::vector<double> LigDoctorParams::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& r : tensors()) {
    out.insert(out.end(), r.value->data().begin(), r.value->data().end());
  }
  return out;
}

void LigDoctorParams::assign_flat(std::span<const double> values) {
  if (values.size() != scalar_count()) throw ShapeError("assign_flat: length mismatch");
  std::size_t pos = 0;
  for (ParamRef& r : tensors()) {
    auto& d = r.value->data();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), d.size(), d.begin());
    pos += d.size();
  }
}

LigDoctorParams init_params(const NetworkShape& shape, SeededRng& rng) {
  if (shape.code_width == 0 || shape.hidden == 0 || shape.layers == 0) {
    throw ShapeError("init_params: code width, hidden size and layers must be positive");
  }
  LigDoctorParams p;
  p.shape = shape;
  if (shape.embedding_dim > 0) {
    p.embedding = init_gaussian(shape.code_width, shape.embedding_dim, rng);
  }
  auto make_stack = [&] {
    std::vector<CellParams> stack;
    for (std::size_t l = 0; l < shape.layers; ++l) {
      const std::size_t in = l == 0 ? shape.cell_input_width() : shape.hidden;
      stack.push_back(init_cell(shape.cell, in, shape.hidden, rng));
    }
    return stack;
  };
  p.fwd = make_stack();
  if (shape.bidirectional) p.bwd = make_stack();
  p.v_fwd = init_gaussian(shape.hidden, shape.hidden, rng);
  if (shape.bidirectional) p.v_bwd = init_gaussian(shape.hidden, shape.hidden, rng);
  p.b_joint = Matrix(1, shape.hidden);
  p.alpha_j = Matrix(1, 1, kInitialLeakySlope);
  p.w_out = init_gaussian(shape.hidden, shape.code_width, rng);
  p.b_out = Matrix(1, shape.code_width);
  p.alpha_o = Matrix(1, 1, kInitialLeakySlope);
  return p;
}

LigDoctorParams zeros_like(const LigDoctorParams& p) {
  LigDoctorParams z = p;
  for (ParamRef& r : z.tensors()) r.value->fill(0.0);
  return z;
}

Matrix embed_input(const Matrix& x, const Matrix& embedding, std::size_t code_width) {
  if (embedding.rows() != code_width || x.cols() < code_width) {
    throw ShapeError("embed_input: embedding rows must equal the code width");
  }
  const std::size_t extras = x.cols() - code_width;
  const std::size_t dim = embedding.cols();
  Matrix out(x.rows(), dim + extras);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < code_width; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      auto e = embedding.row(k);
      for (std::size_t j = 0; j < dim; ++j) dst[j] += v * e[j];
    }
    for (std::size_t j = 0; j < extras; ++j) dst[dim + j] = x(i, code_width + j);
  }
  return out;
}

ForwardTrace forward(const BatchTensor& batch, const LigDoctorParams& p,
                     const ForwardOptions& options) {
  check_batch(batch, p);
  if (options.dropout_rate > 0.0 && options.rng == nullptr) {
    throw std::invalid_argument("forward: dropout requires a generator");
  }
  const std::size_t steps = batch.steps();
  ForwardTrace trace;
  trace.cell_inputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Matrix x = batch.x.step(t);
    trace.cell_inputs.push_back(p.shape.embedding_dim > 0
                                    ? embed_input(x, p.embedding, p.shape.code_width)
                                    : std::move(x));
  }
  trace.fwd = run_flow(p.fwd, trace.cell_inputs, batch.mask, /*reverse=*/false);
  if (p.shape.bidirectional) {
    trace.bwd = run_flow(p.bwd, trace.cell_inputs, batch.mask, /*reverse=*/true);
  }

  const double alpha_j = p.alpha_j(0, 0);
  const double alpha_o = p.alpha_o(0, 0);
  const double keep = 1.0 - options.dropout_rate;
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix& hf = trace.fwd.states.back()[t].parts[0];
    trace.h_fwd.push_back(hf);
    Matrix zj = matmul(hf, p.v_fwd);
    if (p.shape.bidirectional) {
      const Matrix& hb = trace.bwd.states.back()[t].parts[0];
      trace.h_bwd.push_back(hb);
      zj += matmul(hb, p.v_bwd);
    }
    add_row_vector(zj, p.b_joint);
    Matrix hj = lrelu(zj, alpha_j);
    if (options.dropout_rate > 0.0) {
      Matrix scale(hj.rows(), hj.cols());
      for (double& s : scale.data()) s = options.rng->uniform() < keep ? 1.0 / keep : 0.0;
      hj = hadamard(hj, scale);
      trace.dropout_scale.push_back(std::move(scale));
    }
    Matrix zo = matmul(hj, p.w_out);
    add_row_vector(zo, p.b_out);
    trace.yhat.push_back(softmax_rows(lrelu(zo, alpha_o)));
    trace.joint_pre.push_back(std::move(zj));
    trace.joint.push_back(std::move(hj));
    trace.out_pre.push_back(std::move(zo));
  }
  return trace;
}

double batch_loss(const ForwardTrace& trace, const BatchTensor& batch) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < batch.steps(); ++t) {
    const auto m = batch.mask.row(t);
    for (std::size_t h = 0; h < batch.patients(); ++h) {
      if (m[h] == 0.0) continue;
      total += cross_entropy_row(batch.targets.cell(t, h), trace.yhat[t].row(h));
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

LigDoctorParams backward(const ForwardTrace& trace, const BatchTensor& batch,
                         const LigDoctorParams& p) {
  LigDoctorParams g = zeros_like(p);
  const std::size_t steps = batch.steps();
  const std::size_t valid = batch.valid_count();
  if (valid == 0) return g;
  const double scale = 1.0 / static_cast<double>(valid);
  const double alpha_j = p.alpha_j(0, 0);
  const double alpha_o = p.alpha_o(0, 0);

  std::vector<Matrix> d_hf(steps), d_hb(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix& yhat = trace.yhat[t];
    const Matrix dy = cross_entropy_grad(batch.targets.step(t), yhat, batch.mask.row(t), scale);

    // Softmax: du_j = yhat_j (dy_j - sum_k dy_k yhat_k).
    Matrix du(yhat.rows(), yhat.cols());
    for (std::size_t h = 0; h < yhat.rows(); ++h) {
      auto y = yhat.row(h);
      auto d = dy.row(h);
      const double dot = std::inner_product(d.begin(), d.end(), y.begin(), 0.0);
      auto out = du.row(h);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = y[j] * (d[j] - dot);
    }

    const Matrix dzo = lrelu_backward(du, trace.out_pre[t], alpha_o, g.alpha_o(0, 0));
    add_matmul_tn(g.w_out, trace.joint[t], dzo);
    add_col_sums(g.b_out, dzo);
    Matrix dhj = matmul_nt(dzo, p.w_out);
    if (!trace.dropout_scale.empty()) dhj = hadamard(dhj, trace.dropout_scale[t]);

    const Matrix dzj = lrelu_backward(dhj, trace.joint_pre[t], alpha_j, g.alpha_j(0, 0));
    add_matmul_tn(g.v_fwd, trace.h_fwd[t], dzj);
    add_col_sums(g.b_joint, dzj);
    d_hf[t] = matmul_nt(dzj, p.v_fwd);
    if (p.shape.bidirectional) {
      add_matmul_tn(g.v_bwd, trace.h_bwd[t], dzj);
      d_hb[t] = matmul_nt(dzj, p.v_bwd);
    }
  }

  std::vector<Matrix> d_in =
      flow_backward(p.fwd, trace.fwd, d_hf, batch.mask, /*reverse=*/false, g.fwd);
  if (p.shape.bidirectional) {
    const std::vector<Matrix> d_in_bwd =
        flow_backward(p.bwd, trace.bwd, d_hb, batch.mask, /*reverse=*/true, g.bwd);
    for (std::size_t t = 0; t < steps; ++t) d_in[t] += d_in_bwd[t];
  }
  if (p.shape.embedding_dim > 0) {
    const std::size_t dim = p.shape.embedding_dim;
    for (std::size_t t = 0; t < steps; ++t) {
      const Matrix x = batch.x.step(t);
      for (std::size_t h = 0; h < x.rows(); ++h) {
        auto d = d_in[t].row(h);
        for (std::size_t k = 0; k < p.shape.code_width; ++k) {
          const double v = x(h, k);
          if (v == 0.0) continue;
          auto ge = g.embedding.row(k);
          for (std::size_t j = 0; j < dim; ++j) ge[j] += v * d[j];
        }
      }
    }
  }
  return g;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k == 0 || k > scores.size()) {
    throw std::out_of_range("top_k_indices: k must be in [1, " + std::to_string(scores.size()) +
                            "]");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

std::vector<double> predict_distribution(const LigDoctorParams& p, const PatientRecord& history,
                                         const CodeVocabulary& vocab,
                                         const FeatureNormalization& normalization) {
  if (history.admissions.empty()) throw InputError("predict: history has no admissions");
  if (vocab.size() != p.shape.code_width) {
    throw ShapeError("predict: vocabulary size does not match the model");
  }
  const BatchTensor batch =
      build_inputs(std::span(&history, 1), vocab, p.shape.extras, normalization);
  const ForwardTrace trace = forward(batch, p);
  const auto row = trace.yhat[history.admissions.size() - 1].row(0);
  return {row.begin(), row.end()};
}

std::vector<ScoredCode> predict_topk(const LigDoctorParams& p, const PatientRecord& history,
                                     const CodeVocabulary& vocab,
                                     const FeatureNormalization& normalization, std::size_t k) {
  if (k == 0 || k > vocab.size()) {
    throw std::out_of_range("predict_topk: k must be in [1, " + std::to_string(vocab.size()) + "]");
  }
  const auto probs = predict_distribution(p, history, vocab, normalization);
  std::vector<ScoredCode> out;
  for (std::size_t idx : top_k_indices(probs, k)) {
    out.push_back({idx, vocab.label(idx), probs[idx]});
  }
  return out;
}

}  // namespace ligdoctor
