// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/cells.h"

#include <sstream>

#include "ligdoctor/error.h"

namespace ligdoctor {

namespace {

// x W + h U + b
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& h, const Matrix& u,
              const Matrix& b) {
  Matrix a = matmul(x, w);
  a += matmul(h, u);
  add_row_vector(a, b);
  return a;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix a = matmul(x, w);
  add_row_vector(a, b);
  return a;
}

// Backward of affine(x, w, h, u, b) given the pre-activation gradient.
void affine_backward(const Matrix& da, const Matrix& x, const Matrix& w, const Matrix& h,
                     const Matrix& u, Matrix& dw, Matrix& du, Matrix& db, Matrix& dx,
                     Matrix& dh) {
  add_matmul_tn(dw, x, da);
  add_matmul_tn(du, h, da);
  add_col_sums(db, da);
  dx += matmul_nt(da, w);
  dh += matmul_nt(da, u);
}

void affine_backward(const Matrix& da, const Matrix& x, const Matrix& w, Matrix& dw,
                     Matrix& db, Matrix& dx) {
  add_matmul_tn(dw, x, da);
  add_col_sums(db, da);
  dx += matmul_nt(da, w);
}

// d/da sigmoid given the sigmoid output.
Matrix sigmoid_grad(const Matrix& upstream, const Matrix& s) {
  Matrix out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = s.data()[i];
    out.data()[i] *= v * (1.0 - v);
  }
  return out;
}

// d/da tanh given the tanh output.
Matrix tanh_grad(const Matrix& upstream, const Matrix& t) {
  Matrix out = upstream;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = t.data()[i];
    out.data()[i] *= 1.0 - v * v;
  }
  return out;
}

Matrix one_minus(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = 1.0 - v;
  return out;
}

void check_step_shapes(const CellParams& p, const Matrix& x, const CellState& prev) {
  if (x.cols() != p.in) {
    std::ostringstream msg;
    msg << to_string(p.kind) << " step: input width " << x.cols() << " != " << p.in;
    throw ShapeError(msg.str());
  }
  if (prev.parts.size() != state_part_count(p.kind)) {
    throw ShapeError(std::string(to_string(p.kind)) + " step: wrong number of state parts");
  }
  for (const Matrix& s : prev.parts) {
    if (s.rows() != x.rows() || s.cols() != p.hid) {
      throw ShapeError(std::string(to_string(p.kind)) + " step: state shape mismatch");
    }
  }
}

struct KindInfo {
  std::vector<std::string> names;
  std::vector<bool> is_weight;
};

KindInfo kind_info(CellKind kind) {
  switch (kind) {
    case CellKind::kMgru:
      return {{"wf", "uf", "bf", "wh", "uh", "bh"}, {true, true, false, true, true, false}};
    case CellKind::kGru:
      return {{"wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"},
              {true, true, false, true, true, false, true, true, false}};
    case CellKind::kLstm:
      return {{"wi", "ui", "bi", "wf", "uf", "bf", "wo", "uo", "bo", "wg", "ug", "bg"},
              {true, true, false, true, true, false, true, true, false, true, true, false}};
    case CellKind::kLstmGoogle:
      return {{"wi", "ui", "bi", "wf", "uf", "bf", "wo", "uo", "bo", "wg", "ug", "bg", "wp"},
              {true, true, false, true, true, false, true, true, false, true, true, false,
               true}};
    case CellKind::kJordan:
      return {{"w", "u", "b", "wy", "by"}, {true, true, false, true, false}};
    case CellKind::kFeedforward:
      return {{"w", "b"}, {true, false}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Minimal GRU

Matrix mgru_forward(const Matrix& x, const Matrix& h, const Matrix& wf, const Matrix& uf,
                    const Matrix& bf, const Matrix& wh, const Matrix& uh, const Matrix& bh,
                    Matrix* f_out, Matrix* cand_out) {
  Matrix f = sigmoid(affine(x, wf, h, uf, bf));
  Matrix cand = tanh_act(affine(x, wh, hadamard(f, h), uh, bh));
  Matrix out = hadamard(one_minus(f), h);
  out += hadamard(f, cand);
  if (f_out) *f_out = std::move(f);
  if (cand_out) *cand_out = std::move(cand);
  return out;
}

// Returns dx; accumulates dh_prev and parameter gradients.
Matrix mgru_backward_impl(const Matrix& x, const Matrix& h, const Matrix& f, const Matrix& cand,
                          const Matrix& dh_next, const Matrix& wf, const Matrix& uf,
                          const Matrix& wh, const Matrix& uh, Matrix& dwf, Matrix& duf,
                          Matrix& dbf, Matrix& dwh, Matrix& duh, Matrix& dbh, Matrix& dh_prev) {
  Matrix dx(x.rows(), x.cols());
  Matrix df = hadamard(dh_next, cand - h);
  dh_prev += hadamard(dh_next, one_minus(f));

  const Matrix da_h = tanh_grad(hadamard(dh_next, f), cand);
  const Matrix gated = hadamard(f, h);
  Matrix dgated(h.rows(), h.cols());
  affine_backward(da_h, x, wh, gated, uh, dwh, duh, dbh, dx, dgated);
  df += hadamard(dgated, h);
  dh_prev += hadamard(dgated, f);

  const Matrix da_f = sigmoid_grad(df, f);
  affine_backward(da_f, x, wf, h, uf, dwf, duf, dbf, dx, dh_prev);
  return dx;
}

// ---------------------------------------------------------------------------
// GRU: saved = {z, r, n}

CellState gru_step(const CellParams& p, const Matrix& x, const CellState& prev,
                   StepTrace* trace) {
  const auto& b = p.blocks;
  const Matrix& h = prev.parts[0];
  Matrix z = sigmoid(affine(x, b[0], h, b[1], b[2]));
  Matrix r = sigmoid(affine(x, b[3], h, b[4], b[5]));
  Matrix n = tanh_act(affine(x, b[6], hadamard(r, h), b[7], b[8]));
  Matrix out = hadamard(one_minus(z), h);
  out += hadamard(z, n);
  if (trace) trace->saved = {std::move(z), std::move(r), std::move(n)};
  return CellState{{std::move(out)}};
}

StepGradients gru_backward(const CellParams& p, const StepTrace& t, const CellState& dnext,
                           CellParams& g) {
  const auto& b = p.blocks;
  auto& gb = g.blocks;
  const Matrix& x = t.x;
  const Matrix& h = t.prev.parts[0];
  const Matrix& z = t.saved[0];
  const Matrix& r = t.saved[1];
  const Matrix& n = t.saved[2];
  const Matrix& dout = dnext.parts[0];

  Matrix dx(x.rows(), x.cols());
  Matrix dh = hadamard(dout, one_minus(z));
  const Matrix dz = hadamard(dout, n - h);
  const Matrix da_n = tanh_grad(hadamard(dout, z), n);
  Matrix drh(h.rows(), h.cols());
  affine_backward(da_n, x, b[6], hadamard(r, h), b[7], gb[6], gb[7], gb[8], dx, drh);
  const Matrix dr = hadamard(drh, h);
  dh += hadamard(drh, r);
  affine_backward(sigmoid_grad(dr, r), x, b[3], h, b[4], gb[3], gb[4], gb[5], dx, dh);
  affine_backward(sigmoid_grad(dz, z), x, b[0], h, b[1], gb[0], gb[1], gb[2], dx, dh);
  return {std::move(dx), CellState{{std::move(dh)}}};
}

// ---------------------------------------------------------------------------
// LSTM and the projection variant: saved = {i, f, o, g, tanh(c'), [h]}

CellState lstm_step(const CellParams& p, const Matrix& x, const CellState& prev,
                    StepTrace* trace) {
  const auto& b = p.blocks;
  const Matrix& rec = prev.parts[0];
  const Matrix& c = prev.parts[1];
  Matrix i = sigmoid(affine(x, b[0], rec, b[1], b[2]));
  Matrix f = sigmoid(affine(x, b[3], rec, b[4], b[5]));
  Matrix o = sigmoid(affine(x, b[6], rec, b[7], b[8]));
  Matrix g = tanh_act(affine(x, b[9], rec, b[10], b[11]));
  Matrix c_new = hadamard(f, c);
  c_new += hadamard(i, g);
  Matrix tc = tanh_act(c_new);
  Matrix h = hadamard(o, tc);
  Matrix out = p.kind == CellKind::kLstmGoogle ? matmul(h, b[12]) : h;
  if (trace) {
    trace->saved = {std::move(i), std::move(f), std::move(o), std::move(g), std::move(tc)};
    if (p.kind == CellKind::kLstmGoogle) trace->saved.push_back(std::move(h));
  }
  return CellState{{std::move(out), std::move(c_new)}};
}

StepGradients lstm_backward(const CellParams& p, const StepTrace& t, const CellState& dnext,
                            CellParams& grads) {
  const auto& b = p.blocks;
  auto& gb = grads.blocks;
  const Matrix& x = t.x;
  const Matrix& rec = t.prev.parts[0];
  const Matrix& c = t.prev.parts[1];
  const Matrix& i = t.saved[0];
  const Matrix& f = t.saved[1];
  const Matrix& o = t.saved[2];
  const Matrix& g = t.saved[3];
  const Matrix& tc = t.saved[4];

  Matrix dh;
  if (p.kind == CellKind::kLstmGoogle) {
    add_matmul_tn(gb[12], t.saved[5], dnext.parts[0]);
    dh = matmul_nt(dnext.parts[0], b[12]);
  } else {
    dh = dnext.parts[0];
  }
  Matrix dc = dnext.parts[1];
  dc += tanh_grad(hadamard(dh, o), tc);
  const Matrix d_o = hadamard(dh, tc);
  const Matrix d_i = hadamard(dc, g);
  const Matrix d_g = hadamard(dc, i);
  const Matrix d_f = hadamard(dc, c);

  Matrix dx(x.rows(), x.cols());
  Matrix drec(rec.rows(), rec.cols());
  affine_backward(sigmoid_grad(d_i, i), x, b[0], rec, b[1], gb[0], gb[1], gb[2], dx, drec);
  affine_backward(sigmoid_grad(d_f, f), x, b[3], rec, b[4], gb[3], gb[4], gb[5], dx, drec);
  affine_backward(sigmoid_grad(d_o, o), x, b[6], rec, b[7], gb[6], gb[7], gb[8], dx, drec);
  affine_backward(tanh_grad(d_g, g), x, b[9], rec, b[10], gb[9], gb[10], gb[11], dx, drec);
  return {std::move(dx), CellState{{std::move(drec), hadamard(dc, f)}}};
}

// ---------------------------------------------------------------------------
// Jordan: state = {h, y}; saved = {h, y}

CellState jordan_step(const CellParams& p, const Matrix& x, const CellState& prev,
                      StepTrace* trace) {
  const auto& b = p.blocks;
  Matrix h = tanh_act(affine(x, b[0], prev.parts[1], b[1], b[2]));
  Matrix y = sigmoid(affine(h, b[3], b[4]));
  if (trace) trace->saved = {h, y};
  return CellState{{std::move(h), std::move(y)}};
}

StepGradients jordan_backward(const CellParams& p, const StepTrace& t, const CellState& dnext,
                              CellParams& grads) {
  const auto& b = p.blocks;
  auto& gb = grads.blocks;
  const Matrix& h = t.saved[0];
  const Matrix& y = t.saved[1];
  Matrix dh = dnext.parts[0];
  affine_backward(sigmoid_grad(dnext.parts[1], y), h, b[3], gb[3], gb[4], dh);

  Matrix dx(t.x.rows(), t.x.cols());
  Matrix dy_prev(y.rows(), y.cols());
  affine_backward(tanh_grad(dh, h), t.x, b[0], t.prev.parts[1], b[1], gb[0], gb[1], gb[2], dx,
                  dy_prev);
  Matrix dh_prev(h.rows(), h.cols());
  return {std::move(dx), CellState{{std::move(dh_prev), std::move(dy_prev)}}};
}

// ---------------------------------------------------------------------------
// Feed-forward: saved = {h}

CellState feedforward_step(const CellParams& p, const Matrix& x, StepTrace* trace) {
  Matrix h = tanh_act(affine(x, p.blocks[0], p.blocks[1]));
  if (trace) trace->saved = {h};
  return CellState{{std::move(h)}};
}

StepGradients feedforward_backward(const CellParams& p, const StepTrace& t,
                                   const CellState& dnext, CellParams& grads) {
  Matrix dx(t.x.rows(), t.x.cols());
  affine_backward(tanh_grad(dnext.parts[0], t.saved[0]), t.x, p.blocks[0], grads.blocks[0],
                  grads.blocks[1], dx);
  return {std::move(dx), CellState{{Matrix(t.x.rows(), p.hid)}}};
}

}  // namespace

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::kMgru: return "mgru";
    case CellKind::kGru: return "gru";
    case CellKind::kLstm: return "lstm";
    case CellKind::kLstmGoogle: return "lstm_google";
    case CellKind::kJordan: return "jordan";
    case CellKind::kFeedforward: return "feedforward";
  }
  return "unknown";
}

CellKind parse_cell_kind(std::string_view name) {
  for (CellKind k : kAllCellKinds)
    if (to_string(k) == name) return k;
  throw InputError("unknown cell kind '" + std::string(name) + "'");
}

std::size_t param_count(CellKind kind, std::size_t in, std::size_t hid) {
  const std::size_t gate = in * hid + hid * hid + hid;
  switch (kind) {
    case CellKind::kMgru: return 2 * gate;
    case CellKind::kGru: return 3 * gate;
    case CellKind::kLstm: return 4 * gate;
    case CellKind::kLstmGoogle: return 4 * gate + hid * hid;
    case CellKind::kJordan: return gate + hid * hid + hid;
    case CellKind::kFeedforward: return in * hid + hid;
  }
  return 0;
}

std::size_t CellParams::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : blocks) n += m.size();
  return n;
}

std::vector<std::string> block_names(CellKind kind) { return kind_info(kind).names; }
std::vector<bool> block_is_weight(CellKind kind) { return kind_info(kind).is_weight; }

CellParams init_cell(CellKind kind, std::size_t in, std::size_t hid, SeededRng& rng) {
  if (in == 0 || hid == 0) throw ShapeError("init_cell: sizes must be positive");
  CellParams p{kind, in, hid, {}};
  for (const std::string& name : kind_info(kind).names) {
    if (name.front() == 'b') {
      p.blocks.emplace_back(1, hid);
    } else if (name.front() == 'u') {
      p.blocks.push_back(init_identity(hid));
    } else if (name == "wp" || name == "wy") {
      p.blocks.push_back(init_gaussian(hid, hid, rng));
    } else {
      p.blocks.push_back(init_gaussian(in, hid, rng));
    }
  }
  return p;
}

CellParams zeros_like(const CellParams& p) {
  CellParams z{p.kind, p.in, p.hid, {}};
  for (const Matrix& m : p.blocks) z.blocks.emplace_back(m.rows(), m.cols());
  return z;
}

std::size_t state_part_count(CellKind kind) {
  switch (kind) {
    case CellKind::kLstm:
    case CellKind::kLstmGoogle:
    case CellKind::kJordan: return 2;
    default: return 1;
  }
}

CellState zero_state(CellKind kind, std::size_t patients, std::size_t hid) {
  CellState s;
  for (std::size_t i = 0; i < state_part_count(kind); ++i) s.parts.emplace_back(patients, hid);
  return s;
}

CellState cell_step(const CellParams& p, const Matrix& x, const CellState& prev,
                    StepTrace* trace) {
  check_step_shapes(p, x, prev);
  if (trace) {
    trace->x = x;
    trace->prev = prev;
  }
  switch (p.kind) {
    case CellKind::kMgru: {
      Matrix f, cand;
      const auto& b = p.blocks;
      Matrix h = mgru_forward(x, prev.parts[0], b[0], b[1], b[2], b[3], b[4], b[5], &f, &cand);
      if (trace) trace->saved = {std::move(f), std::move(cand)};
      return CellState{{std::move(h)}};
    }
    case CellKind::kGru: return gru_step(p, x, prev, trace);
    case CellKind::kLstm:
    case CellKind::kLstmGoogle: return lstm_step(p, x, prev, trace);
    case CellKind::kJordan: return jordan_step(p, x, prev, trace);
    case CellKind::kFeedforward: return feedforward_step(p, x, trace);
  }
  throw ShapeError("cell_step: unknown kind");
}

StepGradients cell_backward(const CellParams& p, const StepTrace& trace, const CellState& dnext,
                            CellParams& grads) {
  switch (p.kind) {
    case CellKind::kMgru: {
      const auto& b = p.blocks;
      auto& g = grads.blocks;
      const Matrix& h = trace.prev.parts[0];
      Matrix dh_prev(h.rows(), h.cols());
      Matrix dx = mgru_backward_impl(trace.x, h, trace.saved[0], trace.saved[1], dnext.parts[0],
                                     b[0], b[1], b[3], b[4], g[0], g[1], g[2], g[3], g[4], g[5],
                                     dh_prev);
      return {std::move(dx), CellState{{std::move(dh_prev)}}};
    }
    case CellKind::kGru: return gru_backward(p, trace, dnext, grads);
    case CellKind::kLstm:
    case CellKind::kLstmGoogle: return lstm_backward(p, trace, dnext, grads);
    case CellKind::kJordan: return jordan_backward(p, trace, dnext, grads);
    case CellKind::kFeedforward: return feedforward_backward(p, trace, dnext, grads);
  }
  throw ShapeError("cell_backward: unknown kind");
}

MgruParams MgruParams::from_cell(const CellParams& p) {
  if (p.kind != CellKind::kMgru) throw ShapeError("MgruParams::from_cell: not an mgru cell");
  const auto& b = p.blocks;
  return MgruParams{b[0], b[1], b[2], b[3], b[4], b[5]};
}

CellParams MgruParams::to_cell() const {
  return CellParams{CellKind::kMgru, wf.rows(), wf.cols(), {wf, uf, bf, wh, uh, bh}};
}

Matrix mgru_step(const Matrix& x, const Matrix& h_prev, const MgruParams& p, MgruTrace* trace) {
  if (x.cols() != p.wf.rows() || h_prev.cols() != p.wf.cols() || x.rows() != h_prev.rows()) {
    throw ShapeError("mgru_step: shape mismatch");
  }
  Matrix f, cand;
  Matrix h = mgru_forward(x, h_prev, p.wf, p.uf, p.bf, p.wh, p.uh, p.bh, &f, &cand);
  if (trace) *trace = MgruTrace{x, h_prev, std::move(f), std::move(cand)};
  return h;
}

MgruGradients mgru_backward(const MgruTrace& t, const Matrix& dh, const MgruParams& p) {
  MgruGradients g;
  g.dh_prev = Matrix(t.h_prev.rows(), t.h_prev.cols());
  g.dparams = MgruParams{Matrix(p.wf.rows(), p.wf.cols()), Matrix(p.uf.rows(), p.uf.cols()),
                         Matrix(1, p.bf.cols()),           Matrix(p.wh.rows(), p.wh.cols()),
                         Matrix(p.uh.rows(), p.uh.cols()), Matrix(1, p.bh.cols())};
  auto& d = g.dparams;
  g.dx = mgru_backward_impl(t.x, t.h_prev, t.f, t.candidate, dh, p.wf, p.uf, p.wh, p.uh, d.wf,
                            d.uf, d.bf, d.wh, d.uh, d.bh, g.dh_prev);
  return g;
}

}  // namespace ligdoctor
