// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/numerics.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ligdoctor {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs "
        << b.rows() << "x" << b.cols();
    throw ShapeError(msg.str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length does not equal rows * cols");
  }
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "matmul: inner dimensions differ (" << a.rows() << "x" << a.cols()
        << " * " << b.rows() << "x" << b.cols() << ")";
    throw ShapeError(msg.str());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      // Multi-hot inputs are mostly zero.
      if (aik == 0.0) continue;
      const double* b_row = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("add_matmul_tn: shape mismatch");
  }
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* b_row = b.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      double* out_row = out.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols(), b.cols());
  add_matmul_tn(out, a, b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

void add_row_vector(Matrix& m, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != m.cols()) {
    throw ShapeError("add_row_vector: bias must be 1 x cols");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
}

void add_col_sums(Matrix& out, const Matrix& m) {
  if (out.rows() != 1 || out.cols() != m.cols()) {
    throw ShapeError("add_col_sums: target must be 1 x cols");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out(0, j) += r[j];
  }
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  add_col_sums(out, m);
  return out;
}

double sum_squares(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return acc;
}

double max_abs(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data()) acc = std::max(acc, std::abs(v));
  return acc;
}

void scale_rows(Matrix& m, std::span<const double> scale) {
  if (scale.size() != m.rows()) throw ShapeError("scale_rows: length mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double& v : m.row(i)) v *= scale[i];
}

Matrix Tensor3::step(std::size_t i) const {
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(i * dim1_ * dim2_);
  return Matrix(dim1_, dim2_,
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(dim1_ * dim2_)));
}

void Tensor3::set_step(std::size_t i, const Matrix& m) {
  if (m.rows() != dim1_ || m.cols() != dim2_) throw ShapeError("Tensor3::set_step");
  std::copy(m.data().begin(), m.data().end(),
            data_.begin() + static_cast<std::ptrdiff_t>(i * dim1_ * dim2_));
}

Tensor3 Tensor3::reversed() const {
  Tensor3 out(dim0_, dim1_, dim2_);
  const std::size_t block = dim1_ * dim2_;
  for (std::size_t i = 0; i < dim0_; ++i) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(i * block), block,
                out.data_.begin() + static_cast<std::ptrdiff_t>((dim0_ - 1 - i) * block));
  }
  return out;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double SeededRng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return mean + stddev * u * factor;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double lrelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

Matrix tanh_act(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

Matrix lrelu(const Matrix& x, double slope) {
  Matrix out = x;
  for (double& v : out.data()) v = lrelu(v, slope);
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    if (r.empty()) continue;
    const double peak = *std::max_element(r.begin(), r.end());
    double total = 0.0;
    for (double& v : r) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : r) v /= total;
  }
  return out;
}

Matrix init_gaussian(std::size_t rows, std::size_t cols, SeededRng& rng) {
  if (rows == 0 || cols == 0) throw ShapeError("init_gaussian: empty shape");
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Matrix out(rows, cols);
  for (double& v : out.data()) v = rng.normal(0.0, stddev);
  return out;
}

Matrix init_identity(std::size_t n) {
  if (n == 0) throw ShapeError("init_identity: n must be positive");
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                     std::span<const double> theta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  std::vector<double> probe(theta.begin(), theta.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_grad: non-finite evaluation at coordinate " +
                              std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace ligdoctor
