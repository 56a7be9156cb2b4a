// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Dense row-major matrices, a step-major 3-D tensor, a platform-stable
// seeded generator, activations, initializers and a central-difference
// gradient oracle. Everything is double precision.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ligdoctor {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// transpose(a) * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * transpose(b)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// out += transpose(a) * b; used for gradient accumulation.
void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
// Adds a 1 x cols bias to every row.
void add_row_vector(Matrix& m, const Matrix& bias);
// 1 x cols column sums.
Matrix col_sums(const Matrix& m);
// out += column sums of m
void add_col_sums(Matrix& out, const Matrix& m);
double sum_squares(const Matrix& m);
double max_abs(const Matrix& m);
// Scales row r of m by scale[r].
void scale_rows(Matrix& m, std::span<const double> scale);

// Step-major (admission, patient, feature) tensor; each step is a
// contiguous patients x features block.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t dim0, std::size_t dim1, std::size_t dim2)
      : dim0_(dim0), dim1_(dim1), dim2_(dim2), data_(dim0 * dim1 * dim2, 0.0) {}

  std::size_t dim0() const { return dim0_; }
  std::size_t dim1() const { return dim1_; }
  std::size_t dim2() const { return dim2_; }

  double& operator()(std::size_t i, std::size_t h, std::size_t j) {
    return data_[(i * dim1_ + h) * dim2_ + j];
  }
  double operator()(std::size_t i, std::size_t h, std::size_t j) const {
    return data_[(i * dim1_ + h) * dim2_ + j];
  }

  Matrix step(std::size_t i) const;
  void set_step(std::size_t i, const Matrix& m);
  std::span<const double> cell(std::size_t i, std::size_t h) const {
    return {data_.data() + (i * dim1_ + h) * dim2_, dim2_};
  }

  // Reverses the step axis.
  Tensor3 reversed() const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t dim0_ = 0;
  std::size_t dim1_ = 0;
  std::size_t dim2_ = 0;
  std::vector<double> data_;
};

// 64-bit Mersenne twister (fully specified by the standard) with hand-rolled
// distributions, so draw sequences do not depend on the standard library's
// distribution implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent child seed; used for per-job seeding.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

double sigmoid(double x);
double lrelu(double x, double slope);

Matrix sigmoid(const Matrix& x);
Matrix tanh_act(const Matrix& x);
Matrix lrelu(const Matrix& x, double slope);
Matrix softmax_rows(const Matrix& x);

// Zero-mean Gaussian with standard deviation sqrt(2 / (rows + cols)).
Matrix init_gaussian(std::size_t rows, std::size_t cols, SeededRng& rng);
Matrix init_identity(std::size_t n);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(t + eps e_i) - f(t - eps e_i)) / (2 eps).
// Throws std::domain_error when f is non-finite at a probe point.
std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                     std::span<const double> theta,
                                     double eps);

}  // namespace ligdoctor
