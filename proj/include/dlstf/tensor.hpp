#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlstf {

/// Raised when operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ActivationKind { Sigmoid, Tanh, ReLU, Identity };

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

/// Matrix product. Each output entry sums over the inner index left to right.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Matrix-vector product m * x.
Vector matvec(const Matrix& m, std::span<const double> x);

/// Returns w*x + u*h + b, the pre-activation shared by every LSTM gate.
Vector affine_combine(const Matrix& w, const Vector& x, const Matrix& u, const Vector& h,
                      const Vector& b);

double activate(double z, ActivationKind kind) noexcept;
double activate_derivative(double z, ActivationKind kind) noexcept;

Vector activation_apply(const Vector& v, ActivationKind kind);
/// Elementwise derivative of `kind`, evaluated at the pre-activation `pre`.
Vector activation_derivative(ActivationKind kind, const Vector& pre);

// In-place accumulation helpers used by the backward pass.

/// out += m^T * v
void add_transpose_matvec(const Matrix& m, std::span<const double> v, std::span<double> out);
/// m += a (outer) b
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b);

}  // namespace dlstf
