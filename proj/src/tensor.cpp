#include "dlstf/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dlstf {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Identity: return "identity";
  }
  return "unknown";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "identity") return ActivationKind::Identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

namespace {

/// acc[i] += m(i, 0) * x[0] + m(i, 1) * x[1] + ..., one term at a time in
/// column order. Four rows run side by side as independent sums.
void accumulate_rows(const Matrix& m, const double* x, double* acc) {
  const std::size_t rows = m.rows(), cols = m.cols();
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double* r0 = m.row(i).data();
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    double a0 = acc[i], a1 = acc[i + 1], a2 = acc[i + 2], a3 = acc[i + 3];
    for (std::size_t k = 0; k < cols; ++k) {
      const double xk = x[k];
      a0 += r0[k] * xk;
      a1 += r1[k] * xk;
      a2 += r2[k] * xk;
      a3 += r3[k] * xk;
    }
    acc[i] = a0;
    acc[i + 1] = a1;
    acc[i + 2] = a2;
    acc[i + 3] = a3;
  }
  for (; i < rows; ++i) {
    const double* r = m.row(i).data();
    double a = acc[i];
    for (std::size_t k = 0; k < cols; ++k) a += r[k] * x[k];
    acc[i] = a;
  }
}

}  // namespace

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) {
    throw ShapeError("matvec: " + m.shape_string() + " times vector of length " +
                     std::to_string(x.size()));
  }
  Vector out(m.rows());
  accumulate_rows(m, x.data(), out.span().data());
  return out;
}

Vector affine_combine(const Matrix& w, const Vector& x, const Matrix& u, const Vector& h,
                      const Vector& b) {
  if (w.cols() != x.size() || u.cols() != h.size() || w.rows() != b.size() ||
      u.rows() != b.size()) {
    throw ShapeError("affine_combine: W " + w.shape_string() + ", x " + std::to_string(x.size()) +
                     ", U " + u.shape_string() + ", h " + std::to_string(h.size()) + ", b " +
                     std::to_string(b.size()));
  }
  Vector out(b.size());
  double* acc = out.span().data();
  accumulate_rows(w, x.span().data(), acc);
  accumulate_rows(u, h.span().data(), acc);
  for (std::size_t i = 0; i < b.size(); ++i) acc[i] += b[i];
  return out;
}

double activate(double z, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::Sigmoid:
      // Split on sign so exp never overflows.
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
    case ActivationKind::Tanh: return std::tanh(z);
    case ActivationKind::ReLU: return z > 0.0 ? z : 0.0;
    case ActivationKind::Identity: return z;
  }
  return z;
}

double activate_derivative(double z, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::Sigmoid: {
      const double s = activate(z, ActivationKind::Sigmoid);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Identity: return 1.0;
  }
  return 1.0;
}

Vector activation_apply(const Vector& v, ActivationKind kind) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [kind](double z) { return activate(z, kind); });
  return out;
}

Vector activation_derivative(ActivationKind kind, const Vector& pre) {
  Vector out(pre.size());
  std::transform(pre.begin(), pre.end(), out.begin(),
                 [kind](double z) { return activate_derivative(z, kind); });
  return out;
}

void add_transpose_matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (m.rows() != v.size() || m.cols() != out.size()) {
    throw ShapeError("add_transpose_matvec: " + m.shape_string() + " with v " +
                     std::to_string(v.size()) + ", out " + std::to_string(out.size()));
  }
  // Eight outputs at a time stay in registers while the rows stream past;
  // each output still sums rows in order.
  constexpr std::size_t kBlock = 8;
  const std::size_t rows = m.rows(), cols = m.cols();
  const double* base = m.span().data();
  std::size_t k0 = 0;
  for (; k0 + kBlock <= cols; k0 += kBlock) {
    double a[kBlock];
    for (std::size_t j = 0; j < kBlock; ++j) a[j] = out[k0 + j];
    for (std::size_t i = 0; i < rows; ++i) {
      const double vi = v[i];
      const double* r = base + i * cols + k0;
      for (std::size_t j = 0; j < kBlock; ++j) a[j] += r[j] * vi;
    }
    for (std::size_t j = 0; j < kBlock; ++j) out[k0 + j] = a[j];
  }
  for (; k0 < cols; ++k0) {
    double a = out[k0];
    for (std::size_t i = 0; i < rows; ++i) a += base[i * cols + k0] * v[i];
    out[k0] = a;
  }
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (m.rows() != a.size() || m.cols() != b.size()) {
    throw ShapeError("add_outer: " + m.shape_string() + " with " + std::to_string(a.size()) +
                     "x" + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    auto r = m.row(i);
#pragma omp simd
    for (std::size_t k = 0; k < b.size(); ++k) r[k] += ai * b[k];
  }
}

}  // namespace dlstf
