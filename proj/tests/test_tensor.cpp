#include <gtest/gtest.h>

#include <cmath>

#include "dlstf/rng.hpp"
#include "dlstf/tensor.hpp"

using namespace dlstf;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.span()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Reference product written out independently of the library.
Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matmul, SmallProduct) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  const Matrix expected{{1 * 5 + 2 * 6}, {3 * 5 + 4 * 6}};
  EXPECT_EQ(matmul(a, b), expected);
  EXPECT_EQ(matmul(a, b), (Matrix{{17}, {39}}));
}

TEST(Matmul, ZeroAnnihilates) {
  Rng rng(3);
  const Matrix any = random_matrix(rng, 4, 5);
  EXPECT_EQ(matmul(Matrix(3, 4), any), Matrix(3, 5));
}

TEST(Matmul, MatchesNaiveTripleLoopExactly) {
  Rng rng(11);
  const Matrix a = random_matrix(rng, 7, 9);
  const Matrix b = random_matrix(rng, 9, 4);
  EXPECT_EQ(matmul(a, b), naive_product(a, b));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(4, 5));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
}

TEST(Matmul, AssociativeWithinTolerance) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d1 = 1 + rng.below(16), d2 = 1 + rng.below(16), d3 = 1 + rng.below(16),
               d4 = 1 + rng.below(16);
    const Matrix a = random_matrix(rng, d1, d2);
    const Matrix b = random_matrix(rng, d2, d3);
    const Matrix c = random_matrix(rng, d3, d4);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    double worst = 0.0;
    for (std::size_t k = 0; k < left.size(); ++k) {
      worst = std::max(worst, std::abs(left.span()[k] - right.span()[k]));
    }
    ASSERT_LT(worst, 1e-9) << "trial " << trial;
  }
}

TEST(Matmul, Pure) {
  Rng rng(5);
  const Matrix a = random_matrix(rng, 6, 6);
  const Matrix b = random_matrix(rng, 6, 6);
  EXPECT_EQ(matmul(a, b), matmul(a, b));
}

TEST(Matvec, ShapeMismatchThrows) {
  const Vector x{1, 2};
  EXPECT_THROW(matvec(Matrix(2, 3), x.span()), ShapeError);
}

TEST(AffineCombine, BiasPassesThroughZeroWeights) {
  const Vector out = affine_combine(Matrix(2, 3), Vector{1, 1, 1}, Matrix(2, 2), Vector{5, 5},
                                    Vector{1, 2});
  EXPECT_EQ(out, (Vector{1, 2}));
}

TEST(AffineCombine, ScalarHandCase) {
  const Vector out =
      affine_combine(Matrix::identity(1), Vector{3}, Matrix::identity(1), Vector{4}, Vector{-7});
  EXPECT_EQ(out, (Vector{3.0 + 4.0 - 7.0}));
}

TEST(AffineCombine, EmptyBias) {
  const Vector out = affine_combine(Matrix(0, 2), Vector{1, 2}, Matrix(0, 0), Vector{}, Vector{});
  EXPECT_TRUE(out.empty());
}

TEST(AffineCombine, ShapeErrors) {
  EXPECT_THROW(affine_combine(Matrix(2, 3), Vector{1, 2}, Matrix(2, 2), Vector{1, 2},
                              Vector{0, 0}),
               ShapeError);
  EXPECT_THROW(affine_combine(Matrix(2, 2), Vector{1, 2}, Matrix(3, 2), Vector{1, 2},
                              Vector{0, 0}),
               ShapeError);
  EXPECT_THROW(affine_combine(Matrix(2, 2), Vector{1, 2}, Matrix(2, 2), Vector{1, 2},
                              Vector{0, 0, 0}),
               ShapeError);
}

TEST(AffineCombine, MatchesSeparateProducts) {
  Rng rng(9);
  const Matrix w = random_matrix(rng, 5, 3);
  const Matrix u = random_matrix(rng, 5, 5);
  Vector x(3), h(5), b(5);
  for (double& v : x) v = rng.uniform(-1, 1);
  for (double& v : h) v = rng.uniform(-1, 1);
  for (double& v : b) v = rng.uniform(-1, 1);
  const Vector out = affine_combine(w, x, u, h, b);
  for (std::size_t r = 0; r < 5; ++r) {
    double wx = 0, uh = 0;
    for (std::size_t k = 0; k < 3; ++k) wx += w(r, k) * x[k];
    for (std::size_t k = 0; k < 5; ++k) uh += u(r, k) * h[k];
    EXPECT_NEAR(out[r], wx + uh + b[r], 1e-15);
  }
}

TEST(Activation, KnownValues) {
  EXPECT_EQ(activation_apply(Vector{0}, ActivationKind::Sigmoid), (Vector{0.5}));
  EXPECT_EQ(activation_apply(Vector{0}, ActivationKind::Tanh), (Vector{0}));
  EXPECT_EQ(activation_apply(Vector{-2}, ActivationKind::ReLU), (Vector{0}));
  EXPECT_EQ(activation_apply(Vector{3}, ActivationKind::ReLU), (Vector{3}));
  EXPECT_EQ(activation_apply(Vector{-1.5}, ActivationKind::Identity), (Vector{-1.5}));
}

TEST(Activation, SigmoidDerivativeAtZero) {
  const double d = activation_derivative(ActivationKind::Sigmoid, Vector{0})[0];
  EXPECT_EQ(d, 0.25);
  const double step = 1e-6;
  const double fd = (1.0 / (1.0 + std::exp(-step)) - 1.0 / (1.0 + std::exp(step))) / (2 * step);
  EXPECT_NEAR(d, fd, 1e-8);
}

TEST(Activation, SaturationStaysFinite) {
  const Vector big{-1000, -40, 40, 1000};
  for (auto kind : {ActivationKind::Sigmoid, ActivationKind::Tanh}) {
    for (double v : activation_apply(big, kind)) EXPECT_TRUE(std::isfinite(v));
    for (double v : activation_derivative(kind, big)) EXPECT_TRUE(std::isfinite(v));
  }
  const Vector s = activation_apply(big, ActivationKind::Sigmoid);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[3], 1.0);
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
  Rng rng(77);
  const double step = 1e-5;
  for (auto kind : {ActivationKind::Sigmoid, ActivationKind::Tanh, ActivationKind::ReLU,
                    ActivationKind::Identity}) {
    for (int k = 0; k < 1000; ++k) {
      const double z = rng.uniform(-5.0, 5.0);
      if (kind == ActivationKind::ReLU && std::abs(z) <= step) continue;  // kink
      const double fd = (activate(z + step, kind) - activate(z - step, kind)) / (2 * step);
      const double a = activate_derivative(z, kind);
      const double rel = std::abs(a - fd) / std::max(1e-12, std::abs(a) + std::abs(fd));
      ASSERT_LT(rel, 1e-6) << to_string(kind) << " at z=" << z;
    }
  }
}

TEST(Activation, NamesRoundTrip) {
  for (auto kind : {ActivationKind::Sigmoid, ActivationKind::Tanh, ActivationKind::ReLU,
                    ActivationKind::Identity}) {
    EXPECT_EQ(activation_from_string(to_string(kind)), kind);
  }
  EXPECT_THROW(activation_from_string("softmax"), std::invalid_argument);
}

TEST(Accumulate, TransposeMatvecAndOuter) {
  const Matrix m{{1, 2}, {3, 4}, {5, 6}};
  Vector out{1, 1};
  add_transpose_matvec(m, Vector{1, 0, -1}.span(), out.span());
  EXPECT_EQ(out, (Vector{1 + 1 - 5, 1 + 2 - 6}));

  Matrix acc(2, 3, 1.0);
  add_outer(acc, Vector{1, 2}.span(), Vector{3, 4, 5}.span());
  EXPECT_EQ(acc, (Matrix{{4, 5, 6}, {7, 9, 11}}));
}
