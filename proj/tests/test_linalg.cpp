#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qswld/linalg.hpp"
#include "test_support.hpp"

namespace qswld {
namespace {

using linalg::kron;
using linalg::unvec;
using linalg::vec;

TEST(Kron, Identities) {
  EXPECT_EQ(kron(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)), ComplexMatrix::Identity(4, 4));
  std::mt19937_64 rng(1);
  const ComplexMatrix b = testing::random_complex(3, 2, rng);
  ComplexMatrix two(1, 1);
  two(0, 0) = 2.0;
  EXPECT_EQ(kron(two, b), (2.0 * b).eval());
  EXPECT_EQ(kron(b, ComplexMatrix::Identity(2, 3)).rows(), 6);
  EXPECT_EQ(kron(b, ComplexMatrix::Identity(2, 3)).cols(), 6);
}

TEST(Kron, MixedProduct) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexMatrix a = testing::random_complex(2, 2, rng), b = testing::random_complex(2, 2, rng);
    const ComplexMatrix c = testing::random_complex(2, 2, rng), d = testing::random_complex(2, 2, rng);
    EXPECT_LE((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-12);
  }
}

TEST(Vec, ColumnStacking) {
  ComplexVector expect(4);
  expect << 1, 0, 0, 1;
  EXPECT_EQ(vec(ComplexMatrix::Identity(2, 2)), expect);
  ComplexMatrix m(2, 2);
  m << 1, 2, 3, 4;
  ComplexVector stacked(4);
  stacked << 1, 3, 2, 4;
  EXPECT_EQ(vec(m), stacked);
  EXPECT_THROW(vec(ComplexMatrix::Zero(2, 3)), ShapeError);
  EXPECT_THROW(unvec(ComplexVector::Zero(3)), ShapeError);
}

TEST(Vec, RoundTripIsBitwise) {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 6; ++n) {
    const ComplexMatrix rho = testing::random_complex(n, n, rng);
    EXPECT_EQ(unvec(vec(rho)), rho);
  }
}

TEST(Vec, SandwichConvention) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexMatrix a = testing::random_complex(2, 2, rng), rho = testing::random_complex(2, 2, rng),
                        b = testing::random_complex(2, 2, rng);
    EXPECT_LE((vec(a * rho * b) - kron(b.transpose(), a) * vec(rho)).norm(), 1e-12);
  }
}

TEST(EigGeneral, Diagonal) {
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m.diagonal() << 1.0, 2.0, -3.0;
  const auto r = linalg::eig_general(m);
  EXPECT_NEAR(std::abs(r.leading_eigenvalue - Complex(2.0)), 0.0, 1e-14);
  EXPECT_NEAR(r.leading_right_eigenvector.norm(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(r.leading_right_eigenvector(1)), 1.0, 1e-14);
}

TEST(EigGeneral, RotationTieBreak) {
  ComplexMatrix m(2, 2);
  m << 0, 1, -1, 0;
  const auto r = linalg::eig_general(m);
  ASSERT_TRUE(r.full_spectrum);
  EXPECT_NEAR(r.leading_eigenvalue.real(), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(r.leading_eigenvalue.imag()), 1.0, 1e-14);
  ComplexVector spectrum = *r.full_spectrum;
  EXPECT_NEAR(std::abs(spectrum(0) + spectrum(1)), 0.0, 1e-14);
}

TEST(EigGeneral, TiePrefersRealAxis) {
  // Eigenvalues 1 +/- 2i and 1: all share the leading real part.
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(0, 1) = -2.0;
  m(1, 0) = 2.0;
  m(1, 1) = 1.0;
  m(2, 2) = 1.0;
  const auto r = linalg::eig_general(m);
  EXPECT_NEAR(r.leading_eigenvalue.real(), 1.0, 1e-12);
  EXPECT_NEAR(r.leading_eigenvalue.imag(), 0.0, 1e-12);
}

TEST(EigGeneral, TraceAndDeterminantIdentities) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix m = testing::random_complex(6, 6, rng);
    const auto r = linalg::eig_general(m);
    const ComplexVector& lam = *r.full_spectrum;
    EXPECT_LE(std::abs(lam.sum() - m.trace()), 1e-8);
    const Complex det = m.fullPivLu().determinant();
    EXPECT_LE(std::abs(lam.prod() - det), 1e-6 * std::abs(det));
    EXPECT_LE(r.residual, linalg::kResidualFactor * m.norm());
    for (Eigen::Index k = 0; k < lam.size(); ++k) EXPECT_LE(lam(k).real(), r.leading_eigenvalue.real() + 1e-12);
  }
}

TEST(EigGeneral, HermitianInputHasRealSpectrum) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexMatrix a = testing::random_complex(8, 8, rng);
    const ComplexMatrix h = a + a.adjoint();
    const auto r = linalg::eig_general(h);
    EXPECT_LE(r.full_spectrum->imag().cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EigGeneral, RejectsBadInput) {
  EXPECT_THROW(linalg::eig_general(ComplexMatrix::Zero(2, 3)), ShapeError);
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = std::nan("");
  EXPECT_THROW(linalg::eig_general(m), DomainError);
}

TEST(NullVector, Examples) {
  ComplexMatrix d = ComplexMatrix::Zero(3, 3);
  d.diagonal() << 0.0, 1.0, 2.0;
  const ComplexVector v = linalg::null_vector(d, 1e-10);
  EXPECT_NEAR(std::abs(v(0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(v(1)) + std::abs(v(2)), 0.0, 1e-14);

  const ComplexVector z = linalg::null_vector(ComplexMatrix::Zero(1, 1), 1e-10);
  EXPECT_NEAR(std::abs(z(0)), 1.0, 0.0);
}

TEST(NullVector, DegenerateKernel) {
  ComplexMatrix d = ComplexMatrix::Zero(3, 3);
  d(2, 2) = 1.0;
  try {
    linalg::null_vector(d, 1e-10);
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError& e) {
    EXPECT_EQ(e.multiplicity(), 2u);
  }
  EXPECT_THROW(linalg::null_vector(ComplexMatrix::Identity(2, 2), 1e-10), DegeneracyError);
}

TEST(IntegrateLinear, ZeroGeneratorIsConstant) {
  std::mt19937_64 rng(7);
  const ComplexVector v0 = testing::random_complex(4, 1, rng);
  EXPECT_EQ(linalg::integrate_linear(ComplexMatrix::Zero(4, 4), v0, 3.0, 0.1), v0);
  EXPECT_EQ(linalg::integrate_linear(testing::random_complex(4, 4, rng), v0, 0.0, 0.1), v0);
}

TEST(IntegrateLinear, Exponential) {
  ComplexMatrix m(1, 1);
  m(0, 0) = -1.0;
  ComplexVector v0(1);
  v0(0) = 1.0;
  EXPECT_NEAR(std::abs(linalg::integrate_linear(m, v0, 1.0, 1e-3)(0) - std::exp(-1.0)), 0.0, 1e-8);
}

TEST(IntegrateLinear, FourthOrderConvergence) {
  ComplexMatrix m(1, 1);
  m(0, 0) = -1.0;
  ComplexVector v0(1);
  v0(0) = 1.0;
  const double e1 = std::abs(linalg::integrate_linear(m, v0, 1.0, 0.1)(0) - std::exp(-1.0));
  const double e2 = std::abs(linalg::integrate_linear(m, v0, 1.0, 0.05)(0) - std::exp(-1.0));
  EXPECT_NEAR(e1 / e2, 16.0, 1.5);
}

TEST(IntegrateLinear, DivergenceAndDomain) {
  ComplexMatrix m(1, 1);
  m(0, 0) = 1e200;
  ComplexVector v0(1);
  v0(0) = 1e200;
  EXPECT_THROW(linalg::integrate_linear(m, v0, 1.0, 0.5), DivergenceError);
  EXPECT_THROW(linalg::integrate_linear(m, v0, 1.0, 0.0), DomainError);
  EXPECT_THROW(linalg::integrate_linear(m, v0, -1.0, 0.1), DomainError);
  EXPECT_THROW(linalg::integrate_linear(m, ComplexVector::Zero(2), 1.0, 0.1), ShapeError);
}

TEST(Rk4StepMatrix, MatchesStagedStep) {
  std::mt19937_64 rng(8);
  const ComplexMatrix m = testing::random_complex(5, 5, rng);
  const ComplexVector v0 = testing::random_complex(5, 1, rng);
  const ComplexVector staged = linalg::integrate_linear(m, v0, 0.01, 0.01);
  EXPECT_LE((linalg::rk4_step_matrix(m, 0.01) * v0 - staged).norm(), 1e-13);
}

}  // namespace
}  // namespace qswld
