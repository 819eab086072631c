#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qswld/errors.hpp"

namespace qswld {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace linalg {

// Real parts closer than this are treated as tied when picking the leading
// eigenvalue; the tie goes to the smallest |imag|.
inline constexpr double kLeadingTieTolerance = 1e-10;
// Leading eigenpair residual must satisfy ||Mv - lv|| <= kResidualFactor*||M||_F.
inline constexpr double kResidualFactor = 1e-8;

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  constexpr auto kMax = std::numeric_limits<Eigen::Index>::max();
  const auto check = [&](Eigen::Index x, Eigen::Index y) {
    if (x != 0 && y > kMax / x) throw ShapeError("kron: result dimension overflows");
    return x * y;
  };
  const Eigen::Index rows = check(a.rows(), b.rows());
  const Eigen::Index cols = check(a.cols(), b.cols());
  check(rows, cols);
  ComplexMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Column stacking: vec(rho)[i + n*j] = rho(i, j).
inline ComplexVector vec(const ComplexMatrix& rho) {
  if (rho.rows() != rho.cols()) throw ShapeError("vec: matrix must be square");
  return Eigen::Map<const ComplexVector>(rho.data(), rho.size());
}

inline ComplexMatrix unvec(const ComplexVector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw ShapeError("unvec: length " + std::to_string(v.size()) + " is not a perfect square");
  return Eigen::Map<const ComplexMatrix>(v.data(), n, n);
}

struct SpectralResult {
  Complex leading_eigenvalue;
  ComplexVector leading_right_eigenvector;
  std::optional<ComplexVector> full_spectrum;
  double residual = 0.0;
};

// Index of the eigenvalue with the largest real part, ties broken toward the
// real axis.
inline Eigen::Index leading_index(const ComplexVector& spectrum) {
  if (spectrum.size() == 0) throw ShapeError("empty spectrum");
  double max_re = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) max_re = std::max(max_re, spectrum(k).real());
  Eigen::Index best = -1;
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
    if (max_re - spectrum(k).real() >= kLeadingTieTolerance) continue;
    if (best < 0 || std::abs(spectrum(k).imag()) < std::abs(spectrum(best).imag())) best = k;
  }
  return best;
}

namespace detail {

inline void require_square_finite(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ShapeError(std::string(who) + ": matrix must be square and non-empty");
  if (!m.allFinite()) throw DomainError(std::string(who) + ": matrix has non-finite entries");
}

inline Eigen::ComplexEigenSolver<ComplexMatrix> solve(const ComplexMatrix& m, bool vectors) {
  Eigen::ComplexEigenSolver<ComplexMatrix> solver;
  const auto cap = 100 * m.rows();
  solver.setMaxIterations(cap);
  solver.compute(m, vectors);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("QR eigenvalue iteration did not converge", static_cast<std::size_t>(cap),
                           std::numeric_limits<double>::quiet_NaN());
  }
  return solver;
}

}  // namespace detail

/// All eigenvalues of a general complex matrix (complex Schur form via
/// Hessenberg reduction and shifted QR), together with the leading pair.
/// The leading eigenvector has unit 2-norm.
inline SpectralResult eig_general(const ComplexMatrix& m) {
  detail::require_square_finite(m, "eig_general");
  const auto solver = detail::solve(m, true);
  const ComplexVector& spectrum = solver.eigenvalues();
  const Eigen::Index k = leading_index(spectrum);
  SpectralResult out;
  out.leading_eigenvalue = spectrum(k);
  out.leading_right_eigenvector = solver.eigenvectors().col(k).normalized();
  out.full_spectrum = spectrum;
  out.residual = (m * out.leading_right_eigenvector - out.leading_eigenvalue * out.leading_right_eigenvector).norm();
  if (out.residual > kResidualFactor * std::max(m.norm(), 1.0)) {
    throw NumericalError("eig_general: leading eigenvector residual " + std::to_string(out.residual) +
                         " exceeds tolerance");
  }
  return out;
}

// Eigenvalues only; cheaper than eig_general when no vector is needed.
inline ComplexVector eigenvalues(const ComplexMatrix& m) {
  detail::require_square_finite(m, "eigenvalues");
  return detail::solve(m, false).eigenvalues();
}

inline Complex leading_eigenvalue(const ComplexMatrix& m) {
  const ComplexVector spectrum = eigenvalues(m);
  return spectrum(leading_index(spectrum));
}

/// Unit vector spanning the kernel of M, taken as the eigenvector of the
/// eigenvalue closest to zero. Throws DegeneracyError unless exactly one
/// eigenvalue lies within tol of zero.
inline ComplexVector null_vector(const ComplexMatrix& m, double tol = 1e-8) {
  detail::require_square_finite(m, "null_vector");
  if (!(tol > 0.0)) throw DomainError("null_vector: tolerance must be positive");
  const auto solver = detail::solve(m, true);
  const ComplexVector& spectrum = solver.eigenvalues();
  std::size_t zeros = 0;
  Eigen::Index nearest = 0;
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
    if (std::abs(spectrum(k)) <= tol) ++zeros;
    if (std::abs(spectrum(k)) < std::abs(spectrum(nearest))) nearest = k;
  }
  if (zeros != 1) throw DegeneracyError("null_vector: kernel is not one-dimensional", zeros);
  ComplexVector v = solver.eigenvectors().col(nearest).normalized();
  const double residual = (m * v).norm();
  if (residual > tol * std::max(m.norm(), 1.0)) {
    throw NumericalError("null_vector: residual " + std::to_string(residual) + " exceeds tolerance");
  }
  return v;
}

/// Classical fourth-order Runge-Kutta for v' = M v over [0, t]. The step is
/// shrunk to t / ceil(t / dt) so the final time is hit exactly.
inline ComplexVector integrate_linear(const ComplexMatrix& m, const ComplexVector& v0, double t, double dt) {
  if (!(dt > 0.0)) throw DomainError("integrate_linear: dt must be positive");
  if (!(t >= 0.0)) throw DomainError("integrate_linear: t must be non-negative");
  if (m.rows() != m.cols() || m.cols() != v0.size()) throw ShapeError("integrate_linear: dimension mismatch");
  ComplexVector v = v0;
  if (t == 0.0) return v;
  const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-12));
  const double h = t / static_cast<double>(std::max<std::size_t>(steps, 1));
  ComplexVector k1(v.size()), k2(v.size()), k3(v.size()), k4(v.size());
  for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s) {
    k1.noalias() = m * v;
    k2.noalias() = m * (v + 0.5 * h * k1);
    k3.noalias() = m * (v + 0.5 * h * k2);
    k4.noalias() = m * (v + h * k3);
    v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!v.allFinite()) {
      throw DivergenceError("integrate_linear: non-finite state after step " + std::to_string(s + 1));
    }
  }
  return v;
}

// One RK4 step for v' = M v as a matrix: sum_{k<=4} (hM)^k / k!. Applying it
// is algebraically the same update integrate_linear performs per step.
inline ComplexMatrix rk4_step_matrix(const ComplexMatrix& m, double h) {
  const ComplexMatrix a = h * m;
  ComplexMatrix term = ComplexMatrix::Identity(m.rows(), m.cols());
  ComplexMatrix out = term;
  for (int k = 1; k <= 4; ++k) {
    term = (term * a) / static_cast<double>(k);
    out += term;
  }
  return out;
}

}  // namespace linalg
}  // namespace qswld
