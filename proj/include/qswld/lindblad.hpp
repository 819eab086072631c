#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qswld/errors.hpp"
#include "qswld/graph.hpp"
#include "qswld/linalg.hpp"

namespace qswld {

/// Jump operator L = amplitude |dst><src|, moving the walker from src to dst.
struct Jump {
  std::size_t dst;
  std::size_t src;
  double amplitude;
};

/// Quantum stochastic walk on a directed graph: coherent hopping on the
/// undirected adjacency plus one jump operator sqrt(G_ij)|i><j| per positive
/// Google-matrix entry.
class QswModel {
 public:
  QswModel(RealMatrix hamiltonian, StochasticMatrix google, double damping, double coherent_weight)
      : h_(std::move(hamiltonian)),
        g_(std::move(google)),
        damping_(damping),
        coherent_weight_(coherent_weight) {
    const auto n = g_.size();
    if (static_cast<std::size_t>(h_.rows()) != n || h_.rows() != h_.cols()) {
      throw ShapeError("Hamiltonian and Google matrix sizes differ");
    }
    if (h_ != h_.transpose()) throw DomainError("Hamiltonian must be exactly symmetric");
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double gij = g_(i, j);
        if (gij > 0.0) jumps_.push_back({i, j, std::sqrt(gij)});
      }
    }
  }

  std::size_t size() const noexcept { return g_.size(); }
  const RealMatrix& hamiltonian() const noexcept { return h_; }
  const StochasticMatrix& google() const noexcept { return g_; }
  const std::vector<Jump>& jumps() const noexcept { return jumps_; }
  std::size_t jump_count() const noexcept { return jumps_.size(); }
  double damping() const noexcept { return damping_; }
  double coherent_weight() const noexcept { return coherent_weight_; }

  ComplexMatrix jump_operator(const Jump& k) const {
    const auto n = static_cast<Eigen::Index>(size());
    ComplexMatrix l = ComplexMatrix::Zero(n, n);
    l(static_cast<Eigen::Index>(k.dst), static_cast<Eigen::Index>(k.src)) = k.amplitude;
    return l;
  }

  // sum_k L_k^dagger L_k. Diagonal, entry j = sum_i G_ij.
  RealVector decay_rates() const {
    RealVector d = RealVector::Zero(static_cast<Eigen::Index>(size()));
    for (const auto& k : jumps_) d(static_cast<Eigen::Index>(k.src)) += k.amplitude * k.amplitude;
    return d;
  }

  // Effective non-Hermitian Hamiltonian H - (i/2) sum_k L_k^dagger L_k.
  ComplexMatrix effective_hamiltonian() const {
    ComplexMatrix heff = h_.cast<Complex>();
    heff.diagonal() -= Complex(0.0, 0.5) * decay_rates().cast<Complex>();
    return heff;
  }

 private:
  RealMatrix h_;
  StochasticMatrix g_;
  double damping_;
  double coherent_weight_;
  std::vector<Jump> jumps_;
};

inline QswModel build_qsw(const DirectedGraph& g, double damping = kDefaultDamping, double coherent_weight = 1.0) {
  if (!(coherent_weight >= 0.0) || !std::isfinite(coherent_weight)) {
    throw DomainError("coherent weight must be finite and non-negative");
  }
  RealMatrix h = coherent_weight * symmetrized_adjacency(g);
  return QswModel(std::move(h), google_matrix(g, damping), damping, coherent_weight);
}

/// Dense generator acting on column-stacked density operators.
struct Superoperator {
  ComplexMatrix matrix;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  ComplexMatrix apply(const ComplexMatrix& rho) const { return linalg::unvec(matrix * linalg::vec(rho)); }
};

/// Hermitian, unit-trace, positive semidefinite n x n matrix.
class DensityMatrix {
 public:
  static constexpr double kHermitianTolerance = 1e-10;
  static constexpr double kTraceTolerance = 1e-10;
  static constexpr double kPositivityTolerance = 1e-8;

  explicit DensityMatrix(ComplexMatrix rho) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols() || rho_.rows() == 0) throw ShapeError("density matrix must be square");
    if (!rho_.allFinite()) throw DomainError("density matrix has non-finite entries");
    const double asym = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianTolerance) {
      throw DomainError("density matrix is not Hermitian (max deviation " + std::to_string(asym) + ")");
    }
    if (std::abs(rho_.trace() - Complex(1.0)) > kTraceTolerance) throw DomainError("density matrix trace is not 1");
    if (min_eigenvalue() < -kPositivityTolerance) throw DomainError("density matrix has a negative eigenvalue");
  }

  static DensityMatrix pure(const ComplexVector& psi) {
    const ComplexVector u = psi.normalized();
    return DensityMatrix(u * u.adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return DensityMatrix(ComplexMatrix::Identity(k, k) / static_cast<double>(n));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(rho_.rows()); }
  const ComplexMatrix& matrix() const noexcept { return rho_; }
  RealVector populations() const { return rho_.diagonal().real(); }

  double min_eigenvalue() const {
    const ComplexMatrix herm = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  ComplexMatrix rho_;
};

namespace detail {

// -i[H, .] - 1/2 {sum_k L_k^dagger L_k, .}: the no-jump part of the generator.
inline ComplexMatrix no_jump_generator(const QswModel& model) {
  const auto n = static_cast<Eigen::Index>(model.size());
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix h = model.hamiltonian().cast<Complex>();
  const ComplexMatrix decay = model.decay_rates().cast<Complex>().asDiagonal();
  const Complex i{0.0, 1.0};
  return -i * (linalg::kron(id, h) - linalg::kron(h.transpose(), id)) -
         0.5 * (linalg::kron(id, decay) + linalg::kron(decay.transpose(), id));
}

// Adds weight(dst) * (conj(L) kron L) for every jump. For a rank-one
// L = a|i><j| that product has the single entry a^2 at (i + n i, j + n j).
template <typename Weight>
void add_recycling(ComplexMatrix& m, const QswModel& model, Weight&& weight) {
  const auto n = model.size();
  for (const auto& k : model.jumps()) {
    const double w = weight(k.dst);
    if (w == 0.0) continue;
    m(static_cast<Eigen::Index>(k.dst + n * k.dst), static_cast<Eigen::Index>(k.src + n * k.src)) +=
        w * k.amplitude * k.amplitude;
  }
}

}  // namespace detail

/// Lindblad generator -i[H,.] + sum_k L_k . L_k^dagger - 1/2 {L_k^dagger L_k, .}
/// in column-stacking form.
inline Superoperator liouvillian(const QswModel& model) {
  ComplexMatrix m = detail::no_jump_generator(model);
  detail::add_recycling(m, model, [](std::size_t) { return 1.0; });
  return {std::move(m)};
}

// Kernel tolerance used when extracting the stationary state.
inline constexpr double kSteadyStateTolerance = 1e-8;

/// Unique stationary state of the walk. Throws DegeneracyError if the
/// generator's kernel is not one-dimensional.
inline DensityMatrix steady_state(const QswModel& model) {
  const Superoperator l = liouvillian(model);
  ComplexVector v;
  try {
    v = linalg::null_vector(l.matrix, kSteadyStateTolerance);
  } catch (const DegeneracyError& e) {
    throw DegeneracyError("model is not relaxing: " + std::string(e.what()), e.multiplicity());
  }
  ComplexMatrix rho = linalg::unvec(v);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace();
  const double residual = (l.matrix * linalg::vec(rho)).norm();
  if (residual > kSteadyStateTolerance) {
    throw NumericalError("steady state residual " + std::to_string(residual) + " exceeds tolerance");
  }
  return DensityMatrix(std::move(rho));
}

inline DensityMatrix evolve(const QswModel& model, const DensityMatrix& rho0, double t, double dt = 1e-3) {
  if (rho0.size() != model.size()) throw ShapeError("evolve: state and model sizes differ");
  if (t == 0.0) return rho0;
  const Superoperator l = liouvillian(model);
  return DensityMatrix(linalg::unvec(linalg::integrate_linear(l.matrix, linalg::vec(rho0.matrix()), t, dt)));
}

}  // namespace qswld
