#pragma once

#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qswld/csv.hpp"
#include "qswld/errors.hpp"
#include "qswld/lindblad.hpp"
#include "qswld/linalg.hpp"
#include "qswld/parallel.hpp"

namespace qswld {

inline constexpr double kDefaultFdStep = 1e-4;
// Below this magnitude a first derivative or total activity counts as zero.
inline constexpr double kVanishingDerivative = 1e-12;

/// Counting field, one entry per node. Node i's entry tilts every jump that
/// lands on i.
class TiltVector {
 public:
  explicit TiltVector(std::vector<double> s) : s_(std::move(s)) {
    for (double x : s_) {
      if (!std::isfinite(x)) throw DomainError("tilt entries must be finite");
    }
  }

  static TiltVector uniform(std::size_t n, double value) { return TiltVector(std::vector<double>(n, value)); }
  static TiltVector zero(std::size_t n) { return uniform(n, 0.0); }

  std::size_t size() const noexcept { return s_.size(); }
  double operator[](std::size_t i) const { return s_[i]; }
  const std::vector<double>& values() const noexcept { return s_; }

  bool is_uniform() const {
    for (double x : s_) {
      if (x != s_.front()) return false;
    }
    return true;
  }

  TiltVector shifted(std::size_t i, double delta) const {
    auto copy = s_;
    copy[i] += delta;
    return TiltVector(std::move(copy));
  }

 private:
  std::vector<double> s_;
};

/// Which generator a tilt is applied to.
///   none:     W_s = L + sum_i (e^{-s_i} - 1) R_i
///   inactive: s -> +inf on every node; recycling terms dropped, leaving the
///             deterministic H_eff evolution. The tilt vector is ignored.
///   active:   s -> -inf on every node, rescaled by e^{s}; only the recycling
///             terms survive. The tilt vector acts as per-node offsets,
///             W = sum_i e^{-s_i} R_i.
/// Here R_i = sum_j conj(L_ij) kron L_ij.
enum class LimitMode { none, inactive, active };

namespace detail {

inline void require_tilt_size(const QswModel& model, const TiltVector& s) {
  if (s.size() != model.size()) {
    throw ShapeError("tilt has " + std::to_string(s.size()) + " entries for a model with " +
                     std::to_string(model.size()) + " nodes");
  }
}

}  // namespace detail

inline Superoperator tilted_superoperator(const QswModel& model, const TiltVector& s,
                                          LimitMode mode = LimitMode::none) {
  detail::require_tilt_size(model, s);
  switch (mode) {
    case LimitMode::inactive:
      return {detail::no_jump_generator(model)};
    case LimitMode::active: {
      const auto n = static_cast<Eigen::Index>(model.size());
      ComplexMatrix m = ComplexMatrix::Zero(n * n, n * n);
      detail::add_recycling(m, model, [&](std::size_t i) { return std::exp(-s[i]); });
      return {std::move(m)};
    }
    case LimitMode::none:
      break;
  }
  Superoperator w = liouvillian(model);
  detail::add_recycling(w.matrix, model, [&](std::size_t i) { return std::expm1(-s[i]); });
  return w;
}

/// Tilt applied per jump operator instead of per destination node; s_per_jump
/// follows the order of model.jumps().
inline Superoperator tilted_superoperator_per_jump(const QswModel& model, std::span<const double> s_per_jump) {
  if (s_per_jump.size() != model.jump_count()) throw ShapeError("per-jump tilt length must equal the jump count");
  Superoperator w = liouvillian(model);
  const auto n = model.size();
  for (std::size_t k = 0; k < model.jump_count(); ++k) {
    const auto& jump = model.jumps()[k];
    w.matrix(static_cast<Eigen::Index>(jump.dst + n * jump.dst), static_cast<Eigen::Index>(jump.src + n * jump.src)) +=
        std::expm1(-s_per_jump[k]) * jump.amplitude * jump.amplitude;
  }
  return w;
}

/// Dynamical free energy: largest real part in the spectrum of W_s.
inline double theta(const QswModel& model, const TiltVector& s, LimitMode mode = LimitMode::none) {
  return linalg::leading_eigenvalue(tilted_superoperator(model, s, mode).matrix).real();
}

namespace detail {

inline void require_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("finite-difference step must be positive");
}

// theta at s and at s +/- h e_i for every node.
struct ThetaStencil {
  double center = 0.0;
  std::vector<double> plus, minus;
  double h = 0.0;

  std::vector<double> first_derivative() const {
    std::vector<double> d(plus.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (plus[i] - minus[i]) / (2.0 * h);
    return d;
  }
  std::vector<double> second_derivative() const {
    std::vector<double> d(plus.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (plus[i] - 2.0 * center + minus[i]) / (h * h);
    return d;
  }
};

inline ThetaStencil theta_stencil(const QswModel& model, const TiltVector& s, double h, LimitMode mode,
                                  bool need_center) {
  require_step(h);
  detail::require_tilt_size(model, s);
  ThetaStencil st;
  st.h = h;
  if (need_center) st.center = theta(model, s, mode);
  st.plus.resize(s.size());
  st.minus.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    st.plus[i] = theta(model, s.shifted(i, h), mode);
    st.minus[i] = theta(model, s.shifted(i, -h), mode);
  }
  return st;
}

inline std::vector<double> negate(std::vector<double> v) {
  for (double& x : v) x = -x;
  return v;
}

}  // namespace detail

/// Activity alpha_i = -d theta / d s_i by central differences.
inline std::vector<double> activity(const QswModel& model, const TiltVector& s, double h = kDefaultFdStep,
                                    LimitMode mode = LimitMode::none) {
  return detail::negate(detail::theta_stencil(model, s, h, mode, false).first_derivative());
}

/// Activity at step h together with the Richardson comparison against h/2.
struct CheckedActivity {
  std::vector<double> alpha;
  std::vector<double> alpha_half_step;
  // max_i |alpha(h) - alpha(h/2)|; for an order-2 stencil the error of
  // alpha(h/2) is about a third of this.
  double max_change = 0.0;
};

inline CheckedActivity activity_checked(const QswModel& model, const TiltVector& s, double h = kDefaultFdStep,
                                        LimitMode mode = LimitMode::none) {
  CheckedActivity out{activity(model, s, h, mode), activity(model, s, 0.5 * h, mode), 0.0};
  for (std::size_t i = 0; i < out.alpha.size(); ++i) {
    out.max_change = std::max(out.max_change, std::abs(out.alpha[i] - out.alpha_half_step[i]));
  }
  return out;
}

/// Observed convergence order of the activity stencil per node, from steps
/// h, h/2, h/4: log2(|a(h) - a(h/2)| / |a(h/2) - a(h/4)|).
inline std::vector<double> activity_observed_order(const QswModel& model, const TiltVector& s, double h,
                                                   LimitMode mode = LimitMode::none) {
  const auto a1 = activity(model, s, h, mode);
  const auto a2 = activity(model, s, 0.5 * h, mode);
  const auto a4 = activity(model, s, 0.25 * h, mode);
  std::vector<double> order(a1.size());
  for (std::size_t i = 0; i < a1.size(); ++i) order[i] = std::log2(std::abs(a1[i] - a2[i]) / std::abs(a2[i] - a4[i]));
  return order;
}

/// alpha_i(0) = sum_j G_ij rho_jj of the stationary state.
inline std::vector<double> activity_via_steady_state(const QswModel& model, const DensityMatrix& rho_ss) {
  const RealVector a = model.google().matrix() * rho_ss.populations();
  return {a.data(), a.data() + a.size()};
}

inline std::vector<double> activity_via_steady_state(const QswModel& model) {
  return activity_via_steady_state(model, steady_state(model));
}

/// alpha_i(0) = Tr[O_i rho_ss] with O_i = sum_j L_ij^dagger L_ij, built from
/// the jump operators themselves.
inline std::vector<double> activity_via_observable(const QswModel& model, const DensityMatrix& rho_ss) {
  const auto n = static_cast<Eigen::Index>(model.size());
  std::vector<ComplexMatrix> observables(model.size(), ComplexMatrix::Zero(n, n));
  for (const auto& k : model.jumps()) {
    const ComplexMatrix l = model.jump_operator(k);
    observables[k.dst] += l.adjoint() * l;
  }
  std::vector<double> a(model.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (observables[i] * rho_ss.matrix()).trace().real();
  return a;
}

struct Dispersion {
  // Absent where the first derivative vanishes.
  std::vector<std::optional<double>> delta;
  // Sum of delta; absent if any component is.
  std::optional<double> delta_global;
};

namespace detail {

inline Dispersion dispersion_from(const ThetaStencil& st) {
  const auto d1 = st.first_derivative();
  const auto d2 = st.second_derivative();
  Dispersion out;
  out.delta.resize(d1.size());
  double total = 0.0;
  bool complete = true;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    if (std::abs(d1[i]) <= kVanishingDerivative) {
      complete = false;
      continue;
    }
    out.delta[i] = -d2[i] / d1[i];
    total += *out.delta[i];
  }
  if (complete) out.delta_global = total;
  return out;
}

}  // namespace detail

/// Index of dispersion delta_i = -theta_ii / theta_i (variance over mean of
/// the node-i jump count in the long-time limit).
inline Dispersion dispersion(const QswModel& model, const TiltVector& s, double h = kDefaultFdStep,
                             LimitMode mode = LimitMode::none) {
  return detail::dispersion_from(detail::theta_stencil(model, s, h, mode, true));
}

inline std::vector<double> normalized_activity(std::span<const double> alpha) {
  double total = 0.0;
  for (double a : alpha) total += a;
  if (!(total > kVanishingDerivative)) {
    throw UndefinedError("normalized activity undefined: total activity " + std::to_string(total));
  }
  std::vector<double> out(alpha.begin(), alpha.end());
  for (double& a : out) a /= total;
  return out;
}

/// Everything the thermodynamic scan reports at one tilt.
struct ThermoPoint {
  TiltVector s;
  double theta = 0.0;
  std::vector<double> alpha;
  std::optional<std::vector<double>> alpha_norm;
  std::vector<std::optional<double>> delta;
  std::optional<double> delta_global;
  // Set when this point failed; numeric fields are then meaningless.
  std::optional<std::string> error;
};

inline ThermoPoint thermo_point(const QswModel& model, const TiltVector& s, double h = kDefaultFdStep,
                                LimitMode mode = LimitMode::none) {
  const auto st = detail::theta_stencil(model, s, h, mode, true);
  ThermoPoint p{s};
  p.theta = st.center;
  p.alpha = detail::negate(st.first_derivative());
  try {
    p.alpha_norm = normalized_activity(p.alpha);
  } catch (const UndefinedError&) {
  }
  auto disp = detail::dispersion_from(st);
  p.delta = std::move(disp.delta);
  p.delta_global = disp.delta_global;
  return p;
}

/// Evaluates every grid point independently (in parallel); output order
/// matches input order. A failing point carries its error message instead of
/// aborting the scan.
inline std::vector<ThermoPoint> scan(const QswModel& model, const std::vector<TiltVector>& grid,
                                     double h = kDefaultFdStep, LimitMode mode = LimitMode::none) {
  if (grid.empty()) throw DomainError("scan grid is empty");
  detail::require_step(h);
  std::vector<std::optional<ThermoPoint>> slots(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    try {
      slots[k] = thermo_point(model, grid[k], h, mode);
    } catch (const std::exception& e) {
      ThermoPoint failed{grid[k]};
      failed.theta = std::nan("");
      failed.error = e.what();
      slots[k] = std::move(failed);
    }
  });
  std::vector<ThermoPoint> out;
  out.reserve(grid.size());
  for (auto& p : slots) out.push_back(std::move(*p));
  return out;
}

// n_points evenly spaced uniform tilts from lo to hi inclusive.
inline std::vector<TiltVector> uniform_grid(std::size_t n_nodes, double lo, double hi, std::size_t n_points) {
  if (n_points == 0) throw DomainError("grid needs at least one point");
  std::vector<TiltVector> grid;
  grid.reserve(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    const double s = n_points == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
    grid.push_back(TiltVector::uniform(n_nodes, s));
  }
  return grid;
}

/// Location of the largest global dispersion on a scan. interior is true when
/// the maximum is strictly inside the grid, i.e. a crossover candidate.
struct CrossoverSummary {
  std::optional<std::size_t> argmax;
  double max_delta_global = 0.0;
  bool interior = false;
};

inline CrossoverSummary locate_crossover(const std::vector<ThermoPoint>& points) {
  CrossoverSummary out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    if (p.error || !p.delta_global) continue;
    if (!out.argmax || *p.delta_global > out.max_delta_global) {
      out.argmax = k;
      out.max_delta_global = *p.delta_global;
    }
  }
  out.interior = out.argmax && *out.argmax > 0 && *out.argmax + 1 < points.size();
  return out;
}

/// Scan CSV: s (or s_1..s_n for non-uniform tilts), theta, alpha_i,
/// alpha_norm_i, delta_i, delta_global, error. Undefined values are empty
/// cells.
inline void write_scan_csv(std::ostream& os, const std::vector<ThermoPoint>& points, std::size_t n) {
  bool uniform = true;
  for (const auto& p : points) uniform = uniform && p.s.is_uniform();
  if (uniform) {
    os << "s";
  } else {
    for (std::size_t i = 1; i <= n; ++i) os << (i > 1 ? "," : "") << "s_" << i;
  }
  os << ",theta";
  for (std::size_t i = 1; i <= n; ++i) os << ",alpha_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",alpha_norm_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",delta_" << i;
  os << ",delta_global,error\n";
  const auto opt = [](const std::optional<double>& x) { return x ? csv::number(*x) : std::string(); };
  for (const auto& p : points) {
    if (uniform) {
      os << csv::number(p.s[0]);
    } else {
      for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << csv::number(p.s[i]);
    }
    if (p.error) {
      os << ",";
      for (std::size_t c = 0; c < 3 * n + 1; ++c) os << ",";
      std::string msg = *p.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
      }
      os << "," << msg << "\n";
      continue;
    }
    os << "," << csv::number(p.theta);
    for (double a : p.alpha) os << "," << csv::number(a);
    for (std::size_t i = 0; i < n; ++i) os << "," << (p.alpha_norm ? csv::number((*p.alpha_norm)[i]) : std::string());
    for (const auto& d : p.delta) os << "," << opt(d);
    os << "," << opt(p.delta_global) << ",\n";
  }
}

}  // namespace qswld
