#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qswld/csv.hpp"
#include "qswld/errors.hpp"
#include "qswld/lindblad.hpp"
#include "qswld/linalg.hpp"
#include "qswld/parallel.hpp"
#include "qswld/random.hpp"
#include "qswld/tilt.hpp"

namespace qswld {

inline constexpr double kDefaultTrajectoryDt = 1e-3;
// Jump times are refined by bisection to this width.
inline constexpr double kJumpTimeResolution = 1e-10;

struct JumpEvent {
  double time;
  std::size_t dst;
  std::size_t src;

  bool operator==(const JumpEvent&) const = default;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double t_final = 0.0;
  std::vector<JumpEvent> jump_events;
  // counts[i]: jumps that landed on node i.
  std::vector<std::uint64_t> counts;
  // Normalized state at each requested sample time.
  std::vector<ComplexVector> samples;

  bool operator==(const TrajectoryRecord& o) const {
    if (seed != o.seed || stream != o.stream || t_final != o.t_final || jump_events != o.jump_events ||
        counts != o.counts || samples.size() != o.samples.size()) {
      return false;
    }
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (samples[k] != o.samples[k]) return false;
    }
    return true;
  }
};

struct SimulationOptions {
  // Sorted times in (0, t_max] at which the normalized state is stored.
  std::vector<double> sample_times;
  bool record_events = true;
};

namespace detail {

inline void require_unit(const ComplexVector& psi, std::size_t n) {
  if (static_cast<std::size_t>(psi.size()) != n) throw ShapeError("initial state dimension does not match the model");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw DomainError("initial state must have unit norm");
}

// Piecewise-deterministic evolution under H_eff with jumps located by the
// norm-decay method: draw r, propagate the unnormalized state until
// ||psi||^2 falls to r, bisect inside the bracketing step, then jump.
class JumpIntegrator {
 public:
  JumpIntegrator(const QswModel& model, double dt)
      : model_(model),
        generator_(-Complex(0.0, 1.0) * model.effective_hamiltonian()),
        dt_(dt),
        full_step_(linalg::rk4_step_matrix(generator_, dt)) {
    for (const auto& k : model.jumps()) weights_.push_back(k.amplitude * k.amplitude);
  }

  TrajectoryRecord run(const ComplexVector& psi0, double t_max, Philox4x32& rng, const SimulationOptions& opts) const {
    const std::size_t n = model_.size();
    TrajectoryRecord rec;
    rec.t_final = t_max;
    rec.counts.assign(n, 0);
    ComplexVector psi = psi0;
    ComplexVector next(psi.size());
    double norm2 = psi.squaredNorm();
    double threshold = rng.uniform_open_closed();
    double t = 0.0;
    std::size_t next_sample = 0;
    while (t < t_max) {
      double stop = t_max;
      if (next_sample < opts.sample_times.size()) stop = std::min(stop, opts.sample_times[next_sample]);
      const double h = std::min(dt_, stop - t);
      if (h == dt_) {
        next.noalias() = full_step_ * psi;
      } else {
        next = partial_step(psi, h);
      }
      const double next_norm2 = next.squaredNorm();
      if (!std::isfinite(next_norm2)) throw DivergenceError("trajectory state became non-finite at t=" + std::to_string(t));
      if (next_norm2 > norm2 * (1.0 + 1e-12)) {
        throw ModelError("norm grew between jumps at t=" + std::to_string(t) + "; H_eff is not dissipative");
      }
      if (next_norm2 > threshold) {
        psi.swap(next);
        norm2 = next_norm2;
        t = (h == stop - t) ? stop : t + h;
        while (next_sample < opts.sample_times.size() && opts.sample_times[next_sample] <= t) {
          rec.samples.push_back(psi / std::sqrt(norm2));
          ++next_sample;
        }
        continue;
      }
      // The norm crossed the threshold inside (t, t + h]: bisect.
      double lo = 0.0;
      double hi = h;
      while (hi - lo > kJumpTimeResolution) {
        const double mid = 0.5 * (lo + hi);
        if (partial_step(psi, mid).squaredNorm() > threshold) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const ComplexVector at_jump = partial_step(psi, hi);
      const double tau = t + hi;
      const std::size_t k = select_jump(at_jump, rng);
      const auto& jump = model_.jumps()[k];
      const Complex amp = jump.amplitude * at_jump(static_cast<Eigen::Index>(jump.src));
      psi.setZero();
      psi(static_cast<Eigen::Index>(jump.dst)) = amp / std::abs(amp);
      norm2 = 1.0;
      ++rec.counts[jump.dst];
      if (opts.record_events) rec.jump_events.push_back({tau, jump.dst, jump.src});
      threshold = rng.uniform_open_closed();
      t = tau;
    }
    while (next_sample < opts.sample_times.size()) {
      rec.samples.push_back(psi / std::sqrt(norm2));
      ++next_sample;
    }
    return rec;
  }

 private:
  ComplexVector partial_step(const ComplexVector& psi, double h) const {
    const ComplexVector k1 = generator_ * psi;
    const ComplexVector k2 = generator_ * (psi + 0.5 * h * k1);
    const ComplexVector k3 = generator_ * (psi + 0.5 * h * k2);
    const ComplexVector k4 = generator_ * (psi + h * k3);
    return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Picks jump k with probability ||L_k psi||^2 / sum_k' ||L_k' psi||^2.
  std::size_t select_jump(const ComplexVector& psi, Philox4x32& rng) const {
    const auto& jumps = model_.jumps();
    double total = 0.0;
    for (std::size_t k = 0; k < jumps.size(); ++k) total += weights_[k] * std::norm(psi(static_cast<Eigen::Index>(jumps[k].src)));
    if (!(total > 0.0)) throw NumericalError("no jump channel has positive weight");
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < jumps.size(); ++k) {
      const double w = weights_[k] * std::norm(psi(static_cast<Eigen::Index>(jumps[k].src)));
      if (w <= 0.0) continue;
      acc += w;
      last_positive = k;
      if (target < acc) return k;
    }
    return last_positive;
  }

  const QswModel& model_;
  ComplexMatrix generator_;
  double dt_;
  ComplexMatrix full_step_;
  std::vector<double> weights_;
};

}  // namespace detail

/// One quantum-jump trajectory on the stream (seed, stream).
inline TrajectoryRecord simulate(const QswModel& model, const ComplexVector& psi0, double t_max,
                                 double dt = kDefaultTrajectoryDt, std::uint64_t seed = 0, std::uint64_t stream = 0,
                                 const SimulationOptions& opts = {}) {
  if (!(t_max > 0.0) || !(dt > 0.0)) throw DomainError("simulate: t_max and dt must be positive");
  detail::require_unit(psi0, model.size());
  for (std::size_t k = 0; k < opts.sample_times.size(); ++k) {
    const double ts = opts.sample_times[k];
    if (!(ts > 0.0 && ts <= t_max) || (k > 0 && ts < opts.sample_times[k - 1])) {
      throw DomainError("sample times must be sorted and lie in (0, t_max]");
    }
  }
  Philox4x32 rng(seed, stream);
  auto rec = detail::JumpIntegrator(model, dt).run(psi0, t_max, rng, opts);
  rec.seed = seed;
  rec.stream = stream;
  return rec;
}

/// Initial condition for an ensemble: a mixture of pure states, one of which
/// is drawn per trajectory.
class InitialCondition {
 public:
  static InitialCondition pure(ComplexVector psi) {
    InitialCondition ic;
    ic.states_.push_back(psi.normalized());
    ic.weights_.push_back(1.0);
    return ic;
  }

  // Equal-amplitude superposition of all nodes.
  static InitialCondition uniform(std::size_t n) {
    return pure(ComplexVector::Constant(static_cast<Eigen::Index>(n), Complex(1.0 / std::sqrt(static_cast<double>(n)))));
  }

  // Eigen-ensemble of the stationary state; averaging the drawn states
  // reproduces rho_ss exactly.
  static InitialCondition steady(const QswModel& model) {
    const DensityMatrix rho = steady_state(model);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho.matrix() + rho.matrix().adjoint()));
    InitialCondition ic;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double p = es.eigenvalues()(k);
      if (p <= 0.0) continue;
      ic.states_.push_back(es.eigenvectors().col(k));
      ic.weights_.push_back(p);
    }
    return ic;
  }

  const ComplexVector& draw(Philox4x32& rng) const {
    if (states_.size() == 1) return states_.front();
    double total = 0.0;
    for (double w : weights_) total += w;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < states_.size(); ++k) {
      acc += weights_[k];
      if (target < acc) return states_[k];
    }
    return states_.back();
  }

  std::size_t size() const { return states_.size(); }

 private:
  std::vector<ComplexVector> states_;
  std::vector<double> weights_;
};

struct EnsembleStats {
  std::size_t n_traj = 0;
  double t_max = 0.0;
  // [K_i]_ave / t
  std::vector<double> mean_rate;
  // Var(K_i) / t; its long-time limit is d^2 theta / d s_i^2.
  std::vector<double> var_rate;
  // Var(K_i) / [K_i]_ave
  std::vector<double> dispersion_hat;
  // Standard error of mean_rate: sample std of K_i / t / sqrt(n_traj).
  std::vector<double> standard_errors;
  // Delta-method standard error of dispersion_hat.
  std::vector<double> dispersion_standard_errors;
};

namespace detail {

// Sample moments of per-trajectory counts, accumulated in index order.
inline EnsembleStats summarize(const std::vector<std::vector<std::uint64_t>>& counts, std::size_t n, double t_max) {
  const auto m = static_cast<double>(counts.size());
  EnsembleStats st;
  st.n_traj = counts.size();
  st.t_max = t_max;
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& c : counts) mean += static_cast<double>(c[i]);
    mean /= m;
    double m2 = 0.0, m4 = 0.0;
    for (const auto& c : counts) {
      const double d = static_cast<double>(c[i]) - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    const double var = m2 / (m - 1.0);
    m4 /= m;
    const double pop_var = m2 / m;
    const double se_mean_count = std::sqrt(var / m);
    // Var of the sample variance ~ (mu4 - sigma^4 (m-3)/(m-1)) / m.
    const double var_of_var = std::max(0.0, (m4 - pop_var * pop_var * (m - 3.0) / (m - 1.0)) / m);
    double disp = 0.0, disp_se = std::numeric_limits<double>::infinity();
    if (mean > 0.0) {
      disp = var / mean;
      disp_se = std::sqrt(var_of_var / (mean * mean) + var * var * se_mean_count * se_mean_count / std::pow(mean, 4));
    }
    st.mean_rate.push_back(mean / t_max);
    st.var_rate.push_back(var / t_max);
    st.dispersion_hat.push_back(disp);
    st.standard_errors.push_back(se_mean_count / t_max);
    st.dispersion_standard_errors.push_back(disp_se);
  }
  return st;
}

}  // namespace detail

/// Runs n_traj independent trajectories on streams (seed0, 0..n_traj-1) and
/// reports per-node counting statistics. Results do not depend on the worker
/// count.
inline EnsembleStats ensemble_stats(const QswModel& model, const InitialCondition& initial, double t_max, double dt,
                                    std::size_t n_traj, std::uint64_t seed0) {
  if (n_traj < 2) throw DomainError("ensemble_stats needs at least two trajectories");
  if (!(t_max > 0.0) || !(dt > 0.0)) throw DomainError("ensemble_stats: t_max and dt must be positive");
  const detail::JumpIntegrator integrator(model, dt);
  SimulationOptions opts;
  opts.record_events = false;
  std::vector<std::vector<std::uint64_t>> counts(n_traj);
  parallel_for(n_traj, [&](std::size_t idx) {
    Philox4x32 rng(seed0, idx);
    const ComplexVector& psi0 = initial.draw(rng);
    counts[idx] = integrator.run(psi0, t_max, rng, opts).counts;
  });
  return detail::summarize(counts, model.size(), t_max);
}

inline EnsembleStats ensemble_stats(const QswModel& model, const ComplexVector& psi0, double t_max, double dt,
                                    std::size_t n_traj, std::uint64_t seed0) {
  detail::require_unit(psi0, model.size());
  return ensemble_stats(model, InitialCondition::pure(psi0), t_max, dt, n_traj, seed0);
}

/// Ensemble average of |psi><psi| at the given times, with the entrywise
/// standard error of the mean.
struct UnravelingAverage {
  std::vector<ComplexMatrix> mean;
  std::vector<RealMatrix> standard_error;
};

inline UnravelingAverage unraveling_average(const QswModel& model, const InitialCondition& initial,
                                            const std::vector<double>& times, double dt, std::size_t n_traj,
                                            std::uint64_t seed0) {
  if (times.empty() || n_traj < 2) throw DomainError("unraveling_average needs sample times and >= 2 trajectories");
  const double t_max = times.back();
  const detail::JumpIntegrator integrator(model, dt);
  SimulationOptions opts;
  opts.sample_times = times;
  opts.record_events = false;
  std::vector<std::vector<ComplexVector>> samples(n_traj);
  parallel_for(n_traj, [&](std::size_t idx) {
    Philox4x32 rng(seed0, idx);
    const ComplexVector& psi0 = initial.draw(rng);
    samples[idx] = integrator.run(psi0, t_max, rng, opts).samples;
  });
  const auto n = static_cast<Eigen::Index>(model.size());
  const auto m = static_cast<double>(n_traj);
  UnravelingAverage out;
  for (std::size_t s = 0; s < times.size(); ++s) {
    ComplexMatrix sum = ComplexMatrix::Zero(n, n);
    RealMatrix sum_re2 = RealMatrix::Zero(n, n), sum_im2 = RealMatrix::Zero(n, n);
    for (const auto& traj : samples) {
      const ComplexMatrix p = traj[s] * traj[s].adjoint();
      sum += p;
      sum_re2 += p.real().cwiseAbs2();
      sum_im2 += p.imag().cwiseAbs2();
    }
    const ComplexMatrix mean = sum / m;
    const RealMatrix var_re = (sum_re2 / m - mean.real().cwiseAbs2()) * (m / (m - 1.0));
    const RealMatrix var_im = (sum_im2 / m - mean.imag().cwiseAbs2()) * (m / (m - 1.0));
    out.mean.push_back(mean);
    out.standard_error.push_back(((var_re + var_im).cwiseMax(0.0) / m).cwiseSqrt());
  }
  return out;
}

struct IntegratedTheta {
  double theta = 0.0;
  // Re(lambda_0) - Re(lambda_1) of W_s; the window slope is accurate once
  // gap * 0.8 * t_max >> 1.
  double spectral_gap = 0.0;
  // log Tr rho(s, t) at the sample times.
  std::vector<double> times;
  std::vector<double> log_trace;
};

/// theta(s) as the long-time slope of log Tr rho(s, t), with rho(s, 0) = I/n
/// evolved under W_s. The state is rescaled to unit trace every renorm_every
/// samples and the log of the factor accumulated, so nothing overflows.
/// The slope is a least-squares fit over the last 20% of [0, t_max].
inline IntegratedTheta theta_by_integration(const QswModel& model, const TiltVector& s, double t_max, double dt,
                                            LimitMode mode = LimitMode::none, std::size_t n_samples = 100,
                                            std::size_t renorm_every = 1) {
  if (!(t_max > 0.0) || !(dt > 0.0)) throw DomainError("theta_by_integration: t_max and dt must be positive");
  if (n_samples < 5 || renorm_every == 0) throw DomainError("theta_by_integration: bad sampling parameters");
  const Superoperator w = tilted_superoperator(model, s, mode);
  const auto n = static_cast<Eigen::Index>(model.size());
  ComplexVector v = linalg::vec(ComplexMatrix::Identity(n, n) / static_cast<double>(n));
  const double interval = t_max / static_cast<double>(n_samples);
  const auto trace_of = [n](const ComplexVector& x) {
    Complex tr = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) tr += x(i + n * i);
    return tr.real();
  };

  IntegratedTheta out;
  double log_scale = 0.0;
  for (std::size_t k = 1; k <= n_samples; ++k) {
    v = linalg::integrate_linear(w.matrix, v, interval, dt);
    const double tr = trace_of(v);
    if (!(tr > 0.0) || !std::isfinite(tr)) throw DivergenceError("tilted trace left (0, inf)");
    out.times.push_back(interval * static_cast<double>(k));
    out.log_trace.push_back(log_scale + std::log(tr));
    if (k % renorm_every == 0) {
      log_scale += std::log(tr);
      v /= tr;
    }
  }

  const double window_start = 0.8 * t_max;
  double st = 0, sy = 0, stt = 0, sty = 0, cnt = 0;
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    if (out.times[k] < window_start - 1e-12 * t_max) continue;
    const double x = out.times[k], y = out.log_trace[k];
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
    cnt += 1;
  }
  out.theta = (cnt * sty - st * sy) / (cnt * stt - st * st);

  ComplexVector spectrum = linalg::eigenvalues(w.matrix);
  std::vector<double> re(static_cast<std::size_t>(spectrum.size()));
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) re[static_cast<std::size_t>(k)] = spectrum(k).real();
  std::sort(re.begin(), re.end(), std::greater<>());
  out.spectral_gap = re.size() > 1 ? re[0] - re[1] : std::numeric_limits<double>::infinity();
  return out;
}

inline void write_events_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << "time,dst,src\n";
  for (const auto& e : rec.jump_events) os << csv::number(e.time) << ',' << e.dst << ',' << e.src << '\n';
}

}  // namespace qswld
