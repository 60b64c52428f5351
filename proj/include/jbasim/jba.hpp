// Driven Kerr resonator used as a bifurcation amplifier: steady states, the
// bistable window, stochastic field trajectories and escape statistics.
#ifndef JBASIM_JBA_HPP
#define JBASIM_JBA_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jbasim/core.hpp"
#include "jbasim/parallel.hpp"
#include "jbasim/stats.hpp"

namespace jbasim {

using Complex = std::complex<double>;

struct JBAParams {
  double fc = 6.4535;        // GHz
  double q0 = 685.0;
  double kappa = 6.4535 / 685.0;  // GHz, linewidth fC/Q0
  double ic = 0.72;          // uA, recorded for provenance only
  double kerr = -8.0e-4;     // GHz per photon
  double noise_temp = 0.06;  // K

  static JBAParams make(double fc, double q0, double kerr, double noise_temp, double ic = 0.72) {
    JBAParams p;
    p.fc = fc;
    p.q0 = q0;
    p.kappa = fc / q0;
    p.ic = ic;
    p.kerr = kerr;
    p.noise_temp = noise_temp;
    p.validate();
    return p;
  }

  void validate() const {
    require(q0 > 0.0, ErrorKind::kInvalidArgument, "Q0 must be > 0");
    require(std::abs(kappa - fc / q0) <= 1e-9 * kappa, ErrorKind::kInvalidArgument, "kappa must equal fC/Q0");
    require(kerr < 0.0, ErrorKind::kInvalidArgument, "Kerr constant must be negative");
    require(noise_temp > 0.0, ErrorKind::kInvalidArgument, "noise temperature must be > 0");
  }

  double kappa_rate() const { return angular(kappa); }  // rad/ns
};

struct DriveConfig {
  double f_drive = 6.4365;           // GHz
  double power_dbm_fridge = -30.0;   // dB re 1 mW at the fridge input
  double attenuation_db = -77.0;
};

/// Drive amplitude in GHz such that (2 pi eps)^2 = kappa_rate * incident photon flux.
inline double power_to_epsilon(const JBAParams& p, const DriveConfig& d) {
  require(d.attenuation_db <= 0.0, ErrorKind::kInvalidArgument, "attenuation must be <= 0 dB");
  const double watts = 1e-3 * db_to_power_ratio(d.power_dbm_fridge + d.attenuation_db);
  const double flux_per_ns = watts / (kPlanck * d.f_drive * 1e9) * 1e-9;
  return std::sqrt(p.kappa_rate() * flux_per_ns) / kTwoPi;
}

/// Inverse of power_to_epsilon (dB at the fridge input).
inline double epsilon_to_power(const JBAParams& p, double epsilon, double f_drive, double attenuation_db) {
  const double flux_per_ns = std::pow(kTwoPi * epsilon, 2) / p.kappa_rate();
  const double watts = flux_per_ns * 1e9 * kPlanck * f_drive * 1e9;
  return 10.0 * std::log10(watts / 1e-3) - attenuation_db;
}

enum class Stability { kStable, kUnstable, kEdge };

struct SteadyState {
  double n = 0.0;
  Stability stability = Stability::kStable;
};

/// Steady-state response n[(delta + K n)^2 + (kappa/2)^2], all in GHz.
inline double response(const JBAParams& p, double delta, double n) {
  const double d = delta + p.kerr * n;
  return n * (d * d + 0.25 * p.kappa * p.kappa);
}

inline double response_slope(const JBAParams& p, double delta, double n) {
  const double k = p.kerr;
  return 3.0 * k * k * n * n + 4.0 * k * delta * n + delta * delta + 0.25 * p.kappa * p.kappa;
}

/// Real non-negative roots of the driven-Kerr cubic, ascending, each tagged
/// by the sign of dF/dn. `delta` = (fC + cavity shift) - f_drive in GHz.
inline std::vector<SteadyState> steady_states(const JBAParams& p, double epsilon, double delta) {
  p.validate();
  require(epsilon >= 0.0, ErrorKind::kInvalidArgument, "drive amplitude must be >= 0");
  const double target = epsilon * epsilon;
  if (target == 0.0) return {SteadyState{0.0, Stability::kStable}};

  const double a = p.kerr * p.kerr;
  const double b = 2.0 * p.kerr * delta / a;
  const double c = (delta * delta + 0.25 * p.kappa * p.kappa) / a;
  const double d = -target / a;
  // Depressed cubic t^3 + pt + q with n = t - b/3.
  const double shift = b / 3.0;
  const double pp = c - b * b / 3.0;
  const double qq = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  std::vector<double> roots;
  const double disc = qq * qq / 4.0 + pp * pp * pp / 27.0;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    roots.push_back(std::cbrt(-qq / 2.0 + sq) + std::cbrt(-qq / 2.0 - sq) - shift);
  } else {
    const double r = 2.0 * std::sqrt(-pp / 3.0);
    const double arg = std::clamp(3.0 * qq / (pp * r), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots.push_back(r * std::cos(theta - kTwoPi * k / 3.0) - shift);
  }

  // Newton polish on the unscaled response.
  for (double& n : roots) {
    for (int it = 0; it < 50; ++it) {
      const double f = response(p, delta, n) - target;
      const double fp = response_slope(p, delta, n);
      if (fp == 0.0) break;
      const double step = f / fp;
      n -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(n))) break;
    }
  }
  std::sort(roots.begin(), roots.end());

  std::vector<SteadyState> out;
  const double scale = delta * delta + 0.25 * p.kappa * p.kappa;
  for (double n : roots) {
    if (n < 0.0) continue;
    if (!out.empty() && std::abs(n - out.back().n) <= 1e-6 * std::max(1.0, n)) {
      out.back().stability = Stability::kEdge;
      continue;
    }
    const double slope = response_slope(p, delta, n);
    Stability s = slope > 0.0 ? Stability::kStable : Stability::kUnstable;
    if (std::abs(slope) <= 1e-9 * scale) s = Stability::kEdge;
    out.push_back({n, s});
  }
  return out;
}

inline double bistability_threshold(const JBAParams& p) { return std::sqrt(3.0) / 2.0 * p.kappa; }

struct BistableWindow {
  double eps_low = 0.0;   // high branch appears
  double eps_high = 0.0;  // low branch disappears
  double n_low_edge = 0.0;   // largest photon number on the low branch
  double n_high_edge = 0.0;  // smallest photon number on the high branch
};

/// Drive interval with three steady states for a constant detuning.
inline BistableWindow bistable_window(const JBAParams& p, double delta) {
  p.validate();
  const double threshold = bistability_threshold(p);
  require(delta > threshold, ErrorKind::kNoBistability,
          "detuning " + std::to_string(delta * 1e3) + " MHz below the bistability threshold " +
              std::to_string(threshold * 1e3) + " MHz");
  const double root = std::sqrt(delta * delta - 0.75 * p.kappa * p.kappa);
  const double k = std::abs(p.kerr);
  BistableWindow w;
  w.n_low_edge = (2.0 * delta - root) / (3.0 * k);
  w.n_high_edge = (2.0 * delta + root) / (3.0 * k);
  w.eps_high = std::sqrt(response(p, delta, w.n_low_edge));
  w.eps_low = std::sqrt(response(p, delta, w.n_high_edge));
  return w;
}

/// Photon-number-dependent detuning delta(n) in GHz (qubit-induced dispersion).
using DetuningCurve = std::function<double(double)>;

namespace detail {

inline double general_response(const JBAParams& p, const DetuningCurve& delta, double n) {
  const double d = delta(n) + p.kerr * n;
  return n * (d * d + 0.25 * p.kappa * p.kappa);
}

inline std::vector<double> sign_changes(const std::function<double(double)>& f, double n_max, int points) {
  std::vector<double> out;
  double x0 = 0.0;
  double f0 = f(x0);
  for (int i = 1; i <= points; ++i) {
    const double x1 = n_max * i / points;
    const double f1 = f(x1);
    if (f0 == 0.0) out.push_back(x0);
    else if ((f0 < 0.0) != (f1 < 0.0)) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  return out;
}

}  // namespace detail

/// Steady states when the detuning depends on the photon number. Roots are
/// bracketed on a grid up to the linear bound n <= 4 eps^2 / kappa^2.
inline std::vector<SteadyState> steady_states(const JBAParams& p, double epsilon, const DetuningCurve& delta,
                                              int grid = 4000) {
  if (epsilon == 0.0) return {SteadyState{0.0, Stability::kStable}};
  const double target = epsilon * epsilon;
  const double n_max = 4.0 * target / (p.kappa * p.kappa) * 1.01 + 1.0;
  auto f = [&](double n) { return detail::general_response(p, delta, n) - target; };
  std::vector<SteadyState> out;
  const double h = 1e-4 * std::max(1.0, n_max / grid);
  for (double n : detail::sign_changes(f, n_max, grid)) {
    const double slope = (f(n + h) - f(std::max(0.0, n - h))) / (n + h - std::max(0.0, n - h));
    out.push_back({n, slope > 0.0 ? Stability::kStable : Stability::kUnstable});
  }
  return out;
}

/// Turning points of the general response (empty when there is no bistability).
inline std::vector<double> turning_points(const JBAParams& p, const DetuningCurve& delta, double n_max,
                                          int grid = 4000) {
  const double h = 1e-3;
  auto slope = [&](double n) {
    return (detail::general_response(p, delta, n + h) - detail::general_response(p, delta, std::max(0.0, n - h))) /
           (n + h - std::max(0.0, n - h));
  };
  return detail::sign_changes(slope, n_max, grid);
}

struct FieldTrajectory {
  std::vector<double> times;  // ns
  std::vector<Complex> alpha; // rotating frame at the drive frequency
  bool bifurcated = false;
  std::optional<double> t_bifurcation;

  double photons(std::size_t k) const { return std::norm(alpha[k]); }
};

struct IntegrationOptions {
  double t0 = 0.0;
  Complex initial{0.0, 0.0};
  double detection_threshold = kInfinity;  // photons; +inf disables detection
  double persistence_ns = -1.0;            // default 5/kappa
  bool noiseless = false;
  bool thermal_start = true;  // add a stationary thermal draw to `initial` unless noiseless
  bool keep_trajectory = true;
};

/// Upper bound on the integration step: 0.1/kappa.
inline double max_time_step(const JBAParams& p) { return 0.1 / p.kappa_rate(); }

/// Effective noise occupation k_B T / (h fC). The noise temperature is an
/// effective one that already contains the quantum floor (hf/2k_B gives 1/2).
inline double effective_occupation(const JBAParams& p) {
  return kBoltzmann * p.noise_temp / (kPlanck * p.fc * 1e9);
}

/// Complex white-noise diffusion constant kappa n_eff in 1/ns.
inline double diffusion(const JBAParams& p) {
  return p.kappa_rate() * effective_occupation(p);
}

/// Draw from the stationary undriven field, <|alpha|^2> = n_eff.
inline Complex thermal_field(const JBAParams& p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(effective_occupation(p) / 2.0);
  const double re = s * normal(rng);
  return {re, s * normal(rng)};
}

/// Integrates d alpha/dt = [i 2pi(delta + K|alpha|^2) - kappa/2] alpha + i 2pi eps + noise.
/// The linear part over one step is applied exactly; the noise increment is
/// Euler-Maruyama. `detuning(step, n)` returns delta in GHz at that step.
template <typename DetuningFn>
FieldTrajectory integrate_trajectory(const JBAParams& p, std::span<const double> envelope, DetuningFn&& detuning,
                                     double dt, Rng& rng, const IntegrationOptions& opt = {}) {
  require(dt > 0.0, ErrorKind::kInvalidArgument, "time step must be > 0");
  require(dt <= max_time_step(p) * (1.0 + 1e-12), ErrorKind::kStability,
          "time step " + std::to_string(dt) + " ns exceeds 0.1/kappa = " + std::to_string(max_time_step(p)) + " ns");
  const double kappa = p.kappa_rate();
  const double sigma = opt.noiseless ? 0.0 : std::sqrt(diffusion(p) * dt / 2.0);
  const double persistence = opt.persistence_ns >= 0.0 ? opt.persistence_ns : 5.0 / kappa;
  std::normal_distribution<double> normal(0.0, 1.0);

  FieldTrajectory out;
  const std::size_t steps = envelope.size();
  Complex alpha = opt.initial;
  if (sigma > 0.0 && opt.thermal_start) alpha += thermal_field(p, rng);
  if (opt.keep_trajectory) {
    out.times.resize(steps + 1);
    out.alpha.resize(steps + 1);
    out.times[0] = opt.t0;
    out.alpha[0] = alpha;
  }
  std::optional<double> crossing;
  for (std::size_t k = 0; k < steps; ++k) {
    const double n = std::norm(alpha);
    const double rot = kTwoPi * (detuning(k, n) + p.kerr * n);
    const Complex lambda(-0.5 * kappa, rot);
    const Complex decay = std::exp(lambda * dt);
    const Complex drive(0.0, kTwoPi * envelope[k]);
    alpha = decay * alpha + drive * (decay - 1.0) / lambda;
    if (sigma > 0.0) alpha += Complex(sigma * normal(rng), sigma * normal(rng));
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
      throw Error(ErrorKind::kDivergence, "field diverged at step " + std::to_string(k));
    }
    const double t = opt.t0 + (k + 1) * dt;
    if (opt.keep_trajectory) {
      out.times[k + 1] = t;
      out.alpha[k + 1] = alpha;
    }
    if (!out.bifurcated) {
      if (std::norm(alpha) > opt.detection_threshold) {
        if (!crossing) crossing = t;
        if (t - *crossing >= persistence) {
          out.bifurcated = true;
          out.t_bifurcation = crossing;
        }
      } else {
        crossing.reset();
      }
    }
  }
  if (!opt.keep_trajectory) {
    out.times = {opt.t0 + steps * dt};
    out.alpha = {alpha};
  }
  return out;
}

/// Overload for a step-function detuning sampled on the envelope grid (GHz).
inline FieldTrajectory integrate_trajectory(const JBAParams& p, std::span<const double> envelope,
                                            std::span<const double> detuning, double dt, std::uint64_t seed,
                                            const IntegrationOptions& opt = {}) {
  require(detuning.size() == envelope.size(), ErrorKind::kInvalidArgument,
          "envelope and detuning must share the grid");
  Rng rng = make_stream(seed, Stream::kFieldNoise);
  return integrate_trajectory(p, envelope, [&](std::size_t k, double) { return detuning[k]; }, dt, rng, opt);
}

/// Photon-number threshold halfway between the two turning points of the
/// response at a constant detuning; +inf when the detuning is not bistable.
inline double detection_threshold(const JBAParams& p, double delta) {
  if (delta <= bistability_threshold(p)) return kInfinity;
  const auto w = bistable_window(p, delta);
  return 0.5 * (w.n_low_edge + w.n_high_edge);
}

/// Fraction of independent trajectories that bifurcate. Shot i uses the
/// stream derived from (seed xor i); results do not depend on thread count.
inline BinomialEstimate escape_probability(const JBAParams& p, std::span<const double> envelope,
                                           std::span<const double> detuning, double dt, std::size_t n_shots,
                                           std::uint64_t seed, IntegrationOptions opt = {}) {
  require(n_shots >= 100, ErrorKind::kInvalidArgument, "escape_probability needs at least 100 shots");
  if (!std::isfinite(opt.detection_threshold)) {
    opt.detection_threshold = detection_threshold(p, *std::max_element(detuning.begin(), detuning.end()));
  }
  opt.keep_trajectory = false;
  std::vector<unsigned char> flags(n_shots, 0);
  parallel_for(n_shots, [&](std::size_t shot) {
    try {
      flags[shot] = integrate_trajectory(p, envelope, detuning, dt, shot_seed(seed, shot), opt).bifurcated ? 1 : 0;
    } catch (const Error& e) {
      throw Error(e.kind(), e.message() + " (shot " + std::to_string(shot) + ")");
    }
  });
  std::size_t count = 0;
  for (auto f : flags) count += f;
  return binomial(count, n_shots);
}

}  // namespace jbasim

#endif  // JBASIM_JBA_HPP
