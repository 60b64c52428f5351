// One readout shot end to end: preparation, qubit relaxation, resonator field,
// homodyne record and the binary outcome.
#ifndef JBASIM_READOUT_HPP
#define JBASIM_READOUT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jbasim/core.hpp"
#include "jbasim/dispersive.hpp"
#include "jbasim/jba.hpp"
#include "jbasim/parallel.hpp"
#include "jbasim/pulse.hpp"

namespace jbasim {

struct ChainParams {
  double cryo_gain_db = 38.0;
  double room_gain_db = 76.0;  // 56 dB plus 20 dB
  double noise_temp_amp = 3.0; // K, referred to the cryogenic amplifier input
  double prep_error_p1 = 0.01; // equilibrium |1> population after reset
  double shelving_leak_p1 = 0.01;
  double pulse_error = 0.01;   // incoherent error per pi or pi/2 pulse
  double filter_cutoff = 0.01; // GHz

  void validate() const {
    require(std::isfinite(cryo_gain_db) && std::isfinite(room_gain_db), ErrorKind::kInvalidArgument,
            "gains must be finite");
    require(noise_temp_amp > 0.0, ErrorKind::kInvalidArgument, "amplifier noise temperature must be > 0");
    for (double p : {prep_error_p1, shelving_leak_p1, pulse_error}) {
      require(p >= 0.0 && p <= 1.0, ErrorKind::kInvalidArgument, "probabilities must lie in [0, 1]");
    }
    require(filter_cutoff > 0.0, ErrorKind::kInvalidArgument, "filter cutoff must be > 0");
  }

  double amplitude_gain() const { return db_to_amplitude_ratio(cryo_gain_db + room_gain_db); }

  /// Amplifier noise in photons referred to the input at frequency f.
  double added_photons(double f_ghz) const { return kBoltzmann * noise_temp_amp / (kPlanck * f_ghz * 1e9); }
};

/// Qubit decay and dephasing. Times in us.
struct QubitModel {
  double t1_10 = 0.45;
  double t1_21 = 0.3;
  double tphi = 2.5;              // white dephasing, always on
  double flux_dephasing = 0.0;    // 1/us, Gaussian decay exp(-(rate t)^2) during free evolution
  double f01 = 0.0;               // GHz, for detuned control pulses
  bool relaxation = true;

  void validate() const {
    require(t1_10 > 0.0 && t1_21 > 0.0, ErrorKind::kInvalidArgument, "relaxation times must be > 0");
    require(tphi > 0.0, ErrorKind::kInvalidArgument, "dephasing time must be > 0");
    require(flux_dephasing >= 0.0, ErrorKind::kInvalidArgument, "flux dephasing rate must be >= 0");
  }

  /// Downward rate out of `level` in 1/ns.
  double rate(int level) const {
    if (!relaxation || level == 0) return 0.0;
    return 1e-3 / (level == 1 ? t1_10 : t1_21);
  }
};

struct Jump {
  double t = 0.0;
  int from = 0;
  int to = 0;
};

struct QubitJumpTrace {
  int initial_level = 0;
  double t_start = 0.0;          // ns, time at which initial_level holds
  std::vector<Jump> jumps;       // relaxation only: 2->1, 1->0
  std::vector<Jump> transfers;   // pulse-driven level changes
  double t1_10 = 0.0;
  double t1_21 = 0.0;

  int level_at(double t) const {
    int level = initial_level;
    std::size_t a = 0;
    std::size_t b = 0;
    while (true) {
      const double ta = a < jumps.size() ? jumps[a].t : kInfinity;
      const double tb = b < transfers.size() ? transfers[b].t : kInfinity;
      const double next = std::min(ta, tb);
      if (next > t) return level;
      if (ta <= tb) level = jumps[a++].to;
      else level = transfers[b++].to;
    }
  }
};

struct HomodyneRecord {
  std::vector<double> times;  // ns
  std::vector<double> i;      // output units: input-referred sqrt(photons/ns) times the chain gain
  std::vector<double> q;
  double sample_rate = 2.0;   // GS/s
  double filter_cutoff = 0.01;
  double gain = 1.0;
};

enum class Outcome { kLow, kHigh };  // B-bar, B

struct ShotRecord {
  QubitJumpTrace jump_trace;
  FieldTrajectory field;
  HomodyneRecord homodyne;
  Outcome outcome = Outcome::kLow;
  std::size_t readout_index = 0;
  double i_mean = 0.0;  // input-referred window mean
};

/// Everything the chain needs besides the pulse program.
struct ReadoutSetup {
  JBAParams jba;
  CavityPullTable pulls;
  double f_drive = 0.0;
  double attenuation_db = -77.0;
  QubitModel qubit;
  ChainParams chain;
  double dt = 0.5;
  bool noiseless_field = false;
  bool noiseless_amplifier = false;

  /// Drive amplitude in GHz for a compiled amplitude of 1 (0 dB).
  double epsilon_unit() const { return power_to_epsilon(jba, DriveConfig{f_drive, 0.0, attenuation_db}); }
  double delta(int level, double n) const { return pulls.frequency(level, n) - f_drive; }
  DetuningCurve curve(int level) const {
    return [this, level](double n) { return delta(level, n); };
  }
};

// Preparation and relaxation.

/// Level after reset and ideal pi pulses towards `target`.
inline int sample_preparation(int target, const ChainParams& chain, Rng& rng) {
  require(target >= 0 && target <= 2, ErrorKind::kInvalidArgument, "target level must be 0, 1 or 2");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int level = u(rng) < chain.prep_error_p1 ? 1 : 0;
  if (target >= 1 && u(rng) >= chain.pulse_error) level = level == 0 ? 1 : 0;
  if (target == 2) {
    const double x = u(rng);
    if (level == 1 && x >= chain.pulse_error) level = 2;
    else if (level == 0 && x < chain.shelving_leak_p1) level = 1;
  }
  return level;
}

inline int sample_preparation(int target, const ChainParams& chain, std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kPreparation);
  return sample_preparation(target, chain, rng);
}

/// Effect of a 1-2 pi pulse on a definite level.
inline int apply_pi12(int level, const ChainParams& chain, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  if (level == 1) return x >= chain.pulse_error ? 2 : 1;
  if (level == 2) return x >= chain.pulse_error ? 1 : 2;
  return x < chain.shelving_leak_p1 ? 1 : 0;
}

/// Relaxation cascade from `initial` at t0 up to t0 + horizon, with 1-2 pi
/// pulses applied at the given times.
inline QubitJumpTrace sample_jumps(int initial, const QubitModel& model, double t0, double horizon,
                                   std::span<const double> pi12_times, const ChainParams& chain, Rng& rng,
                                   Rng& pulse_rng) {
  require(horizon > 0.0, ErrorKind::kInvalidArgument, "jump horizon must be > 0");
  QubitJumpTrace trace;
  trace.initial_level = initial;
  trace.t_start = t0;
  trace.t1_10 = model.t1_10;
  trace.t1_21 = model.t1_21;
  std::exponential_distribution<double> unit(1.0);
  int level = initial;
  double t = t0;
  const double t_end = t0 + horizon;
  std::size_t next_pulse = 0;
  while (t < t_end) {
    const double boundary = next_pulse < pi12_times.size() ? std::min(pi12_times[next_pulse], t_end) : t_end;
    const double rate = model.rate(level);
    const double wait = rate > 0.0 ? unit(rng) / rate : kInfinity;
    if (t + wait < boundary) {
      t += wait;
      trace.jumps.push_back({t, level, level - 1});
      --level;
      continue;
    }
    t = boundary;
    if (next_pulse < pi12_times.size() && pi12_times[next_pulse] <= t_end && t == pi12_times[next_pulse]) {
      const int to = apply_pi12(level, chain, pulse_rng);
      if (to != level) trace.transfers.push_back({t, level, to});
      level = to;
      ++next_pulse;
    }
  }
  return trace;
}

inline QubitJumpTrace sample_jumps(int initial, const QubitModel& model, double horizon, std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kJumps);
  return sample_jumps(initial, model, 0.0, horizon, {}, ChainParams{}, rng, rng);
}

// Qubit control in the 0-1 subspace.

struct Bloch {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;  // P0 - P1

  double p1() const { return std::clamp(0.5 * (1.0 - z), 0.0, 1.0); }
};

/// Free evolution for t ns in the frame of a drive detuned by `detuning` GHz.
inline void free_evolve(Bloch& r, double t, const QubitModel& m, double detuning) {
  if (t <= 0.0) return;
  const double t_us = t * 1e-3;
  double decay = std::exp(-t_us / m.tphi - std::pow(m.flux_dephasing * t_us, 2));
  double relax = 1.0;
  if (m.relaxation) {
    relax = std::exp(-t_us / m.t1_10);
    decay *= std::sqrt(relax);
  }
  const double phase = kTwoPi * detuning * t;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  const double x = r.x * c - r.y * s;
  const double y = r.x * s + r.y * c;
  r.x = x * decay;
  r.y = y * decay;
  r.z = 1.0 + (r.z - 1.0) * relax;
}

/// Instantaneous rotation about x with incoherent error e: r -> (1-e) R r + e r.
inline void rotate(Bloch& r, double angle, double error) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double y = r.y * c - r.z * s;
  const double z = r.y * s + r.z * c;
  r.y = (1.0 - error) * y + error * r.y;
  r.z = (1.0 - error) * z + error * r.z;
}

/// Continuous drive with rate(t) = Omega/2pi (GHz), RK4 with decay.
template <typename RateFn>
void driven_evolve(Bloch& r, double duration, RateFn&& rate, const QubitModel& m, double detuning) {
  const double g1 = m.relaxation ? 1e-3 / m.t1_10 : 0.0;
  const double g2 = 0.5 * g1 + 1e-3 / m.tphi;
  const double w = kTwoPi * detuning;
  auto deriv = [&](double t, const std::array<double, 3>& v) {
    const double om = kTwoPi * rate(t);
    return std::array<double, 3>{-w * v[1] - g2 * v[0], w * v[0] - om * v[2] - g2 * v[1],
                                 om * v[1] - g1 * (v[2] - 1.0)};
  };
  const int steps = std::max(1, static_cast<int>(std::ceil(duration / 0.05)));
  const double h = duration / steps;
  std::array<double, 3> v{r.x, r.y, r.z};
  auto axpy = [](const std::array<double, 3>& a, double s, const std::array<double, 3>& b) {
    return std::array<double, 3>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
  };
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const auto k1 = deriv(t, v);
    const auto k2 = deriv(t + 0.5 * h, axpy(v, 0.5 * h, k1));
    const auto k3 = deriv(t + 0.5 * h, axpy(v, 0.5 * h, k2));
    const auto k4 = deriv(t + h, axpy(v, h, k3));
    for (int i = 0; i < 3; ++i) v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  r = {v[0], v[1], v[2]};
}

struct QubitProjection {
  double p1 = 0.0;       // probability of level 1 at t_project
  double t_project = 0.0;
  std::vector<double> pi12_times;
};

/// Runs the deterministic 0-1 control part of a sequence. Rotations act at
/// the pulse midpoint; the state is projected at the end of the last 0-1 pulse.
inline QubitProjection project_qubit(const CompiledSequence& cs, const QubitModel& m, const ChainParams& chain) {
  Bloch r;
  r.z = 1.0 - 2.0 * chain.prep_error_p1;
  double t = 0.0;
  double detuning = 0.0;
  QubitProjection out;
  double last01 = -1.0;
  for (const auto& c : cs.controls) {
    if (c.pulse.transition == Transition::k01) last01 = c.t_end;
  }
  for (const auto& c : cs.controls) {
    if (c.pulse.transition == Transition::k12) {
      require(c.t_start >= last01, ErrorKind::kUnsupported, "1-2 pulses before the last 0-1 pulse");
      out.pi12_times.push_back(0.5 * (c.t_start + c.t_end));
      continue;
    }
    detuning = c.pulse.frequency > 0.0 && m.f01 > 0.0 ? m.f01 - c.pulse.frequency : 0.0;
    if (c.pulse.rabi) {
      free_evolve(r, c.t_start - t, m, detuning);
      driven_evolve(r, c.pulse.duration, [&](double s) { return c.pulse.rate(s); }, m, detuning);
    } else {
      const double mid = 0.5 * (c.t_start + c.t_end);
      free_evolve(r, mid - t, m, detuning);
      rotate(r, c.pulse.angle, chain.pulse_error);
      free_evolve(r, c.t_end - mid, m, detuning);
    }
    t = c.t_end;
  }
  out.p1 = r.p1();
  out.t_project = t;
  return out;
}

// Homodyne chain.

inline double filter_coefficient(double cutoff, double dt) { return 1.0 - std::exp(-kTwoPi * cutoff * dt); }

/// Per-quadrature, per-sample amplifier noise variance referred to the input, (photons/ns).
inline double amplifier_variance(const ChainParams& chain, double f, double dt) {
  return chain.added_photons(f) / (2.0 * dt);
}

/// Standard deviation of the window mean of single-pole filtered white noise
/// of unit variance, window [first, last) on a record starting at zero state.
inline double filtered_window_sigma(double a, std::size_t first, std::size_t last) {
  require(last > first, ErrorKind::kInvalidArgument, "discrimination window is empty");
  const double r = 1.0 - a;
  const double m = static_cast<double>(last - first);
  const double tail = std::pow(r, m);
  double sum = 0.0;
  for (std::size_t j = 0; j < last; ++j) {
    double c;
    if (j < first) c = std::pow(r, static_cast<double>(first - j)) * (1.0 - tail) / m;
    else c = (1.0 - std::pow(r, static_cast<double>(last - j))) / m;
    sum += c * c;
  }
  return std::sqrt(sum);
}

/// Reflected output field b_out = b_in - sqrt(kappa) alpha with b_in = i 2pi eps / sqrt(kappa).
inline Complex output_field(const JBAParams& p, double epsilon, Complex alpha) {
  const double sk = std::sqrt(p.kappa_rate());
  return Complex(0.0, kTwoPi * epsilon / sk) - sk * alpha;
}

/// Amplified, noisy, low-pass filtered I/Q record of a field trajectory.
/// `epsilon` holds the drive per integration step; `theta` is the LO phase.
inline HomodyneRecord synthesize_homodyne(const FieldTrajectory& field, std::span<const double> epsilon,
                                          const JBAParams& p, const ChainParams& chain, double f_drive, double dt,
                                          double theta, Rng& rng, bool noiseless = false) {
  require(field.alpha.size() == epsilon.size() + 1, ErrorKind::kInvalidArgument,
          "field and drive must share the grid");
  HomodyneRecord rec;
  rec.sample_rate = 1.0 / dt;
  rec.filter_cutoff = chain.filter_cutoff;
  rec.gain = chain.amplitude_gain();
  require(rec.sample_rate > 2.0 * rec.filter_cutoff, ErrorKind::kInvalidArgument,
          "sample rate must exceed twice the filter cutoff");
  const std::size_t n = epsilon.size();
  rec.times.resize(n);
  rec.i.resize(n);
  rec.q.resize(n);
  const double sigma = noiseless ? 0.0 : std::sqrt(amplifier_variance(chain, f_drive, dt));
  const double a = filter_coefficient(chain.filter_cutoff, dt);
  const Complex lo = std::polar(1.0, -theta);
  std::normal_distribution<double> normal(0.0, 1.0);
  double yi = 0.0;
  double yq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Complex b = output_field(p, epsilon[k], field.alpha[k + 1]) * lo;
    const double xi = b.real() + sigma * normal(rng);
    const double xq = b.imag() + sigma * normal(rng);
    yi += a * (xi - yi);
    yq += a * (xq - yq);
    rec.times[k] = field.times[k + 1];
    rec.i[k] = rec.gain * yi;
    rec.q[k] = rec.gain * yq;
  }
  return rec;
}

/// Window mean of I against a threshold (output units).
inline Outcome discriminate(const HomodyneRecord& rec, std::size_t first, std::size_t last, double threshold) {
  require(last > first && last <= rec.i.size(), ErrorKind::kInvalidArgument, "discrimination window is empty");
  double sum = 0.0;
  for (std::size_t k = first; k < last; ++k) sum += rec.i[k];
  return sum / static_cast<double>(last - first) > threshold ? Outcome::kHigh : Outcome::kLow;
}

struct Discriminator {
  double theta = 0.0;      // LO phase
  double i_low = 0.0;      // input-referred branch references
  double i_high = 0.0;
  double threshold = 0.0;  // input-referred
  double noise_sigma = 0.0;  // window-mean amplifier noise, input-referred
  std::size_t first = 0;   // window in record samples
  std::size_t last = 0;
  std::vector<std::string> warnings;

  /// Gaussian tail probability of misclassifying a noiseless branch.
  double error_probability() const {
    if (noise_sigma == 0.0) return 0.0;
    return 0.5 * std::erfc(0.5 * (i_high - i_low) / (noise_sigma * std::sqrt(2.0)));
  }
};

struct BranchPair {
  Complex low;
  Complex high;
  double n_low = 0.0;
  double n_high = 0.0;
  bool bistable = false;
};

/// Stable low and high branch amplitudes for qubit level 0 at drive eps.
/// Outside the bistable window the drive is clamped to its nearest edge.
inline BranchPair branch_references(const ReadoutSetup& s, double eps) {
  const auto curve = s.curve(0);
  auto alpha_of = [&](double n) {
    const double d = curve(n) + s.jba.kerr * n;
    return Complex(0.0, kTwoPi * eps) / Complex(0.5 * s.jba.kappa_rate(), -kTwoPi * d);
  };
  BranchPair out;
  auto stable = [&](double e) {
    std::vector<double> roots;
    for (const auto& st : steady_states(s.jba, e, curve)) {
      if (st.stability == Stability::kStable) roots.push_back(st.n);
    }
    return roots;
  };
  auto roots = stable(eps);
  out.bistable = roots.size() >= 2;
  if (!out.bistable) {
    const double n_top = 8.0 * std::max(1.0, curve(0.0)) / std::abs(s.jba.kerr);
    const auto tp = turning_points(s.jba, curve, n_top);
    require(tp.size() >= 2, ErrorKind::kNoBistability, "level-0 response has no bistable window");
    const double e_high = std::sqrt(detail::general_response(s.jba, curve, tp.front()));
    const double e_low = std::sqrt(detail::general_response(s.jba, curve, tp.back()));
    eps = std::clamp(eps, e_low * (1.0 + 1e-4), e_high * (1.0 - 1e-4));
    roots = stable(eps);
    require(roots.size() >= 2, ErrorKind::kNoBistability, "could not locate both branches");
  }
  out.n_low = roots.front();
  out.n_high = roots.back();
  const Complex a_low = alpha_of(out.n_low);
  const Complex a_high = alpha_of(out.n_high);
  out.low = output_field(s.jba, eps, a_low);
  out.high = output_field(s.jba, eps, a_high);
  return out;
}

struct PlannedReadout {
  CompiledReadout readout;
  Discriminator disc;
  std::size_t record_first = 0;  // window in integration-record samples
  std::size_t record_last = 0;
};

/// Precomputed, shot-independent part of a run.
struct ShotPlan {
  ReadoutSetup setup;
  QubitProjection projection;
  std::size_t first_step = 0;  // sequence sample where field integration starts
  std::size_t last_step = 0;
  std::vector<double> epsilon;  // GHz per integration step
  std::vector<PlannedReadout> readouts;
  double detection_threshold = kInfinity;
  double horizon = 0.0;
  std::vector<std::string> warnings;
};

inline ShotPlan plan_shots(const Sequence& seq, const ReadoutSetup& setup) {
  setup.jba.validate();
  setup.chain.validate();
  setup.qubit.validate();
  const CompiledSequence cs = compile(seq, setup.dt);
  require(!cs.readouts.empty(), ErrorKind::kInvalidArgument, "sequence contains no readout pulse");
  ShotPlan plan;
  plan.setup = setup;
  plan.projection = project_qubit(cs, setup.qubit, setup.chain);
  plan.first_step = cs.readouts.front().first;
  plan.last_step = cs.readouts.back().last;
  plan.horizon = std::max(1.0, cs.dt * cs.size() - plan.projection.t_project);
  const double unit = setup.epsilon_unit();
  plan.epsilon.resize(plan.last_step - plan.first_step);
  for (std::size_t k = plan.first_step; k < plan.last_step; ++k) plan.epsilon[k - plan.first_step] = unit * cs.readout[k];

  const double a = filter_coefficient(setup.chain.filter_cutoff, setup.dt);
  const double sigma = std::sqrt(amplifier_variance(setup.chain, setup.f_drive, setup.dt));
  for (std::size_t r = 0; r < cs.readouts.size(); ++r) {
    const auto& ro = cs.readouts[r];
    PlannedReadout pr;
    pr.readout = ro;
    pr.record_first = ro.hold_start - plan.first_step;
    pr.record_last = ro.hold_end - plan.first_step;
    const double eps_sample = unit * db_to_amplitude_ratio(ro.envelope.power_db);
    const double eps_hold = eps_sample * ro.envelope.hold_fraction;
    const BranchPair refs = branch_references(setup, eps_hold);
    if (!refs.bistable) {
      pr.disc.warnings.push_back("hold amplitude outside the bistable window for readout " + std::to_string(r));
    }
    const Complex diff = refs.high - refs.low;
    pr.disc.theta = std::arg(diff);
    const Complex lo = std::polar(1.0, -pr.disc.theta);
    pr.disc.i_low = (refs.low * lo).real();
    pr.disc.i_high = (refs.high * lo).real();
    pr.disc.threshold = 0.5 * (pr.disc.i_low + pr.disc.i_high);
    pr.disc.first = pr.record_first;
    pr.disc.last = pr.record_last;
    pr.disc.noise_sigma = setup.noiseless_amplifier ? 0.0 : sigma * filtered_window_sigma(a, pr.record_first, pr.record_last);
    if (r == 0) plan.detection_threshold = 0.5 * (refs.n_low + refs.n_high);
    for (const auto& w : pr.disc.warnings) plan.warnings.push_back(w);
    plan.readouts.push_back(std::move(pr));
  }
  return plan;
}

/// Per-step qubit level during field integration (step midpoints).
inline std::vector<std::uint8_t> level_timeline(const QubitJumpTrace& trace, std::size_t first_step, std::size_t steps,
                                                double dt) {
  std::vector<std::uint8_t> levels(steps);
  int level = trace.initial_level;
  std::size_t a = 0;
  std::size_t b = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(first_step + k) + 0.5) * dt;
    while (true) {
      const double ta = a < trace.jumps.size() ? trace.jumps[a].t : kInfinity;
      const double tb = b < trace.transfers.size() ? trace.transfers[b].t : kInfinity;
      if (std::min(ta, tb) > t) break;
      if (ta <= tb) level = trace.jumps[a++].to;
      else level = trace.transfers[b++].to;
    }
    levels[k] = static_cast<std::uint8_t>(level);
  }
  return levels;
}

inline QubitJumpTrace sample_trace(const ShotPlan& plan, std::uint64_t seed) {
  Rng prep = make_stream(seed, Stream::kPreparation);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int initial = u(prep) < plan.projection.p1 ? 1 : 0;
  Rng jumps = make_stream(seed, Stream::kJumps);
  // 1-2 pulse outcomes draw from the preparation stream.
  return sample_jumps(initial, plan.setup.qubit, plan.projection.t_project, plan.horizon, plan.projection.pi12_times,
                      plan.setup.chain, jumps, prep);
}

/// Field integration over the readout part of the plan.
inline FieldTrajectory integrate_shot(const ShotPlan& plan, const std::vector<std::uint8_t>& levels, std::uint64_t seed,
                                      bool keep) {
  const auto& s = plan.setup;
  Rng rng = make_stream(seed, Stream::kFieldNoise);
  IntegrationOptions opt;
  opt.t0 = static_cast<double>(plan.first_step) * s.dt;
  opt.noiseless = s.noiseless_field;
  opt.keep_trajectory = keep;
  opt.detection_threshold = plan.detection_threshold;
  return integrate_trajectory(
      s.jba, std::span<const double>(plan.epsilon),
      [&](std::size_t k, double n) { return s.pulls.frequency(levels[k], n) - s.f_drive; }, s.dt, rng, opt);
}

/// Full shot with field trajectory and homodyne records, one record per readout.
inline std::vector<ShotRecord> run_shot(const ShotPlan& plan, std::uint64_t seed) {
  const auto trace = sample_trace(plan, seed);
  const auto levels = level_timeline(trace, plan.first_step, plan.epsilon.size(), plan.setup.dt);
  const auto field = integrate_shot(plan, levels, seed, true);
  std::vector<ShotRecord> out;
  Rng amp = make_stream(seed, Stream::kAmplifierNoise);
  for (std::size_t r = 0; r < plan.readouts.size(); ++r) {
    const auto& pr = plan.readouts[r];
    ShotRecord rec;
    rec.jump_trace = trace;
    rec.field = field;
    rec.readout_index = r;
    rec.homodyne = synthesize_homodyne(field, plan.epsilon, plan.setup.jba, plan.setup.chain, plan.setup.f_drive,
                                       plan.setup.dt, pr.disc.theta, amp, plan.setup.noiseless_amplifier);
    double sum = 0.0;
    for (std::size_t k = pr.record_first; k < pr.record_last; ++k) sum += rec.homodyne.i[k];
    rec.i_mean = sum / static_cast<double>(pr.record_last - pr.record_first) / rec.homodyne.gain;
    rec.outcome = discriminate(rec.homodyne, pr.record_first, pr.record_last, pr.disc.threshold * rec.homodyne.gain);
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<ShotRecord> run_shot(const Sequence& seq, const ReadoutSetup& setup, std::uint64_t seed) {
  return run_shot(plan_shots(seq, setup), seed);
}

/// Outcomes only. The filtered window mean is computed from the field and the
/// amplifier noise enters as one Gaussian draw with the exact window variance,
/// which has the same distribution as discriminating a synthesized record.
inline std::vector<Outcome> shot_outcomes(const ShotPlan& plan, std::uint64_t seed) {
  const auto trace = sample_trace(plan, seed);
  const auto levels = level_timeline(trace, plan.first_step, plan.epsilon.size(), plan.setup.dt);
  const auto& s = plan.setup;
  Rng rng = make_stream(seed, Stream::kFieldNoise);
  const double kappa = s.jba.kappa_rate();
  const double sigma = s.noiseless_field ? 0.0 : std::sqrt(diffusion(s.jba) * s.dt / 2.0);
  const double a = filter_coefficient(s.chain.filter_cutoff, s.dt);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Complex> lo(plan.readouts.size());
  for (std::size_t r = 0; r < lo.size(); ++r) lo[r] = std::polar(1.0, -plan.readouts[r].disc.theta);
  std::vector<double> y(plan.readouts.size(), 0.0);
  std::vector<double> sums(plan.readouts.size(), 0.0);
  Complex alpha = sigma > 0.0 ? thermal_field(s.jba, rng) : Complex(0.0, 0.0);
  for (std::size_t k = 0; k < plan.epsilon.size(); ++k) {
    const double n = std::norm(alpha);
    const double rot = kTwoPi * (s.pulls.frequency(levels[k], n) - s.f_drive + s.jba.kerr * n);
    const Complex lambda(-0.5 * kappa, rot);
    const Complex decay = std::exp(lambda * s.dt);
    alpha = decay * alpha + Complex(0.0, kTwoPi * plan.epsilon[k]) * (decay - 1.0) / lambda;
    if (sigma > 0.0) alpha += Complex(sigma * normal(rng), sigma * normal(rng));
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
      throw Error(ErrorKind::kDivergence, "field diverged at step " + std::to_string(k));
    }
    const Complex b = output_field(s.jba, plan.epsilon[k], alpha);
    for (std::size_t r = 0; r < lo.size(); ++r) {
      const auto& pr = plan.readouts[r];
      if (k >= pr.record_last) continue;
      y[r] += a * ((b * lo[r]).real() - y[r]);
      if (k >= pr.record_first) sums[r] += y[r];
    }
  }
  Rng amp = make_stream(seed, Stream::kAmplifierNoise);
  std::vector<Outcome> out(plan.readouts.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto& pr = plan.readouts[r];
    const double mean = sums[r] / static_cast<double>(pr.record_last - pr.record_first) +
                        pr.disc.noise_sigma * normal(amp);
    out[r] = mean > pr.disc.threshold ? Outcome::kHigh : Outcome::kLow;
  }
  return out;
}

/// Bifurcation counts per readout over shots [0, n_shots) of a plan.
inline std::vector<BinomialEstimate> outcome_statistics(const ShotPlan& plan, std::size_t n_shots, std::uint64_t seed) {
  const std::size_t m = plan.readouts.size();
  std::vector<std::uint8_t> flags(n_shots * m, 0);
  parallel_for(n_shots, [&](std::size_t shot) {
    try {
      const auto o = shot_outcomes(plan, shot_seed(seed, shot));
      for (std::size_t r = 0; r < m; ++r) flags[shot * m + r] = o[r] == Outcome::kHigh ? 1 : 0;
    } catch (const Error& e) {
      throw Error(e.kind(), e.message() + " (shot " + std::to_string(shot) + ")");
    }
  });
  std::vector<BinomialEstimate> out;
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t count = 0;
    for (std::size_t shot = 0; shot < n_shots; ++shot) count += flags[shot * m + r];
    out.push_back(binomial(count, n_shots));
  }
  return out;
}

/// Photon number left in the resonator at the start of each later readout,
/// from a noiseless high-branch run of the first readout.
inline std::vector<double> residual_photons(const ShotPlan& plan) {
  std::vector<double> out;
  if (plan.readouts.size() < 2) return out;
  const auto& s = plan.setup;
  std::vector<std::uint8_t> levels(plan.epsilon.size(), 0);
  std::vector<double> eps = plan.epsilon;
  // Drive the first readout hard enough to latch the high branch.
  const auto& first = plan.readouts.front().readout;
  for (std::size_t k = 0; k < first.hold_start - plan.first_step; ++k) eps[k] *= 1.5;
  Rng rng(0);
  IntegrationOptions opt;
  opt.noiseless = true;
  const auto traj = integrate_trajectory(
      s.jba, std::span<const double>(eps),
      [&](std::size_t k, double n) { return s.pulls.frequency(levels[k], n) - s.f_drive; }, s.dt, rng, opt);
  for (std::size_t r = 1; r < plan.readouts.size(); ++r) {
    out.push_back(traj.photons(plan.readouts[r].readout.first - plan.first_step));
  }
  return out;
}

}  // namespace jbasim

#endif  // JBASIM_READOUT_HPP
