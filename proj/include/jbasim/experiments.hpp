// Measurement protocols and their analysis: S-curves, contrast, frequency
// shifts, Rabi/T1/Ramsey, back-action, AC-Stark photon calibration and the
// coherence/contrast trade-off.
#ifndef JBASIM_EXPERIMENTS_HPP
#define JBASIM_EXPERIMENTS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "jbasim/core.hpp"
#include "jbasim/dispersive.hpp"
#include "jbasim/fitting.hpp"
#include "jbasim/jba.hpp"
#include "jbasim/pulse.hpp"
#include "jbasim/readout.hpp"
#include "jbasim/stats.hpp"
#include "jbasim/transmon.hpp"

namespace jbasim {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct DeviceParams {
  TransmonParams transmon;
  double g = 0.044;          // GHz
  double fc = 6.4535;        // GHz
  int n_photon_cutoff = 150;
  double q0 = 685.0;
  double ic = 0.72;          // uA
  double kerr = -8.95e-4;    // GHz per photon
  double noise_temp = 0.06;  // K
  double t1_other = 0.7;     // us
  double tphi_residual = 2.5;  // us
  double flux_noise_amp = 20.0;  // uPhi0/sqrt(Hz)
  FluxNoiseConfig flux_noise;
  bool relaxation = true;

  CouplingParams coupling() const { return {g, fc, n_photon_cutoff}; }
  JBAParams jba() const { return JBAParams::make(fc, q0, kerr, noise_temp, ic); }
};

struct ReadoutTiming {
  double t_rise = 15.0;
  double t_sample = 250.0;
  double t_hold = 700.0;
  double hold_fraction = 0.8;
};

struct OperatingPoint {
  double delta = 0.38;             // GHz, fC - f01
  double readout_detuning = 0.017; // GHz, fC - f
  ReadoutTiming timing;
  double power_db = kNaN;          // sampling power; NaN selects the contrast optimum
  double attenuation_db = -77.0;
  double gap = 120.0;              // ns between successive readouts
  double t_pi = 20.0;              // ns
  double rabi_frequency = 0.029;   // GHz
  double ramsey_detuning = 0.005;  // GHz
  double dt = 0.5;                 // ns
};

struct Estimate {
  double value = kNaN;
  double err_lo = 0.0;
  double err_hi = 0.0;

  static Estimate symmetric(double v, double e) { return {v, e, e}; }
};

/// Device at an operating point with every derived quantity resolved.
struct Model {
  DeviceParams device;
  OperatingPoint op;
  ChainParams chain;
  FluxPoint flux;
  TransmonSpectrum spectrum;
  std::shared_ptr<const DressedLadder> ladder;
  ReadoutSetup setup;
  CoherenceBudget coherence;
  std::vector<std::string> warnings;

  double f_drive() const { return device.fc - op.readout_detuning; }
};

/// 1-2 relaxation: Purcell emission on the 1-2 transition plus the unknown
/// channel scaled by the squared charge matrix element.
inline double t1_21_model(const TransmonSpectrum& spec, const DeviceParams& d, double kappa) {
  const auto gj = transition_couplings(spec, d.g);
  const double other = d.t1_other * std::pow(gj[0] / gj[1], 2);
  return combine_t1(purcell_t1(gj[1], d.fc - spec.f12, kappa), other);
}

inline Model build_model(const DeviceParams& device, const OperatingPoint& op, const ChainParams& chain = {},
                         std::shared_ptr<const DressedLadder> ladder = nullptr) {
  Model m;
  m.device = device;
  m.op = op;
  m.chain = chain;
  chain.validate();
  require(op.readout_detuning > 0.0, ErrorKind::kInvalidArgument, "the readout frequency must lie below fC");
  require(op.dt > 0.0, ErrorKind::kInvalidArgument, "dt must be > 0");
  const auto cp = device.coupling();
  cp.validate();
  m.flux = flux_for_f01(device.transmon, device.fc - op.delta);
  m.spectrum = diagonalize(device.transmon, m.flux);
  const auto pert = dressed_shifts(m.spectrum, cp);
  m.warnings = pert.warnings;
  m.ladder = ladder ? std::move(ladder) : std::make_shared<const DressedLadder>(m.spectrum, cp);

  const JBAParams jba = device.jba();
  m.coherence.t1_purcell = purcell_t1(device.g, op.delta, jba.kappa);
  m.coherence.t1_other = device.t1_other;
  m.coherence.t1_total = combine_t1(m.coherence.t1_purcell, device.t1_other);
  m.coherence.flux_noise_amp = device.flux_noise_amp;
  m.coherence.tphi_flux = tphi_flux_noise(device.transmon, m.flux, device.flux_noise_amp, device.flux_noise);

  ReadoutSetup& s = m.setup;
  s.jba = jba;
  s.pulls = CavityPullTable(*m.ladder);
  s.f_drive = m.f_drive();
  s.attenuation_db = op.attenuation_db;
  s.chain = chain;
  s.dt = op.dt;
  s.qubit.t1_10 = m.coherence.t1_total;
  s.qubit.t1_21 = t1_21_model(m.spectrum, device, jba.kappa);
  s.qubit.tphi = device.tphi_residual;
  s.qubit.flux_dephasing = std::isfinite(m.coherence.tphi_flux) ? 1.0 / m.coherence.tphi_flux : 0.0;
  s.qubit.f01 = m.spectrum.f01;
  s.qubit.relaxation = device.relaxation;
  require(op.dt <= max_time_step(jba) * (1.0 + 1e-12), ErrorKind::kStability,
          "dt exceeds 0.1/kappa");
  return m;
}

// Pulse programs.

inline Envelope readout_envelope(const Model& m, double power_db) {
  const auto& t = m.op.timing;
  return readout_pulse(t.t_rise, t.t_sample, t.t_hold, power_db, t.hold_fraction);
}

inline double readout_duration(const Model& m) {
  const auto& t = m.op.timing;
  return t.t_rise + t.t_sample + t.t_hold;
}

/// Preparation of |state> followed by one readout.
inline Sequence state_sequence(const Model& m, int state, double power_db) {
  require(state >= 0 && state <= 2, ErrorKind::kInvalidArgument, "prepared state must be 0, 1 or 2");
  Sequence seq;
  if (state >= 1) seq.then(pi_pulse(m.spectrum, Transition::k01, m.op.t_pi));
  if (state >= 2) seq.then(pi_pulse(m.spectrum, Transition::k12, m.op.t_pi));
  seq.then(readout_envelope(m, power_db));
  return seq;
}

inline void append_readout(const Model& m, Sequence& seq, bool composite, double power_db) {
  if (composite) seq.then(pi_pulse(m.spectrum, Transition::k12, m.op.t_pi));
  seq.then(readout_envelope(m, power_db));
}

inline Sequence rabi_sequence(const Model& m, double duration, bool composite, double power_db) {
  Sequence seq;
  if (auto p = rabi_pulse(duration, m.op.rabi_frequency, m.spectrum.f01)) seq.add(0.0, *p);
  append_readout(m, seq, composite, power_db);
  return seq;
}

inline Sequence t1_sequence(const Model& m, double delay, bool composite, double power_db) {
  Sequence seq;
  seq.then(pi_pulse(m.spectrum, Transition::k01, m.op.t_pi));
  if (composite) seq.add(seq.end_time() + delay, pi_pulse(m.spectrum, Transition::k12, m.op.t_pi));
  seq.add(seq.end_time() + (composite ? 0.0 : delay), readout_envelope(m, power_db));
  return seq;
}

inline Sequence ramsey_sequence(const Model& m, double delay, bool composite, double power_db) {
  auto half = rotation_pulse(m.spectrum, Transition::k01, std::numbers::pi / 2.0, 0.5 * m.op.t_pi);
  half.frequency = m.spectrum.f01 - m.op.ramsey_detuning;
  Sequence seq;
  seq.add(0.0, half);
  seq.add(seq.end_time() + delay, half);
  append_readout(m, seq, composite, power_db);
  return seq;
}

/// Rabi pulse then two readouts separated by the gap; the first may be omitted.
inline Sequence backaction_sequence(const Model& m, double duration, bool first_readout, double power_db) {
  Sequence seq;
  if (auto p = rabi_pulse(duration, m.op.rabi_frequency, m.spectrum.f01)) seq.add(0.0, *p);
  const double t0 = seq.end_time();
  if (first_readout) seq.add(t0, readout_envelope(m, power_db));
  seq.add(t0 + readout_duration(m) + m.op.gap, readout_envelope(m, power_db));
  return seq;
}

// S-curves.

struct SCurve {
  std::vector<double> power_db;
  std::vector<BinomialEstimate> p;
  int prepared_state = 0;
  double readout_frequency = 0.0;  // GHz

  std::size_t size() const { return power_db.size(); }
};

inline ReadoutSetup shifted_setup(const Model& m, double freq_offset) {
  ReadoutSetup s = m.setup;
  s.f_drive += freq_offset;
  return s;
}

/// Bifurcation probability of each readout of `seq` (shots share seeds across calls).
inline std::vector<BinomialEstimate> measure(const Sequence& seq, const ReadoutSetup& setup, std::size_t shots,
                                             std::uint64_t seed) {
  return outcome_statistics(plan_shots(seq, setup), shots, seed);
}

inline SCurve measure_scurve(const Model& m, int state, const std::vector<double>& powers, std::size_t shots,
                             std::uint64_t seed, double freq_offset = 0.0) {
  require(!powers.empty(), ErrorKind::kInvalidArgument, "empty power sweep");
  for (std::size_t i = 1; i < powers.size(); ++i) {
    require(powers[i] > powers[i - 1], ErrorKind::kInvalidArgument, "power grid must be strictly increasing");
  }
  SCurve c;
  c.power_db = powers;
  c.prepared_state = state;
  const ReadoutSetup setup = shifted_setup(m, freq_offset);
  c.readout_frequency = setup.f_drive;
  for (double p : powers) c.p.push_back(measure(state_sequence(m, state, p), setup, shots, seed)[0]);
  return c;
}

/// One curve per prepared state, all with the same seed schedule.
inline std::vector<SCurve> run_scurves(const Model& m, const std::vector<int>& states, const std::vector<double>& powers,
                                       std::size_t shots, std::uint64_t seed) {
  std::vector<SCurve> out;
  for (int s : states) out.push_back(measure_scurve(m, s, powers, shots, seed));
  return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1);
  return out;
}

/// Sampling power (dB) at which the deterministic low branch of `level` disappears.
inline double jump_power(const Model& m, int level, double freq_offset = 0.0) {
  const ReadoutSetup s = shifted_setup(m, freq_offset);
  const auto curve = s.curve(level);
  const double n_top = 8.0 * std::max(1e-3, curve(0.0)) / std::abs(s.jba.kerr) + 10.0;
  const auto tp = turning_points(s.jba, curve, n_top);
  require(tp.size() >= 2, ErrorKind::kNoBistability,
          "no bistable window for qubit level " + std::to_string(level) + " at this readout frequency");
  const double eps = std::sqrt(detail::general_response(s.jba, curve, tp.front()));
  return epsilon_to_power(s.jba, eps, s.f_drive, s.attenuation_db);
}

/// Power grid covering the S-curves of the given levels.
inline std::vector<double> auto_power_grid(const Model& m, const std::vector<int>& levels, std::size_t points,
                                           double below = 3.0, double above = 0.5) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int l : levels) {
    const double p = jump_power(m, l);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return linspace(lo - below, hi + above, points);
}

struct Contrast {
  double value = 0.0;
  double err = 0.0;
  double power_db = kNaN;
  std::size_t index = 0;
};

/// Largest vertical separation p_hi - p_lo between two curves on a shared grid.
inline Contrast contrast(const SCurve& low, const SCurve& high) {
  require(low.size() == high.size() && low.size() > 0, ErrorKind::kInvalidArgument, "curves must share the grid");
  Contrast c;
  c.value = -1.0;
  for (std::size_t i = 0; i < low.size(); ++i) {
    const double d = high.p[i].p - low.p[i].p;
    if (d > c.value) {
      c.value = d;
      c.err = std::hypot(high.p[i].err, low.p[i].err);
      c.power_db = low.power_db[i];
      c.index = i;
    }
  }
  return c;
}

// Frequency shift between curves.

struct ShiftOptions {
  double f_max = 0.010;        // GHz
  double coarse_step = 0.001;  // GHz
  double fine_step = 0.00025;  // GHz
  double p_low = 0.02;
  double p_high = 0.3;
};

struct ShiftResult {
  double delta_f = 0.0;  // GHz
  double err = 0.0;      // grid resolution
  std::vector<double> grid;
  std::vector<double> distance;
  std::vector<std::size_t> points;  // grid indices entering the distance
};

/// Readout-frequency offset that makes the reference-state curve coincide with
/// `target` where p_B is small. Reference curves at offset frequencies are
/// remeasured with the reference's shots and seed.
inline ShiftResult scurve_shift(const Model& m, const SCurve& ref, const SCurve& target, std::size_t shots,
                                std::uint64_t seed, const ShiftOptions& opt = {}) {
  require(ref.power_db == target.power_db, ErrorKind::kInvalidArgument, "curves must share the power grid");
  ShiftResult out;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target.p[i].p >= opt.p_low && target.p[i].p <= opt.p_high) out.points.push_back(i);
  }
  auto covers = [&](const SCurve& c) {
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& e : c.p) {
      lo = std::min(lo, e.p);
      hi = std::max(hi, e.p);
    }
    return lo <= opt.p_low && hi >= opt.p_high;
  };
  require(!out.points.empty() && covers(ref) && covers(target), ErrorKind::kOutOfRange,
          "curves do not both cover p_B in [" + std::to_string(opt.p_low) + ", " + std::to_string(opt.p_high) + "]");

  std::vector<double> powers;
  for (auto i : out.points) powers.push_back(target.power_db[i]);
  std::map<long long, double> cache;
  auto dist = [&](double df) {
    const long long key = std::llround(df * 1e9);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    double d = 0.0;
    if (df == 0.0) {
      for (auto i : out.points) d += std::pow(ref.p[i].p - target.p[i].p, 2);
    } else {
      const auto c = measure_scurve(m, ref.prepared_state, powers, shots, seed, df);
      for (std::size_t k = 0; k < out.points.size(); ++k) d += std::pow(c.p[k].p - target.p[out.points[k]].p, 2);
    }
    cache[key] = d;
    out.grid.push_back(df);
    out.distance.push_back(d);
    return d;
  };

  double best = 0.0;
  double best_d = dist(0.0);
  const int coarse = static_cast<int>(std::llround(opt.f_max / opt.coarse_step));
  for (int i = 1; i <= coarse; ++i) {
    const double df = i * opt.coarse_step;
    const double d = dist(df);
    if (d < best_d) {
      best_d = d;
      best = df;
    }
  }
  const double centre = best;
  const int fine = static_cast<int>(std::llround(opt.coarse_step / opt.fine_step));
  for (int i = -fine; i <= fine; ++i) {
    const double df = centre + i * opt.fine_step;
    if (df < 0.0 || df > opt.f_max) continue;
    const double d = dist(df);
    if (d < best_d) {
      best_d = d;
      best = df;
    }
  }
  out.delta_f = best;
  out.err = 0.5 * opt.fine_step;
  if (best > 0.0 && best < opt.f_max) {
    const double dm = dist(best - opt.fine_step);
    const double dp = dist(best + opt.fine_step);
    const double curv = dm - 2.0 * best_d + dp;
    if (curv > 0.0) {
      out.delta_f = best + 0.5 * opt.fine_step * (dm - dp) / curv;
    }
  }
  std::vector<std::size_t> order(out.grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return out.grid[a] < out.grid[b]; });
  std::vector<double> g;
  std::vector<double> d;
  for (auto i : order) {
    g.push_back(out.grid[i]);
    d.push_back(out.distance[i]);
  }
  out.grid = std::move(g);
  out.distance = std::move(d);
  return out;
}

// Decomposition of a curve into weighted basis curves.

struct Decomposition {
  std::vector<double> weights;
  double residual = 0.0;  // root mean square
};

/// Non-negative weights summing to one minimizing the squared distance, by
/// enumerating active sets of the simplex-constrained problem.
inline Decomposition decompose_scurve(const SCurve& meas, const std::vector<SCurve>& basis) {
  const std::size_t m = basis.size();
  require(m >= 1 && m <= 12, ErrorKind::kInvalidArgument, "basis must hold 1 to 12 curves");
  const std::size_t n = meas.size();
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) b(i) = meas.p[i].p;
  for (std::size_t j = 0; j < m; ++j) {
    require(basis[j].power_db == meas.power_db, ErrorKind::kInvalidArgument, "basis curves must share the grid");
    for (std::size_t i = 0; i < n; ++i) a(i, j) = basis[j].p[i].p;
  }
  if (m > 1) {
    Eigen::MatrixXd centred = a.colwise() - a.col(0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred.rightCols(m - 1));
    const auto& sv = svd.singularValues();
    require(sv.size() > 0 && sv(sv.size() - 1) > 1e-6 * std::max(1.0, sv(0)), ErrorKind::kConditioning,
            "basis curves are nearly linearly dependent");
  }

  Decomposition best;
  best.residual = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < m; ++j) if (mask & (std::size_t{1} << j)) idx.push_back(j);
    const std::size_t k = idx.size();
    // KKT system for min |A w - b|^2 subject to sum w = 1.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs(k + 1);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) kkt(p, q) = 2.0 * a.col(idx[p]).dot(a.col(idx[q]));
      kkt(p, k) = 1.0;
      kkt(k, p) = 1.0;
      rhs(p) = 2.0 * a.col(idx[p]).dot(b);
    }
    rhs(k) = 1.0;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) continue;
    std::vector<double> w(m, 0.0);
    bool feasible = true;
    for (std::size_t p = 0; p < k; ++p) {
      if (sol(p) < -1e-12) feasible = false;
      w[idx[p]] = std::max(0.0, sol(p));
    }
    if (!feasible) continue;
    Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), m);
    const double r = std::sqrt((a * wv - b).squaredNorm() / n);
    if (r < best.residual - 1e-15) {
      best.residual = r;
      best.weights = w;
    }
  }
  require(!best.weights.empty(), ErrorKind::kConditioning, "no feasible decomposition");
  return best;
}

/// t_M = -T1 ln(w / w_prepared) in ns; T1 in us.
inline double measurement_time(double surviving_weight, double prepared_fraction, double t1_us) {
  require(surviving_weight > 0.0, ErrorKind::kOutOfRange, "surviving weight must be > 0");
  return -t1_us * 1e3 * std::log(std::min(1.0, surviving_weight / prepared_fraction));
}

/// Probability that a pi pulse on the thermal initial state leaves the qubit in |1>.
inline double prepared_fraction(const ChainParams& chain) {
  return (1.0 - chain.prep_error_p1) * (1.0 - chain.pulse_error) + chain.prep_error_p1 * chain.pulse_error;
}

struct MeasurementTime {
  Decomposition decomposition;  // weights on (|0> curve, ideal |1> curve)
  double t_m_ns = kNaN;
  SCurve ideal_one;             // |0> curve at the readout frequency moved by the |1> shift
};

/// Effective measurement time from the measured |1> S-curve: the surviving
/// weight on the relaxation-free |1> curve, normalized by the prepared fraction.
inline MeasurementTime effective_measurement_time(const Model& m, const SCurve& zero, const SCurve& one,
                                                  double delta_f1, std::size_t shots, std::uint64_t seed) {
  MeasurementTime out;
  out.ideal_one = measure_scurve(m, 0, zero.power_db, shots, seed, delta_f1);
  out.decomposition = decompose_scurve(one, {zero, out.ideal_one});
  out.t_m_ns = measurement_time(out.decomposition.weights[1], prepared_fraction(m.chain), m.setup.qubit.t1_10);
  return out;
}

// Generic results.

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> err;
};

struct ExperimentResult {
  std::string kind;
  std::string x_label;
  std::vector<double> x;
  std::vector<Series> series;
  std::map<std::string, Estimate> fit;
  double residual = 0.0;
  std::vector<std::string> warnings;
};

inline Series to_series(const std::string& name, const std::vector<BinomialEstimate>& v) {
  Series s{name, {}, {}};
  for (const auto& e : v) {
    s.y.push_back(e.p);
    s.err.push_back(e.err);
  }
  return s;
}

/// Power at which the relevant contrast peaks, from a coarse S-curve scan.
inline double operating_power(const Model& m, bool composite, std::size_t shots, std::uint64_t seed,
                              std::size_t points = 25) {
  if (std::isfinite(m.op.power_db)) return m.op.power_db;
  const int excited = composite ? 2 : 1;
  const auto grid = auto_power_grid(m, {0, excited}, points);
  const auto curves = run_scurves(m, {0, excited}, grid, shots, seed);
  return contrast(curves[0], curves[1]).power_db;
}

struct OscillationFit {
  Estimate visibility;
  Estimate decay_us;
  Estimate frequency_mhz;
  Estimate offset;
  double residual = 0.0;
};

inline OscillationFit fit_visibility(const std::vector<double>& t, const Series& s, double f_hint) {
  const auto r = fit_damped_oscillation(t, s.y, s.err, f_hint);
  OscillationFit f;
  f.offset = Estimate::symmetric(r.params(0), r.errors(0));
  f.visibility = Estimate::symmetric(r.params(1), r.errors(1));
  f.decay_us = Estimate::symmetric(r.params(2) * 1e-3, r.errors(2) * 1e-3);
  f.frequency_mhz = Estimate::symmetric(r.params(3) * 1e3, r.errors(3) * 1e3);
  f.residual = std::sqrt(r.rss / static_cast<double>(t.size()));
  return f;
}

inline ExperimentResult run_rabi(const Model& m, const std::vector<double>& durations, bool composite,
                                 std::size_t shots, std::uint64_t seed, double power_db = kNaN) {
  require(!durations.empty(), ErrorKind::kInvalidArgument, "empty Rabi sweep");
  const double span = durations.back() - durations.front();
  require(span * m.op.rabi_frequency >= 3.0, ErrorKind::kInvalidArgument, "Rabi sweep must cover at least 3 periods");
  if (!std::isfinite(power_db)) power_db = operating_power(m, composite, std::max<std::size_t>(shots / 4, 200), seed);
  std::vector<BinomialEstimate> p;
  for (double d : durations) p.push_back(measure(rabi_sequence(m, d, composite, power_db), m.setup, shots, seed)[0]);
  ExperimentResult r;
  r.kind = "rabi";
  r.x_label = "duration_ns";
  r.x = durations;
  r.series.push_back(to_series("p_B", p));
  const auto f = fit_visibility(r.x, r.series[0], m.op.rabi_frequency);
  r.fit["visibility"] = f.visibility;
  r.fit["decay_us"] = f.decay_us;
  r.fit["frequency_mhz"] = f.frequency_mhz;
  r.fit["offset"] = f.offset;
  r.fit["power_db"] = {power_db, 0.0, 0.0};
  r.residual = f.residual;
  return r;
}

inline ExperimentResult run_t1(const Model& m, const std::vector<double>& delays, std::size_t shots, std::uint64_t seed,
                               bool composite = true, double power_db = kNaN) {
  require(delays.size() >= 4, ErrorKind::kInvalidArgument, "T1 sweep needs at least 4 delays");
  if (!std::isfinite(power_db)) power_db = operating_power(m, composite, std::max<std::size_t>(shots / 4, 200), seed);
  std::vector<BinomialEstimate> p;
  for (double d : delays) p.push_back(measure(t1_sequence(m, d, composite, power_db), m.setup, shots, seed)[0]);
  ExperimentResult r;
  r.kind = "t1";
  r.x_label = "delay_ns";
  r.x = delays;
  r.series.push_back(to_series("p_B", p));
  const auto f = fit_exponential(r.x, r.series[0].y, r.series[0].err);
  r.fit["t1_us"] = Estimate::symmetric(f.params(2) * 1e-3, f.errors(2) * 1e-3);
  r.fit["amplitude"] = Estimate::symmetric(f.params(1), f.errors(1));
  r.fit["offset"] = Estimate::symmetric(f.params(0), f.errors(0));
  r.fit["power_db"] = {power_db, 0.0, 0.0};
  r.residual = std::sqrt(f.rss / static_cast<double>(r.x.size()));
  return r;
}

inline ExperimentResult run_ramsey(const Model& m, const std::vector<double>& delays, std::size_t shots,
                                   std::uint64_t seed, bool composite = true, double power_db = kNaN) {
  require(delays.size() >= 6, ErrorKind::kInvalidArgument, "Ramsey sweep needs at least 6 delays");
  if (!std::isfinite(power_db)) power_db = operating_power(m, composite, std::max<std::size_t>(shots / 4, 200), seed);
  std::vector<BinomialEstimate> p;
  for (double d : delays) p.push_back(measure(ramsey_sequence(m, d, composite, power_db), m.setup, shots, seed)[0]);
  ExperimentResult r;
  r.kind = "ramsey";
  r.x_label = "delay_ns";
  r.x = delays;
  r.series.push_back(to_series("p_B", p));
  const auto f = fit_visibility(r.x, r.series[0], m.op.ramsey_detuning);
  r.fit["t2_us"] = f.decay_us;
  r.fit["fringe_mhz"] = f.frequency_mhz;
  r.fit["amplitude"] = f.visibility;
  r.fit["offset"] = f.offset;
  r.fit["power_db"] = {power_db, 0.0, 0.0};
  r.residual = f.residual;
  return r;
}

struct Interval {
  double value = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// 1/Tphi = 1/T2 - 1/(2 T1) with extremes over the corners of the input box.
/// Uncertainties are half-widths. Infinity marks vanishing pure dephasing.
inline Interval extract_tphi(double t1, double t1_err, double t2, double t2_err) {
  require(t1 > 0.0 && t2 > 0.0, ErrorKind::kInvalidArgument, "T1 and T2 must be > 0");
  require(t2 - t2_err <= 2.0 * (t1 + t1_err), ErrorKind::kInconsistency, "T2 exceeds 2 T1 beyond the uncertainties");
  auto tphi = [](double a, double b) {
    const double rate = 1.0 / b - 0.5 / a;
    return rate <= 0.0 ? kInfinity : 1.0 / rate;
  };
  Interval out;
  out.value = tphi(t1, t2);
  out.min = kInfinity;
  out.max = 0.0;
  for (double a : {t1 - t1_err, t1 + t1_err}) {
    for (double b : {t2 - t2_err, t2 + t2_err}) {
      const double v = tphi(std::max(a, 1e-300), std::max(b, 1e-300));
      out.min = std::min(out.min, v);
      out.max = std::max(out.max, v);
    }
  }
  return out;
}

// Back-action.

struct BackactionResult {
  ExperimentResult rabi;  // series R1, R2, R3
  Estimate r1;
  Estimate r2;
  Estimate r3;
  Estimate ratio21;
  Estimate ratio31;
  std::vector<double> residual_photons;
};

inline Estimate ratio(const Estimate& a, const Estimate& b) {
  const double v = a.value / b.value;
  const double e = v * std::hypot(a.err_hi / a.value, b.err_hi / b.value);
  return Estimate::symmetric(v, e);
}

inline BackactionResult run_backaction(const Model& m, const std::vector<double>& durations, std::size_t shots,
                                       std::uint64_t seed, double power_db = kNaN) {
  if (!std::isfinite(power_db)) power_db = operating_power(m, false, std::max<std::size_t>(shots / 4, 200), seed);
  std::vector<BinomialEstimate> p1;
  std::vector<BinomialEstimate> p2;
  std::vector<BinomialEstimate> p3;
  BackactionResult out;
  for (double d : durations) {
    const auto both = plan_shots(backaction_sequence(m, d, true, power_db), m.setup);
    if (out.residual_photons.empty()) {
      out.residual_photons = residual_photons(both);
      for (double n : out.residual_photons) {
        if (n >= 0.5) out.rabi.warnings.push_back("gap too short: " + std::to_string(n) + " photons left");
      }
    }
    const auto r = outcome_statistics(both, shots, seed);
    p1.push_back(r[0]);
    p2.push_back(r[1]);
    p3.push_back(measure(backaction_sequence(m, d, false, power_db), m.setup, shots, seed)[0]);
  }
  out.rabi.kind = "backaction";
  out.rabi.x_label = "duration_ns";
  out.rabi.x = durations;
  out.rabi.series = {to_series("R1", p1), to_series("R2", p2), to_series("R3", p3)};
  const auto f1 = fit_visibility(durations, out.rabi.series[0], m.op.rabi_frequency);
  const auto f2 = fit_visibility(durations, out.rabi.series[1], m.op.rabi_frequency);
  const auto f3 = fit_visibility(durations, out.rabi.series[2], m.op.rabi_frequency);
  out.r1 = f1.visibility;
  out.r2 = f2.visibility;
  out.r3 = f3.visibility;
  out.ratio21 = ratio(out.r2, out.r1);
  out.ratio31 = ratio(out.r3, out.r1);
  out.rabi.fit = {{"R1", out.r1}, {"R2", out.r2}, {"R3", out.r3}, {"R2_over_R1", out.ratio21},
                  {"R3_over_R1", out.ratio31}, {"power_db", {power_db, 0.0, 0.0}}};
  return out;
}

// AC-Stark photon calibration.

struct StarkPoint {
  double power_db = 0.0;
  double n_low = kNaN;     // stable low branch
  double n_high = kNaN;    // stable high branch
  double n = 0.0;          // branch occupied on an up-sweep
  double shift_mhz = 0.0;  // f01(n) - f01(0)
  Estimate n_estimate;     // from the shift, with the coupling uncertainty
  double t1_us = 0.0;
};

struct StarkResult {
  std::vector<StarkPoint> points;
  double jump_power_db = kNaN;
  double n_before = kNaN;  // low branch at the turning point
  double n_after = kNaN;   // high branch at the same drive
};

inline StarkResult run_stark_calibration(const Model& m, const std::vector<double>& powers, double dg = 0.003) {
  const auto& s = m.setup;
  const auto curve = s.curve(0);
  StarkResult out;
  const auto cp = m.device.coupling();
  CouplingParams lo = cp;
  lo.g += dg;
  CouplingParams hi = cp;
  hi.g -= dg;
  const DressedLadder ladder_lo(m.spectrum, lo);
  const DressedLadder ladder_hi(m.spectrum, hi);
  const double f0 = m.ladder->f01(0.0);
  const double n_top = 8.0 * std::max(1e-3, curve(0.0)) / std::abs(s.jba.kerr) + 10.0;
  const auto tp = turning_points(s.jba, curve, n_top);
  const double high_edge = tp.size() >= 2 ? tp.back() : kInfinity;
  bool jumped = false;
  for (double p : powers) {
    StarkPoint pt;
    pt.power_db = p;
    const double eps = power_to_epsilon(s.jba, DriveConfig{s.f_drive, p, s.attenuation_db});
    std::vector<double> stable;
    for (const auto& st : steady_states(s.jba, eps, curve)) {
      if (st.stability == Stability::kStable) stable.push_back(st.n);
    }
    require(!stable.empty(), ErrorKind::kConvergence, "no stable steady state");
    if (stable.size() > 1) {
      pt.n_low = stable.front();
      pt.n_high = stable.back();
    } else if (stable.front() >= high_edge) {
      pt.n_high = stable.front();
      jumped = true;
    } else {
      pt.n_low = stable.front();
      jumped = false;
    }
    pt.n = jumped ? pt.n_high : pt.n_low;
    const double shift = m.ladder->f01(pt.n) - f0;
    pt.shift_mhz = shift * 1e3;
    if (pt.n > 0.0) {
      const double n_mid = photons_from_shift(*m.ladder, shift);
      const double n_a = photons_from_shift(ladder_lo, shift);
      const double n_b = photons_from_shift(ladder_hi, shift);
      pt.n_estimate = {n_mid, n_mid - std::min(n_a, n_b), std::max(n_a, n_b) - n_mid};
    } else {
      pt.n_estimate = {0.0, 0.0, 0.0};
    }
    const double delta_eff = m.op.delta - shift;
    pt.t1_us = combine_t1(purcell_t1(m.device.g, delta_eff, s.jba.kappa), m.device.t1_other);
    out.points.push_back(pt);
  }
  if (tp.size() >= 2) {
    const double eps = std::sqrt(detail::general_response(s.jba, curve, tp.front()));
    out.jump_power_db = epsilon_to_power(s.jba, eps, s.f_drive, s.attenuation_db);
    out.n_before = tp.front();
    const auto roots = steady_states(s.jba, eps * (1.0 + 1e-9), curve);
    out.n_after = roots.back().n;
  }
  return out;
}

struct KerrCalibration {
  double kerr = 0.0;     // GHz per photon
  double n_before = 0.0;
  double n_after = 0.0;
  double target = 0.0;   // geometric mean of n_before and n_after
};

/// Geometric mean of the middles (on a log scale) of 5-10 and 50-100 photons.
inline double default_kerr_target() { return std::sqrt(std::sqrt(5.0 * 10.0) * std::sqrt(50.0 * 100.0)); }

/// Kerr constant placing the deterministic up-sweep jump of the level-0
/// resonator at the operating point so that sqrt(n_before n_after) = target.
inline KerrCalibration calibrate_kerr(const DeviceParams& device, const OperatingPoint& op,
                                      double target = default_kerr_target()) {
  const auto base = build_model(device, op);
  auto evaluate = [&](double kerr) {
    Model m = base;
    m.setup.jba.kerr = kerr;
    const auto r = run_stark_calibration(m, {});
    require(std::isfinite(r.n_before), ErrorKind::kNoBistability, "no bistability at the calibration point");
    return std::pair{r.n_before, r.n_after};
  };
  double lo = std::log(1e-5);
  double hi = std::log(1e-2);
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto [a, b] = evaluate(-std::exp(mid));
    (std::sqrt(a * b) > target ? lo : hi) = mid;
  }
  KerrCalibration out;
  out.kerr = -std::exp(0.5 * (lo + hi));
  const auto [a, b] = evaluate(out.kerr);
  out.n_before = a;
  out.n_after = b;
  out.target = target;
  return out;
}

// Coherence and contrast versus qubit detuning.

struct TradeoffPoint {
  double delta = 0.0;  // GHz
  Contrast contrast;
  double t1_us = 0.0;
  double tphi_us = 0.0;
  double two_chi_mhz = 0.0;
  Estimate delta_f1_mhz;
};

struct TradeoffResult {
  std::vector<TradeoffPoint> points;
  double best_delta = kNaN;
  double best_contrast = kNaN;
  double window_width = 0.0;  // GHz, contiguous region above the level around the maximum
  double window_level = 0.85;
};

/// Width of the contiguous region around the maximum where y > level, with
/// linear interpolation of the crossings.
inline double window_width(const std::vector<double>& x, const std::vector<double>& y, double level) {
  const auto best = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  if (y[best] <= level) return 0.0;
  std::size_t i = best;
  while (i > 0 && y[i - 1] > level) --i;
  std::size_t j = best;
  while (j + 1 < y.size() && y[j + 1] > level) ++j;
  double left = x[i];
  if (i > 0) left = x[i - 1] + (level - y[i - 1]) / (y[i] - y[i - 1]) * (x[i] - x[i - 1]);
  double right = x[j];
  if (j + 1 < y.size()) right = x[j] + (level - y[j]) / (y[j + 1] - y[j]) * (x[j + 1] - x[j]);
  return right - left;
}

struct TradeoffOptions {
  bool composite = true;
  std::size_t power_points = 20;
  bool measure_shift = false;
  ShiftOptions shift;
};

inline TradeoffResult contrast_vs_detuning(const DeviceParams& device, OperatingPoint op, const ChainParams& chain,
                                           const std::vector<double>& deltas, std::size_t shots, std::uint64_t seed,
                                           const TradeoffOptions& opt = {}) {
  TradeoffResult out;
  const int excited = opt.composite ? 2 : 1;
  for (double d : deltas) {
    op.delta = d;
    const Model m = build_model(device, op, chain);
    TradeoffPoint pt;
    pt.delta = d;
    const auto grid = auto_power_grid(m, {0, excited}, opt.power_points);
    const auto curves = run_scurves(m, {0, excited}, grid, shots, seed);
    pt.contrast = contrast(curves[0], curves[1]);
    pt.t1_us = m.coherence.t1_total;
    pt.tphi_us = m.coherence.tphi_flux;
    pt.two_chi_mhz = m.ladder->shifts().cavity_pull * 1e3;
    if (opt.measure_shift) {
      const auto grid1 = auto_power_grid(m, {0, 1}, opt.power_points);
      const auto c = run_scurves(m, {0, 1}, grid1, shots, seed);
      const auto sh = scurve_shift(m, c[0], c[1], shots, seed, opt.shift);
      pt.delta_f1_mhz = Estimate::symmetric(sh.delta_f * 1e3, sh.err * 1e3);
    }
    out.points.push_back(pt);
  }
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& p : out.points) {
    x.push_back(p.delta);
    y.push_back(p.contrast.value);
  }
  const auto best = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  out.best_delta = x[best];
  out.best_contrast = y[best];
  out.window_width = window_width(x, y, out.window_level);
  return out;
}

}  // namespace jbasim

#endif  // JBASIM_EXPERIMENTS_HPP
