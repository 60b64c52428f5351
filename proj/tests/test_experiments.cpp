#include <gtest/gtest.h>

#include "jbasim/experiments.hpp"

using namespace jbasim;

namespace {

Model fig2(bool relaxation = true) {
  DeviceParams d;
  d.relaxation = relaxation;
  return build_model(d, OperatingPoint{});
}

Model fig3(bool relaxation = true) {
  DeviceParams d;
  d.relaxation = relaxation;
  OperatingPoint op;
  op.delta = 0.25;
  op.readout_detuning = 0.025;
  op.timing = {10.0, 40.0, 50.0, 0.8};
  op.attenuation_db = -79.6;
  op.power_db = -30.5;
  return build_model(d, op);
}

SCurve sigmoid(double centre, double width, const std::vector<double>& grid) {
  SCurve c;
  c.power_db = grid;
  for (double p : grid) c.p.push_back(binomial(0, 1));
  for (std::size_t i = 0; i < grid.size(); ++i) c.p[i].p = 1.0 / (1.0 + std::exp(-(grid[i] - centre) / width));
  return c;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Fitting, DampedOscillationRoundTrip) {
  const std::vector<double> truth = {0.48, 0.93, 510.0, 0.0291, 0.4};
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(truth.data(), 5);
  std::vector<double> t;
  std::vector<double> y;
  for (double x = 0.0; x <= 300.0; x += 2.5) {
    t.push_back(x);
    y.push_back(damped_oscillation(x, p));
  }
  const auto r = fit_damped_oscillation(t, y, {}, 0.029);
  for (int i = 0; i < 5; ++i) EXPECT_LT(relative(r.params(i), truth[i]), 1e-3) << i;
}

TEST(Fitting, UndampedOscillationHasInfiniteDecay) {
  Eigen::VectorXd p(5);
  p << 0.5, 0.8, 1e300, 0.005, 0.0;
  std::vector<double> t;
  std::vector<double> y;
  for (double x = 0.0; x <= 1000.0; x += 10.0) {
    t.push_back(x);
    y.push_back(0.5 - 0.4 * std::cos(kTwoPi * 0.005 * x));
  }
  const auto r = fit_damped_oscillation(t, y, {}, 0.005);
  EXPECT_TRUE(r.params(2) > 1e9);
  EXPECT_LT(relative(r.params(1), 0.8), 1e-3);
  EXPECT_LT(relative(r.params(3), 0.005), 1e-3);
}

TEST(Fitting, ExponentialRoundTrip) {
  Eigen::VectorXd p(3);
  p << 0.05, 0.71, 452.0;
  std::vector<double> t;
  std::vector<double> y;
  for (double x = 0.0; x <= 1500.0; x += 50.0) {
    t.push_back(x);
    y.push_back(exponential_decay(x, p));
  }
  const auto r = fit_exponential(t, y, {});
  for (int i = 0; i < 3; ++i) EXPECT_LT(relative(r.params(i), p(i)), 1e-3) << i;
}

TEST(Fitting, TooFewPoints) {
  const std::vector<double> t = {0, 1, 2};
  EXPECT_THROW(fit_exponential(t, t, {}), Error);
  EXPECT_THROW(fit_damped_oscillation(t, t, {}), Error);
}

TEST(Tphi, Arithmetic) {
  EXPECT_NEAR(extract_tphi(0.5, 0.0, 0.4, 0.0).value, 1.0 / (2.5 - 1.0), 1e-12);
  EXPECT_NEAR(extract_tphi(0.5, 0.0, 0.4, 0.0).value, 0.667, 5e-4);
  EXPECT_TRUE(std::isinf(extract_tphi(0.5, 0.0, 1.0, 0.0).value));
}

TEST(Tphi, FourCornerInterval) {
  const auto r = extract_tphi(0.5, 0.05, 0.4, 0.04);
  double lo = kInfinity;
  double hi = 0.0;
  for (double t1 : {0.45, 0.55}) {
    for (double t2 : {0.36, 0.44}) {
      const double v = 1.0 / (1.0 / t2 - 1.0 / (2.0 * t1));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  EXPECT_NEAR(r.min, lo, 1e-12);
  EXPECT_NEAR(r.max, hi, 1e-12);
  EXPECT_LT(r.min, r.value);
  EXPECT_GT(r.max, r.value);
}

TEST(Tphi, InconsistentInputs) {
  try {
    extract_tphi(0.3, 0.01, 0.9, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInconsistency);
  }
  EXPECT_NO_THROW(extract_tphi(0.3, 0.01, 0.62, 0.01));
}

TEST(Decompose, IdentityAndMixture) {
  const auto grid = linspace(-35.0, -28.0, 29);
  const std::vector<SCurve> basis = {sigmoid(-31.0, 0.3, grid), sigmoid(-32.5, 0.35, grid), sigmoid(-33.6, 0.3, grid)};
  const auto same = decompose_scurve(basis[0], basis);
  EXPECT_NEAR(same.weights[0], 1.0, 1e-9);
  EXPECT_NEAR(same.weights[1], 0.0, 1e-9);
  EXPECT_NEAR(same.weights[2], 0.0, 1e-9);
  SCurve mix = basis[0];
  for (std::size_t i = 0; i < grid.size(); ++i) mix.p[i].p = 0.7 * basis[0].p[i].p + 0.3 * basis[1].p[i].p;
  const auto d = decompose_scurve(mix, basis);
  EXPECT_NEAR(d.weights[0], 0.7, 0.02);
  EXPECT_NEAR(d.weights[1], 0.3, 0.02);
  EXPECT_NEAR(d.weights[2], 0.0, 0.02);
  EXPECT_LT(d.residual, 1e-9);
}

TEST(Decompose, WeightsOnSimplex) {
  const auto grid = linspace(-35.0, -28.0, 29);
  const std::vector<SCurve> basis = {sigmoid(-31.0, 0.3, grid), sigmoid(-32.5, 0.35, grid)};
  SCurve beyond = sigmoid(-30.0, 0.3, grid);
  const auto d = decompose_scurve(beyond, basis);
  double sum = 0.0;
  for (double w : d.weights) {
    EXPECT_GE(w, 0.0);
    sum += w;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(d.weights[0], 1.0, 1e-12);
}

TEST(Decompose, IllConditionedBasis) {
  const auto grid = linspace(-35.0, -28.0, 29);
  const auto a = sigmoid(-31.0, 0.3, grid);
  try {
    decompose_scurve(a, {a, a});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConditioning);
  }
}

TEST(MeasurementTime, Arithmetic) {
  const ChainParams chain;
  const double pf = prepared_fraction(chain);
  EXPECT_NEAR(pf, 0.99 * 0.99 + 0.01 * 0.01, 1e-15);
  EXPECT_NEAR(measurement_time(pf, pf, 0.45), 0.0, 1e-12);
  EXPECT_NEAR(measurement_time(pf * std::exp(-40.0 / 450.0), pf, 0.45), 40.0, 1e-9);
  EXPECT_THROW(measurement_time(0.0, pf, 0.45), Error);
}

TEST(WindowWidth, Interpolation) {
  const std::vector<double> x = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const std::vector<double> y = {0.80, 0.90, 0.92, 0.88, 0.84, 0.70};
  EXPECT_NEAR(window_width(x, y, 0.85), (0.5 + 0.1 * 0.75) - (0.2 + 0.1 * 0.5), 1e-12);
  EXPECT_EQ(window_width(x, y, 0.95), 0.0);
  EXPECT_NEAR(window_width(x, y, 0.5), 0.5, 1e-12);
}

TEST(Contrast, LargestSeparation) {
  const auto grid = linspace(-35.0, -28.0, 29);
  const auto lo = sigmoid(-31.0, 0.3, grid);
  const auto hi = sigmoid(-32.5, 0.3, grid);
  const auto c = contrast(lo, hi);
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) best = std::max(best, hi.p[i].p - lo.p[i].p);
  EXPECT_DOUBLE_EQ(c.value, best);
  EXPECT_DOUBLE_EQ(c.power_db, grid[c.index]);
}

TEST(Model, CoherenceBudget) {
  const auto m = fig2();
  EXPECT_NEAR(m.coherence.t1_total, 0.45, 0.01);
  EXPECT_DOUBLE_EQ(m.setup.qubit.t1_10, m.coherence.t1_total);
  EXPECT_GT(m.setup.qubit.t1_21, 0.2);
  EXPECT_LT(m.setup.qubit.t1_21, 0.4);
  EXPECT_NEAR(m.setup.f_drive, 6.4535 - 0.017, 1e-12);
}

TEST(SCurves, ShapeAndDeterminism) {
  const auto m = fig2();
  const auto grid = auto_power_grid(m, {0, 1}, 12);
  const auto a = measure_scurve(m, 0, grid, 500, 3);
  const auto b = measure_scurve(m, 0, grid, 500, 3);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(a.p[i].successes, b.p[i].successes);
    EXPECT_GE(a.p[i].p, 0.0);
    EXPECT_LE(a.p[i].p, 1.0);
  }
  EXPECT_LT(a.p.front().p, 0.05);
  EXPECT_GT(a.p.back().p, 0.95);
  EXPECT_THROW(measure_scurve(m, 0, {-30.0, -31.0}, 500, 3), Error);
}

TEST(SCurves, ShiftOfReferenceIsZero) {
  const auto m = fig2();
  const auto grid = auto_power_grid(m, {0}, 14, 2.0, 1.0);
  const auto ref = measure_scurve(m, 0, grid, 500, 5);
  const auto sh = scurve_shift(m, ref, ref, 500, 5);
  EXPECT_EQ(sh.delta_f, 0.0);
}

TEST(SCurves, ShiftNeedsOverlap) {
  const auto m = fig2();
  const auto grid = linspace(-45.0, -40.0, 6);
  const auto ref = measure_scurve(m, 0, grid, 200, 5);
  EXPECT_THROW(scurve_shift(m, ref, ref, 200, 5), Error);
}

TEST(SCurves, RelaxationFreeContrastCeiling) {
  Model m = fig2(false);
  m.setup.chain.prep_error_p1 = 0.0;
  m.setup.chain.pulse_error = 0.0;
  m.setup.chain.shelving_leak_p1 = 0.0;
  const auto grid = auto_power_grid(m, {0, 1}, 30, 1.5, 0.5);
  const auto c = run_scurves(m, {0, 1}, grid, 1000, 7);
  EXPECT_GT(contrast(c[0], c[1]).value, 0.98);
}

TEST(SCurves, ShelvingHelps) {
  for (double delta : {0.38, 0.5}) {
    DeviceParams d;
    OperatingPoint op;
    op.delta = delta;
    const auto m = build_model(d, op);
    const auto grid = auto_power_grid(m, {0, 1, 2}, 24);
    const auto c = run_scurves(m, {0, 1, 2}, grid, 1000, 9);
    const auto direct = contrast(c[0], c[1]);
    const auto shelved = contrast(c[0], c[2]);
    EXPECT_GE(shelved.value + 2.0 * std::hypot(shelved.err, direct.err), direct.value) << delta;
  }
}

TEST(SCurves, CommonRandomNumbersKeepMeans) {
  const auto m = fig2();
  const auto grid = auto_power_grid(m, {0, 1}, 16);
  const auto shared = measure_scurve(m, 1, grid, 2000, 11);
  const auto independent = measure_scurve(m, 1, grid, 2000, 12345);
  double a = 0.0;
  double b = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    a += shared.p[i].p;
    b += independent.p[i].p;
    var += std::pow(shared.p[i].err, 2) + std::pow(independent.p[i].err, 2);
  }
  EXPECT_LT(std::abs(a - b), std::sqrt(var));
}

TEST(Rabi, FloorAtZeroDuration) {
  const auto m = fig2();
  const double power = operating_power(m, true, 500, 3);
  const auto p0 = measure(rabi_sequence(m, 0.0, true, power), m.setup, 2000, 3)[0];
  EXPECT_LT(p0.p, 0.05);
  EXPECT_THROW(run_rabi(m, linspace(0.0, 50.0, 20), true, 200, 1, power), Error);
}

TEST(Rabi, IdealChainVisibility) {
  Model m = fig2(false);
  m.setup.chain.prep_error_p1 = 0.0;
  m.setup.chain.pulse_error = 0.0;
  m.setup.chain.shelving_leak_p1 = 0.0;
  m.setup.noiseless_field = true;
  m.setup.noiseless_amplifier = true;
  const double power = 0.5 * (jump_power(m, 0) + jump_power(m, 2));
  const auto r = run_rabi(m, linspace(0.0, 150.0, 61), true, 200, 1, power);
  EXPECT_NEAR(r.fit.at("visibility").value, 1.0, 0.02);
  EXPECT_NEAR(r.fit.at("frequency_mhz").value, 29.0, 0.3);
}

TEST(Coherence, T1RoundTrip) {
  const auto m = fig2();
  const auto r = run_t1(m, linspace(0.0, 1500.0, 16), 2000, 21);
  EXPECT_NEAR(r.fit.at("t1_us").value, m.setup.qubit.t1_10, 0.03);
  EXPECT_GT(r.fit.at("t1_us").err_lo, 0.0);
}

TEST(Coherence, RamseyFringeAndT2Bound) {
  const auto m = fig2();
  const auto r = run_ramsey(m, linspace(0.0, 1000.0, 51), 1000, 23);
  EXPECT_LT(relative(r.fit.at("fringe_mhz").value, 5.0), 0.01);
  EXPECT_LE(r.fit.at("t2_us").value, 2.0 * m.setup.qubit.t1_10 * 1.05);
}

TEST(Backaction, RelaxationFreeVisibilitiesAgree) {
  const auto m = fig3(false);
  const auto r = run_backaction(m, linspace(0.0, 120.0, 25), 1000, 31, m.op.power_db);
  const auto close = [](const Estimate& a, const Estimate& b) {
    return std::abs(a.value - b.value) <= 2.0 * std::hypot(a.err_hi, b.err_hi);
  };
  EXPECT_TRUE(close(r.r1, r.r2)) << r.r1.value << " " << r.r2.value;
  EXPECT_TRUE(close(r.r1, r.r3)) << r.r1.value << " " << r.r3.value;
  EXPECT_TRUE(close(r.r2, r.r3)) << r.r2.value << " " << r.r3.value;
  ASSERT_EQ(r.residual_photons.size(), 1u);
  EXPECT_LT(r.residual_photons[0], 0.5);
}

TEST(Stark, ZeroPowerAndMonotoneT1) {
  const auto m = fig2();
  const double jump = jump_power(m, 0);
  const auto r = run_stark_calibration(m, linspace(jump - 10.0, jump + 5.0, 61));
  EXPECT_NEAR(r.jump_power_db, jump, 1e-9);
  const auto far = run_stark_calibration(m, {-120.0});
  EXPECT_LT(far.points[0].n, 1e-3);
  EXPECT_LT(far.points[0].n_estimate.value, 1e-2);
  double previous = 0.0;
  for (const auto& p : r.points) {
    EXPECT_GE(p.t1_us, previous - 1e-12) << p.power_db;
    previous = p.t1_us;
  }
  EXPECT_LT(r.n_before, r.n_after);
  for (const auto& p : r.points) {
    if (p.n > 2.0) EXPECT_LT(relative(p.n_estimate.value, p.n), 1e-3) << p.power_db;
  }
}

TEST(Stark, KerrCalibrationHitsTarget) {
  const auto k = calibrate_kerr(DeviceParams{}, OperatingPoint{});
  EXPECT_NEAR(std::sqrt(k.n_before * k.n_after), k.target, 1e-6 * k.target);
  EXPECT_NEAR(k.target, std::sqrt(std::sqrt(50.0) * std::sqrt(5000.0)), 1e-12);
  EXPECT_LT(k.kerr, 0.0);
}
