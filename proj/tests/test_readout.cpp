#include <gtest/gtest.h>

#include <cstring>

#include "jbasim/experiments.hpp"

using namespace jbasim;

namespace {

const Model& fig2() {
  static const Model m = [] {
    DeviceParams d;
    OperatingPoint op;
    op.readout_detuning = 0.017;
    return build_model(d, op);
  }();
  return m;
}

const Model& fig3() {
  static const Model m = [] {
    DeviceParams d;
    OperatingPoint op;
    op.delta = 0.25;
    op.readout_detuning = 0.025;
    op.timing = {10.0, 40.0, 50.0, 0.8};
    op.attenuation_db = -79.6;
    return build_model(d, op);
  }();
  return m;
}

ReadoutSetup ideal(ReadoutSetup s) {
  s.chain.prep_error_p1 = 0.0;
  s.chain.pulse_error = 0.0;
  s.chain.shelving_leak_p1 = 0.0;
  s.qubit.relaxation = false;
  return s;
}

double mid_power(const Model& m) { return 0.5 * (jump_power(m, 0) + jump_power(m, 1)); }

}  // namespace

TEST(Preparation, PerfectGroundState) {
  ChainParams c;
  c.prep_error_p1 = 0.0;
  for (std::uint64_t s = 0; s < 2000; ++s) EXPECT_EQ(sample_preparation(0, c, s), 0);
}

TEST(Preparation, ThermalFraction) {
  ChainParams c;
  std::size_t ones = 0;
  const std::size_t n = 10000;
  for (std::uint64_t s = 0; s < n; ++s) ones += sample_preparation(0, c, shot_seed(3, s)) == 1;
  const auto e = binomial(ones, n);
  EXPECT_NEAR(e.p, 0.01, 3.0 * std::sqrt(0.01 * 0.99 / n));
}

TEST(Preparation, SecondLevelComposition) {
  ChainParams c;
  c.prep_error_p1 = 0.0;
  c.pulse_error = 0.1;
  std::size_t twos = 0;
  const std::size_t n = 100000;
  for (std::uint64_t s = 0; s < n; ++s) twos += sample_preparation(2, c, shot_seed(5, s)) == 2;
  const double expected = 0.9 * 0.9;
  EXPECT_NEAR(static_cast<double>(twos) / n, expected, 3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(Preparation, RejectsUnknownTarget) { EXPECT_THROW(sample_preparation(3, ChainParams{}, 1), Error); }

TEST(Jumps, GroundStateNeverJumps) {
  const auto t = sample_jumps(0, QubitModel{}, 1e6, 1);
  EXPECT_TRUE(t.jumps.empty());
}

TEST(Jumps, MeanDecayTime) {
  QubitModel m;
  const std::size_t n = 100000;
  double sum = 0.0;
  std::size_t jumped = 0;
  for (std::uint64_t s = 0; s < n; ++s) {
    const auto t = sample_jumps(1, m, 1e5, shot_seed(7, s));
    if (!t.jumps.empty()) {
      ++jumped;
      sum += t.jumps[0].t;
      EXPECT_EQ(t.jumps[0].from, 1);
      EXPECT_EQ(t.jumps[0].to, 0);
    }
  }
  EXPECT_EQ(jumped, n);
  EXPECT_NEAR(sum / n, 450.0, 0.02 * 450.0);
}

TEST(Jumps, SecondLevelSurvivalAndCascade) {
  QubitModel m;
  const std::size_t n = 50000;
  for (double t : {100.0, 300.0, 600.0}) {
    std::size_t survived = 0;
    for (std::uint64_t s = 0; s < n; ++s) {
      const auto tr = sample_jumps(2, m, 1e4, shot_seed(9, s));
      survived += tr.level_at(t) == 2;
      ASSERT_LE(tr.jumps.size(), 2u);
      for (std::size_t k = 0; k < tr.jumps.size(); ++k) {
        EXPECT_EQ(tr.jumps[k].from - tr.jumps[k].to, 1);
        if (k) EXPECT_GE(tr.jumps[k].t, tr.jumps[k - 1].t);
      }
    }
    const double expected = std::exp(-t / 300.0);
    EXPECT_NEAR(static_cast<double>(survived) / n, expected, 3.0 * std::sqrt(expected * (1 - expected) / n)) << t;
  }
}

TEST(Jumps, HorizonMustBePositive) { EXPECT_THROW(sample_jumps(1, QubitModel{}, 0.0, 1), Error); }

TEST(Homodyne, AmplifierNoiseVariance) {
  const JBAParams p = fig2().setup.jba;
  ChainParams chain;
  const double dt = 0.5;
  const std::size_t n = 2000000;
  FieldTrajectory field;
  field.alpha.assign(n + 1, Complex(0.0, 0.0));
  field.times.assign(n + 1, 0.0);
  const std::vector<double> eps(n, 0.0);
  Rng rng(1);
  const auto rec = synthesize_homodyne(field, eps, p, chain, 6.4365, dt, 0.0, rng);
  double s2 = 0.0;
  for (std::size_t k = 1000; k < n; ++k) s2 += rec.i[k] * rec.i[k];
  const double measured = s2 / static_cast<double>(n - 1000) / (rec.gain * rec.gain);
  const double raw = 1.380649e-23 * 3.0 / (6.62607015e-34 * 6.4365e9) / (2.0 * dt);
  const double a = 1.0 - std::exp(-kTwoPi * 0.01 * dt);
  EXPECT_NEAR(measured, raw * a / (2.0 - a), 0.05 * raw * a / (2.0 - a));
}

TEST(Homodyne, GainScalesSignalAndNoiseTogether) {
  const auto& m = fig2();
  auto plan = plan_shots(state_sequence(m, 0, mid_power(m)), m.setup);
  const auto a = run_shot(plan, 11);
  plan.setup.chain.room_gain_db += 6.0;
  const auto b = run_shot(plan, 11);
  const double ratio = db_to_amplitude_ratio(6.0);
  EXPECT_NEAR(ratio, 2.0, 0.01);
  for (std::size_t k = 0; k < a[0].homodyne.i.size(); k += 97) {
    EXPECT_NEAR(b[0].homodyne.i[k], ratio * a[0].homodyne.i[k], 1e-9 * std::abs(b[0].homodyne.i[k]) + 1e-300);
  }
  EXPECT_NEAR(a[0].i_mean, b[0].i_mean, 1e-12 * std::abs(a[0].i_mean));
  EXPECT_EQ(a[0].outcome, b[0].outcome);
}

TEST(Homodyne, SampleRateCheck) {
  FieldTrajectory field;
  field.alpha.assign(11, Complex(0.0, 0.0));
  field.times.assign(11, 0.0);
  const std::vector<double> eps(10, 0.0);
  ChainParams chain;
  chain.filter_cutoff = 2.0;
  Rng rng(1);
  EXPECT_THROW(synthesize_homodyne(field, eps, fig2().setup.jba, chain, 6.4, 0.5, 0.0, rng), Error);
}

TEST(Discriminate, NoiselessBranches) {
  const auto& m = fig2();
  ReadoutSetup s = ideal(m.setup);
  s.noiseless_field = true;
  s.noiseless_amplifier = true;
  const double jump = jump_power(m, 0);
  const auto low = run_shot(state_sequence(m, 0, jump - 2.0), s, 1);
  const auto high = run_shot(state_sequence(m, 0, jump + 2.0), s, 1);
  EXPECT_EQ(low[0].outcome, Outcome::kLow);
  EXPECT_EQ(high[0].outcome, Outcome::kHigh);
  EXPECT_FALSE(low[0].field.bifurcated);
  EXPECT_TRUE(high[0].field.bifurcated);
  EXPECT_GT(high[0].i_mean - low[0].i_mean, 1.0);
}

TEST(Discriminate, EmptyWindow) {
  HomodyneRecord rec;
  rec.i.assign(10, 0.0);
  EXPECT_THROW(discriminate(rec, 4, 4, 0.0), Error);
  EXPECT_THROW(discriminate(rec, 4, 11, 0.0), Error);
}

TEST(Discriminate, SingleShotCertainty) {
  for (const Model* m : {&fig2(), &fig3()}) {
    for (double dp : {-1.0, 0.0, 1.0}) {
      const auto plan = plan_shots(state_sequence(*m, 0, mid_power(*m) + dp), m->setup);
      for (const auto& r : plan.readouts) EXPECT_LT(r.disc.error_probability(), 1e-3);
    }
  }
}

TEST(RunShot, Deterministic) {
  const auto& m = fig2();
  const auto plan = plan_shots(state_sequence(m, 1, mid_power(m)), m.setup);
  const auto a = run_shot(plan, 42);
  const auto b = run_shot(plan, 42);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].outcome, b[0].outcome);
  EXPECT_EQ(a[0].jump_trace.jumps.size(), b[0].jump_trace.jumps.size());
  EXPECT_EQ(0, std::memcmp(a[0].field.alpha.data(), b[0].field.alpha.data(), a[0].field.alpha.size() * sizeof(Complex)));
  EXPECT_EQ(a[0].homodyne.i, b[0].homodyne.i);
}

TEST(RunShot, LightweightPathAgreesWithRecords) {
  const auto& m = fig2();
  ReadoutSetup s = m.setup;
  s.noiseless_amplifier = true;
  const auto plan = plan_shots(state_sequence(m, 1, mid_power(m)), s);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    EXPECT_EQ(shot_outcomes(plan, seed)[0], run_shot(plan, seed)[0].outcome) << seed;
  }
}

TEST(RunShot, FieldBeforeFirstJumpIsUnchanged) {
  const auto& m = fig2();
  const auto seq = state_sequence(m, 1, mid_power(m));
  const auto with = plan_shots(seq, m.setup);
  ReadoutSetup frozen = m.setup;
  frozen.qubit.relaxation = false;
  const auto without = plan_shots(seq, frozen);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200 && checked < 10; ++seed) {
    const auto a = run_shot(with, seed)[0];
    if (a.jump_trace.initial_level != 1 || a.jump_trace.jumps.empty()) continue;
    const double t_jump = a.jump_trace.jumps[0].t;
    if (t_jump < a.field.times.front() || t_jump > a.field.times.back()) continue;
    const auto b = run_shot(without, seed)[0];
    bool diverged = false;
    for (std::size_t k = 0; k < a.field.alpha.size(); ++k) {
      const bool before = a.field.times[k] <= t_jump;
      if (before) EXPECT_EQ(a.field.alpha[k], b.field.alpha[k]) << seed << " " << k;
      else diverged |= a.field.alpha[k] != b.field.alpha[k];
    }
    EXPECT_TRUE(diverged);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(RunShot, GroundStateMatchesEscapeProbability) {
  const auto& m = fig2();
  ReadoutSetup s = ideal(m.setup);
  const double f0 = s.pulls.frequency(0, 0.0);
  s.pulls = CavityPullTable::constant(s.jba.fc, {f0, s.pulls.frequency(1, 0.0), s.pulls.frequency(2, 0.0)});
  for (int level : {0, 1}) {
    const double power = level == 0 ? jump_power(m, 0) - 0.3 : jump_power(m, 1) - 0.3;
    const auto plan = plan_shots(state_sequence(m, level, power), s);
    const auto chain = outcome_statistics(plan, 2000, 13)[0];
    const std::vector<double> det(plan.epsilon.size(), s.pulls.frequency(level, 0.0) - s.f_drive);
    IntegrationOptions opt;
    opt.detection_threshold = plan.detection_threshold;
    const auto direct = escape_probability(s.jba, plan.epsilon, det, s.dt, 2000, 13, opt);
    EXPECT_GT(chain.p, 0.05);
    EXPECT_LT(chain.p, 0.95);
    EXPECT_LE(std::abs(chain.p - direct.p), 2.0 * std::hypot(chain.err, direct.err)) << level;
  }
}

TEST(RunShot, SlowerRelaxationRaisesExcitedStateSwitching) {
  const auto& m = fig2();
  const auto seq = state_sequence(m, 1, mid_power(m));
  double previous = -1.0;
  double previous_err = 0.0;
  for (double t1 : {0.15, 0.45, 2.0}) {
    ReadoutSetup s = m.setup;
    s.qubit.t1_10 = t1;
    const auto e = outcome_statistics(plan_shots(seq, s), 5000, 17)[0];
    EXPECT_GE(e.p + 2.0 * std::hypot(e.err, previous_err), previous) << t1;
    previous = e.p;
    previous_err = e.err;
  }
}

TEST(RunShot, SecondReadoutMatchesSingleReadout) {
  const auto& m = fig3();
  ReadoutSetup s = m.setup;
  s.qubit.relaxation = false;
  const double j0 = jump_power(m, 0);
  for (double dp : {-1.0, -0.5, 0.0}) {
    const double power = j0 + dp;
    const auto two = plan_shots(backaction_sequence(m, 0.0, true, power), s);
    ASSERT_EQ(two.readouts.size(), 2u);
    EXPECT_LT(residual_photons(two)[0], 0.5);
    const auto second = outcome_statistics(two, 3000, 19)[1];
    const auto single = outcome_statistics(plan_shots(backaction_sequence(m, 0.0, false, power), s), 3000, 23)[0];
    EXPECT_LE(std::abs(second.p - single.p), 2.0 * std::hypot(second.err, single.err)) << power;
  }
}

TEST(LevelTimeline, FollowsTrace) {
  QubitJumpTrace t;
  t.initial_level = 2;
  t.jumps = {{10.2, 2, 1}, {30.0, 1, 0}};
  const auto levels = level_timeline(t, 0, 80, 0.5);
  for (std::size_t k = 0; k < levels.size(); ++k) EXPECT_EQ(levels[k], t.level_at((k + 0.5) * 0.5)) << k;
  EXPECT_EQ(levels[0], 2);
  EXPECT_EQ(levels[79], 0);
}
