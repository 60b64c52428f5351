// jbasim command-line driver.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "jbasim/config.hpp"
#include "jbasim/output.hpp"

using namespace jbasim;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> shots;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<double> power_start;
  std::optional<double> power_stop;
  std::optional<std::size_t> power_points;
  std::vector<double> deltas;
  std::vector<int> states;
  bool composite = false;
  bool calibrate_kerr = false;
  bool measure_shift = false;
  std::optional<std::size_t> trace_dump;
};

SimConfig resolve(const Overrides& o) {
  SimConfig c = o.config_path.empty() ? SimConfig{} : load_config(o.config_path);
  auto& r = c.run;
  if (o.seed) r.seed = *o.seed;
  if (o.shots) r.shots = *o.shots;
  if (o.threads) r.threads = *o.threads;
  if (o.out) r.out_dir = *o.out;
  if (o.power_start) r.power_start_db = *o.power_start;
  if (o.power_stop) r.power_stop_db = *o.power_stop;
  if (o.power_points) r.power_points = *o.power_points;
  if (!o.deltas.empty()) r.deltas_ghz = o.deltas;
  if (o.deltas.size() == 1) c.op.delta = o.deltas.front();
  if (!o.states.empty()) r.states = o.states;
  if (o.composite) r.composite = true;
  if (o.calibrate_kerr) r.calibrate_kerr = true;
  if (o.measure_shift) r.measure_shift = true;
  if (o.trace_dump) r.trace_shots = *o.trace_dump;
  c.validate();
  return c;
}

std::vector<double> power_grid(const SimConfig& c, const Model& m, const std::vector<int>& levels) {
  const auto& r = c.run;
  if (std::isfinite(r.power_start_db) && std::isfinite(r.power_stop_db))
    return linspace(r.power_start_db, r.power_stop_db, r.power_points);
  return auto_power_grid(m, levels, r.power_points);
}

std::vector<double> sweep(const SimConfig& c) {
  return linspace(c.run.sweep_start_ns, c.run.sweep_stop_ns, c.run.sweep_points);
}

Estimate exact(double v) { return {v, 0.0, 0.0}; }

void note_warnings(const OutputDir& out, const std::vector<std::string>& w) {
  for (const auto& s : w) {
    out.log("warning " + s);
    std::cerr << "warning: " << s << "\n";
  }
}

int cmd_spectrum(const SimConfig& c, const OutputDir& out) {
  const auto& tp = c.device.transmon;
  Table t;
  t.columns = {"phi", "f01_ghz", "f12_ghz", "anharmonicity_ghz"};
  for (double phi : linspace(0.0, 0.45, c.run.sweep_points)) {
    const auto s = diagonalize(tp, FluxPoint(phi));
    t.rows.push_back({phi, s.f01, s.f12, s.anharmonicity});
  }
  out.write_csv("spectrum", t);
  const auto flux = flux_for_f01(tp, c.device.fc - c.op.delta);
  const auto s = diagonalize(tp, flux);
  out.write_summary("spectrum", {{"phi", exact(flux.phi())},
                                 {"f01_ghz", exact(s.f01)},
                                 {"f12_ghz", exact(s.f12)},
                                 {"anharmonicity_ghz", exact(s.anharmonicity)}});
  return 0;
}

int cmd_shifts(const SimConfig& c, const OutputDir& out) {
  Table t;
  t.columns = {"delta_ghz", "two_chi_mhz", "shift2_mhz", "two_chi_exact_mhz", "t1_purcell_us", "t1_us", "tphi_flux_us"};
  std::vector<std::string> warnings;
  for (double d : c.run.deltas_ghz) {
    OperatingPoint op = c.op;
    op.delta = d;
    const Model m = build_model(c.device, op, c.chain);
    const auto pert = dressed_shifts(m.spectrum, c.device.coupling());
    warnings.insert(warnings.end(), pert.warnings.begin(), pert.warnings.end());
    t.rows.push_back({d, pert.cavity_pull * 1e3, pert.shift2 * 1e3, m.ladder->shifts().cavity_pull * 1e3,
                      m.coherence.t1_purcell, m.coherence.t1_total, m.coherence.tphi_flux});
  }
  out.write_csv("shifts", t);
  const Model m = build_model(c.device, c.op, c.chain);
  const auto pert = dressed_shifts(m.spectrum, c.device.coupling());
  note_warnings(out, warnings);
  out.write_summary("shifts",
                    {{"two_chi_mhz", exact(pert.cavity_pull * 1e3)},
                     {"shift2_mhz", exact(pert.shift2 * 1e3)},
                     {"two_chi_exact_mhz", exact(m.ladder->shifts().cavity_pull * 1e3)},
                     {"t1_10_us", exact(m.setup.qubit.t1_10)},
                     {"t1_21_us", exact(m.setup.qubit.t1_21)},
                     {"tphi_flux_us", exact(m.coherence.tphi_flux)}},
                    warnings);
  return 0;
}

int cmd_scurve(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  note_warnings(out, m.warnings);
  const auto& r = c.run;
  const auto grid = power_grid(c, m, r.states);
  const auto curves = run_scurves(m, r.states, grid, r.shots, r.seed);
  std::map<std::string, Estimate> fit;
  const SCurve* zero = nullptr;
  const SCurve* one = nullptr;
  const SCurve* two = nullptr;
  for (const auto& sc : curves) {
    Table t;
    t.columns = {"power_db", "p_B", "p_B_err"};
    t.metadata = {{"state", std::to_string(sc.prepared_state)},
                  {"readout_frequency_ghz", format_number(sc.readout_frequency)},
                  {"shots", std::to_string(r.shots)}};
    for (std::size_t i = 0; i < sc.size(); ++i) t.rows.push_back({sc.power_db[i], sc.p[i].p, sc.p[i].err});
    out.write_csv("scurve_state" + std::to_string(sc.prepared_state), t);
    fit["jump_power_db_level" + std::to_string(sc.prepared_state)] = exact(jump_power(m, sc.prepared_state));
    if (sc.prepared_state == 0) zero = &sc;
    if (sc.prepared_state == 1) one = &sc;
    if (sc.prepared_state == 2) two = &sc;
  }
  for (const SCurve* s : {one, two}) {
    if (!zero || !s) continue;
    const auto k = contrast(*zero, *s);
    const std::string tag = std::to_string(s->prepared_state);
    fit["contrast_0_" + tag] = Estimate::symmetric(k.value, k.err);
    fit["contrast_power_db_0_" + tag] = exact(k.power_db);
    if (r.measure_shift) {
      const auto sh = scurve_shift(m, *zero, *s, r.shots, r.seed);
      fit["delta_f" + tag + "_mhz"] = Estimate::symmetric(sh.delta_f * 1e3, sh.err * 1e3);
      if (s == one) {
        const auto tm = effective_measurement_time(m, *zero, *one, sh.delta_f, r.shots, r.seed);
        fit["t_m_ns"] = exact(tm.t_m_ns);
        fit["weight_ground"] = exact(tm.decomposition.weights[0]);
        fit["weight_excited"] = exact(tm.decomposition.weights[1]);
        fit["decomposition_residual"] = exact(tm.decomposition.residual);
      }
    }
  }
  if (fit.count("delta_f1_mhz") && fit.count("delta_f2_mhz")) {
    fit["shift_ratio_2_1"] = ratio(fit["delta_f2_mhz"], fit["delta_f1_mhz"]);
  }
  out.write_summary("scurve", fit, m.warnings);
  return 0;
}

int write_result(const OutputDir& out, const ExperimentResult& res, std::size_t shots) {
  auto t = to_table(res);
  t.metadata.emplace_back("shots", std::to_string(shots));
  out.write_csv(res.kind, t);
  note_warnings(out, res.warnings);
  out.write_summary(res.kind, res.fit, res.warnings);
  return 0;
}

int cmd_rabi(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  return write_result(out, run_rabi(m, sweep(c), c.run.composite, c.run.shots, c.run.seed, c.op.power_db), c.run.shots);
}

int cmd_t1(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  return write_result(out, run_t1(m, sweep(c), c.run.shots, c.run.seed, c.run.composite, c.op.power_db), c.run.shots);
}

int cmd_ramsey(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  auto res = run_ramsey(m, sweep(c), c.run.shots, c.run.seed, c.run.composite, c.op.power_db);
  res.fit["t1_model_us"] = exact(m.setup.qubit.t1_10);
  const auto& t2 = res.fit["t2_us"];
  try {
    const auto tphi = extract_tphi(m.setup.qubit.t1_10, 0.0, t2.value, t2.err_hi);
    res.fit["tphi_us"] = {tphi.value, tphi.value - tphi.min, tphi.max - tphi.value};
  } catch (const Error& e) {
    res.warnings.push_back(e.what());
  }
  return write_result(out, res, c.run.shots);
}

int cmd_backaction(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  auto b = run_backaction(m, sweep(c), c.run.shots, c.run.seed, c.op.power_db);
  for (std::size_t i = 0; i < b.residual_photons.size(); ++i) {
    b.rabi.fit["residual_photons_" + std::to_string(i + 1)] = exact(b.residual_photons[i]);
  }
  return write_result(out, b.rabi, c.run.shots);
}

int cmd_stark(SimConfig c, const OutputDir& out) {
  std::map<std::string, Estimate> fit;
  if (c.run.calibrate_kerr) {
    const auto k = calibrate_kerr(c.device, c.op);
    c.device.kerr = k.kerr;
    out.log("calibrated kerr_mhz " + format_number(k.kerr * 1e3));
    fit["kerr_mhz"] = exact(k.kerr * 1e3);
    fit["kerr_target_photons"] = exact(k.target);
  }
  const Model m = build_model(c.device, c.op, c.chain);
  std::vector<double> grid;
  if (std::isfinite(c.run.power_start_db) && std::isfinite(c.run.power_stop_db)) {
    grid = linspace(c.run.power_start_db, c.run.power_stop_db, c.run.power_points);
  } else {
    const double pj = jump_power(m, 0);
    grid = linspace(pj - 10.0, pj + 5.0, c.run.power_points);
  }
  const auto s = run_stark_calibration(m, grid);
  Table t;
  t.columns = {"power_db", "n_low", "n_high", "n", "shift_mhz", "n_estimate", "n_estimate_lo", "n_estimate_hi", "t1_us"};
  for (const auto& p : s.points) {
    t.rows.push_back({p.power_db, p.n_low, p.n_high, p.n, p.shift_mhz, p.n_estimate.value,
                      p.n_estimate.value - p.n_estimate.err_lo, p.n_estimate.value + p.n_estimate.err_hi, p.t1_us});
  }
  out.write_csv("stark", t);
  fit["jump_power_db"] = exact(s.jump_power_db);
  fit["n_before"] = exact(s.n_before);
  fit["n_after"] = exact(s.n_after);
  out.write_summary("stark", fit, m.warnings);
  return 0;
}

int cmd_tradeoff(const SimConfig& c, const OutputDir& out) {
  TradeoffOptions opt;
  opt.composite = c.run.composite;
  opt.power_points = c.run.power_points;
  opt.measure_shift = c.run.measure_shift;
  const auto r = contrast_vs_detuning(c.device, c.op, c.chain, c.run.deltas_ghz, c.run.shots, c.run.seed, opt);
  Table t;
  t.columns = {"delta_ghz", "contrast", "contrast_err", "power_db", "t1_us", "tphi_us", "two_chi_mhz",
               "delta_f1_mhz", "delta_f1_mhz_err"};
  for (const auto& p : r.points) {
    t.rows.push_back({p.delta, p.contrast.value, p.contrast.err, p.contrast.power_db, p.t1_us, p.tphi_us,
                      p.two_chi_mhz, p.delta_f1_mhz.value, p.delta_f1_mhz.err_hi});
  }
  t.metadata.emplace_back("composite", c.run.composite ? "true" : "false");
  out.write_csv("tradeoff", t);
  out.write_summary("tradeoff", {{"best_delta_ghz", exact(r.best_delta)},
                                 {"best_contrast", exact(r.best_contrast)},
                                 {"window_width_ghz", exact(r.window_width)},
                                 {"window_level", exact(r.window_level)}});
  return 0;
}

int cmd_trace(const SimConfig& c, const OutputDir& out) {
  const Model m = build_model(c.device, c.op, c.chain);
  const int state = c.run.states.front();
  const double power = operating_power(m, c.run.composite, std::max<std::size_t>(c.run.shots / 4, 200), c.run.seed);
  const auto plan = plan_shots(state_sequence(m, state, power), m.setup);
  const std::size_t shots = std::max<std::size_t>(c.run.trace_shots, 1);
  std::map<std::string, Estimate> fit{{"power_db", exact(power)}};
  for (std::size_t s = 0; s < shots; ++s) {
    const std::uint64_t seed = shot_seed(c.run.seed, s);
    const auto recs = run_shot(plan, seed);
    const auto& rec = recs.front();
    const auto levels = level_timeline(rec.jump_trace, plan.first_step, plan.epsilon.size(), m.setup.dt);
    Table t;
    t.columns = {"t_ns", "I", "Q", "n", "level"};
    t.metadata = {{"state", std::to_string(state)},
                  {"shot", std::to_string(s)},
                  {"outcome", rec.outcome == Outcome::kHigh ? "B" : "Bbar"},
                  {"units", "I and Q input-referred sqrt(photons/ns); n intracavity photons"}};
    const double g = rec.homodyne.gain;
    for (std::size_t k = 0; k < rec.homodyne.times.size(); ++k) {
      t.rows.push_back({rec.homodyne.times[k], rec.homodyne.i[k] / g, rec.homodyne.q[k] / g, rec.field.photons(k + 1),
                        static_cast<double>(levels[k])});
    }
    out.write_csv("trace_shot" + std::to_string(s), t);
    fit["outcome_shot" + std::to_string(s)] = exact(rec.outcome == Outcome::kHigh ? 1.0 : 0.0);
  }
  out.write_summary("trace", fit);
  return 0;
}

int exit_code(ErrorKind k) { return k == ErrorKind::kConfig ? 3 : 4; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator of transmon readout with a Josephson bifurcation amplifier"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "Configuration file (JSON with comments)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--shots", o.shots, "Shots per point");
  app.add_option("--threads", o.threads, "Worker thread cap (0 = all cores)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--power-start", o.power_start, "First sampling power (dB)");
  app.add_option("--power-stop", o.power_stop, "Last sampling power (dB)");
  app.add_option("--power-points", o.power_points, "Number of powers");
  app.add_option("--delta-ghz", o.deltas, "Qubit-resonator detuning(s) in GHz")->delimiter(',');
  app.add_option("--states", o.states, "Prepared states, e.g. 0,1,2")->delimiter(',');
  app.add_flag("--composite", o.composite, "Shelve |1> into |2> before each readout");
  app.add_flag("--measure-shift", o.measure_shift, "Also measure S-curve frequency shifts");
  app.add_flag("--calibrate-kerr", o.calibrate_kerr, "Calibrate the Kerr constant before the stark sweep");
  app.add_option("--trace-dump", o.trace_dump, "Number of shot traces to write");
  app.fallthrough();

  using Runner = std::function<int(const SimConfig&, const OutputDir&)>;
  const std::vector<std::pair<std::string, std::pair<std::string, Runner>>> commands = {
      {"spectrum", {"Transmon spectrum versus flux", cmd_spectrum}},
      {"shifts", {"Dispersive shifts and coherence versus detuning", cmd_shifts}},
      {"scurve", {"S-curves for the prepared states", cmd_scurve}},
      {"rabi", {"Rabi oscillations", cmd_rabi}},
      {"t1", {"Energy relaxation", cmd_t1}},
      {"ramsey", {"Ramsey fringes", cmd_ramsey}},
      {"backaction", {"Two successive readouts", cmd_backaction}},
      {"stark", {"AC-Stark photon-number calibration", cmd_stark}},
      {"tradeoff", {"Contrast versus qubit detuning", cmd_tradeoff}},
      {"trace", {"Single-shot field and homodyne traces", cmd_trace}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  const auto it = std::find_if(commands.begin(), commands.end(), [&](const auto& c) { return c.first == sub->get_name(); });
  std::string line = "jbasim";
  for (int i = 1; i < argc; ++i) line += std::string(" ") + argv[i];
  try {
    const SimConfig cfg = resolve(o);
    thread_cap() = cfg.run.threads;
    const OutputDir out(cfg.run.out_dir, cfg, line);
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = it->second.second(cfg, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.log("elapsed_s " + format_number(secs));
    std::cout << sub->get_name() << ": wrote " << out.dir().string() << " (config " << out.hash() << ")\n";
    return rc;
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.message() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}
