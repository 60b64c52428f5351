// Structured text configuration: JSON with comments, strict keys.
#ifndef JBASIM_CONFIG_HPP
#define JBASIM_CONFIG_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "jbasim/experiments.hpp"

namespace jbasim {

struct RunConfig {
  std::size_t shots = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = all cores
  std::string out_dir = "out";
  double power_start_db = kNaN;  // NaN = automatic grid around the jumps
  double power_stop_db = kNaN;
  std::size_t power_points = 25;
  std::vector<int> states = {0, 1};
  bool composite = false;
  double sweep_start_ns = 0.0;  // Rabi durations, T1 or Ramsey delays
  double sweep_stop_ns = 200.0;
  std::size_t sweep_points = 51;
  std::vector<double> deltas_ghz = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  bool measure_shift = false;
  bool calibrate_kerr = false;
  std::size_t trace_shots = 0;
};

struct SimConfig {
  DeviceParams device;
  ChainParams chain;
  OperatingPoint op;
  RunConfig run;

  void validate() const {
    device.transmon.validate();
    device.coupling().validate();
    chain.validate();
    const auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
    if (device.q0 <= 0.0) fail("device.q0 must be > 0");
    if (device.kerr >= 0.0) fail("device.kerr must be < 0");
    if (device.noise_temp < 0.0) fail("device.noise_temp must be >= 0");
    if (device.t1_other <= 0.0 || device.tphi_residual <= 0.0) fail("device coherence times must be > 0");
    if (op.delta <= 0.0) fail("operating_point.delta_ghz must be > 0");
    if (op.readout_detuning <= 0.0) fail("operating_point.readout_detuning_mhz must be > 0");
    if (op.timing.t_rise <= 0.0 || op.timing.t_sample <= 0.0 || op.timing.t_hold < 0.0)
      fail("operating_point timings must be positive");
    if (op.timing.hold_fraction <= 0.0 || op.timing.hold_fraction > 1.0)
      fail("operating_point.hold_fraction must lie in (0, 1]");
    if (op.gap < 0.0 || op.t_pi <= 0.0 || op.dt <= 0.0) fail("operating_point gap, t_pi and dt must be positive");
    if (run.shots == 0) fail("run.shots must be > 0");
    if (run.power_points < 2) fail("run.power_points must be >= 2");
    if (run.sweep_points < 2 || run.sweep_stop_ns <= run.sweep_start_ns) fail("run sweep must be increasing");
    if (run.states.empty()) fail("run.states must not be empty");
    for (int s : run.states) {
      if (s < 0 || s > 2) fail("run.states entries must be 0, 1 or 2");
    }
    if (run.deltas_ghz.empty()) fail("run.deltas_ghz must not be empty");
  }
};

namespace detail {

using nlohmann::json;

// Scaled binding between a JSON key and a field; scale converts file units to
// internal units.
struct Binding {
  std::string key;
  std::function<void(const json&)> read;
  std::function<json()> write;
};

inline Binding bind(std::string key, double& v, double scale = 1.0) {
  return {key, [&v, scale](const json& j) { v = j.get<double>() * scale; }, [&v, scale]() { return json(v / scale); }};
}

// null selects automatic behaviour
inline Binding bind_optional(std::string key, double& v) {
  return {key, [&v](const json& j) { v = j.is_null() ? kNaN : j.get<double>(); },
          [&v]() { return std::isfinite(v) ? json(v) : json(nullptr); }};
}

inline Binding bind(std::string key, bool& v) {
  return {key, [&v](const json& j) { v = j.get<bool>(); }, [&v]() { return json(v); }};
}

template <class T>
  requires std::is_integral_v<T>
inline Binding bind(std::string key, T& v) {
  return {key, [&v, key](const json& j) {
            if (!j.is_number_integer() || (std::is_unsigned_v<T> && j.get<std::int64_t>() < 0))
              throw Error(ErrorKind::kConfig, key + " must be a non-negative integer");
            v = j.get<T>();
          },
          [&v]() { return json(v); }};
}

template <class T>
inline Binding bind_any(std::string key, T& v) {
  return {key, [&v](const json& j) { v = j.get<T>(); }, [&v]() { return json(v); }};
}

inline std::vector<std::pair<std::string, std::vector<Binding>>> bindings(SimConfig& c) {
  auto& d = c.device;
  auto& t = d.transmon;
  auto& ch = c.chain;
  auto& op = c.op;
  auto& r = c.run;
  return {
      {"device",
       {bind("ej_max_ghz", t.ej_max), bind("ec_cp_ghz", t.ec_cp), bind("squid_symmetric", t.squid_symmetric),
        bind("squid_asymmetry", t.squid_asymmetry), bind("charge_cutoff", t.charge_cutoff),
        bind("g_mhz", d.g, 1e-3), bind("fc_ghz", d.fc), bind("photon_cutoff", d.n_photon_cutoff),
        bind("q0", d.q0), bind("ic_ua", d.ic), bind("kerr_mhz", d.kerr, 1e-3), bind("noise_temp_k", d.noise_temp),
        bind("t1_other_us", d.t1_other), bind("tphi_residual_us", d.tphi_residual),
        bind("flux_noise_amp", d.flux_noise_amp), bind("flux_ir_cutoff_hz", d.flux_noise.infrared_cutoff_hz),
        bind("flux_reference_time_us", d.flux_noise.reference_time_us), bind("relaxation", d.relaxation)}},
      {"chain",
       {bind("cryo_gain_db", ch.cryo_gain_db), bind("room_gain_db", ch.room_gain_db),
        bind("noise_temp_amp_k", ch.noise_temp_amp), bind("prep_error_p1", ch.prep_error_p1),
        bind("shelving_leak_p1", ch.shelving_leak_p1), bind("pulse_error", ch.pulse_error),
        bind("filter_cutoff_mhz", ch.filter_cutoff, 1e-3)}},
      {"operating_point",
       {bind("delta_ghz", op.delta), bind("readout_detuning_mhz", op.readout_detuning, 1e-3),
        bind("t_rise_ns", op.timing.t_rise), bind("t_sample_ns", op.timing.t_sample),
        bind("t_hold_ns", op.timing.t_hold), bind("hold_fraction", op.timing.hold_fraction),
        bind_optional("power_db", op.power_db), bind("attenuation_db", op.attenuation_db), bind("gap_ns", op.gap),
        bind("t_pi_ns", op.t_pi), bind("rabi_frequency_mhz", op.rabi_frequency, 1e-3),
        bind("ramsey_detuning_mhz", op.ramsey_detuning, 1e-3), bind("dt_ns", op.dt)}},
      {"run",
       {bind("shots", r.shots), bind("seed", r.seed), bind("threads", r.threads), bind_any("out_dir", r.out_dir),
        bind_optional("power_start_db", r.power_start_db), bind_optional("power_stop_db", r.power_stop_db),
        bind("power_points", r.power_points), bind_any("states", r.states), bind("composite", r.composite),
        bind("sweep_start_ns", r.sweep_start_ns), bind("sweep_stop_ns", r.sweep_stop_ns),
        bind("sweep_points", r.sweep_points), bind_any("deltas_ghz", r.deltas_ghz),
        bind("measure_shift", r.measure_shift), bind("calibrate_kerr", r.calibrate_kerr),
        bind("trace_shots", r.trace_shots)}},
  };
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline std::string locate(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  return pos == std::string::npos ? std::string() : " (line " + std::to_string(line_of(text, pos)) + ")";
}

}  // namespace detail

/// Full resolved configuration as a JSON document.
inline nlohmann::json to_json(const SimConfig& cfg) {
  SimConfig copy = cfg;
  nlohmann::json out = nlohmann::json::object();
  for (auto& [section, keys] : detail::bindings(copy)) {
    auto& s = out[section] = nlohmann::json::object();
    for (auto& b : keys) s[b.key] = b.write();
  }
  return out;
}

/// Parses configuration text. Empty text yields the defaults.
inline SimConfig parse_config(const std::string& text) {
  SimConfig cfg;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    bool blank = true;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first != std::string::npos && line.compare(first, 2, "//") != 0) blank = false;
    }
    if (blank) return cfg;
    throw Error(ErrorKind::kConfig, "parse error at line " + std::to_string(detail::line_of(text, e.byte)) + ": " +
                                        e.what());
  }
  if (doc.is_null()) return cfg;
  if (!doc.is_object()) throw Error(ErrorKind::kConfig, "top level must be an object");
  auto table = detail::bindings(cfg);
  for (auto& [section, value] : doc.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& s) { return s.first == section; });
    if (it == table.end()) throw Error(ErrorKind::kConfig, "unknown section '" + section + "'" + detail::locate(text, section));
    if (!value.is_object()) throw Error(ErrorKind::kConfig, "section '" + section + "' must be an object");
    for (auto& [key, v] : value.items()) {
      auto b = std::find_if(it->second.begin(), it->second.end(), [&](const auto& x) { return x.key == key; });
      if (b == it->second.end())
        throw Error(ErrorKind::kConfig, "unknown key '" + section + "." + key + "'" + detail::locate(text, key));
      try {
        b->read(v);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kConfig,
                    "bad value for '" + section + "." + key + "'" + detail::locate(text, key) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, section + "." + e.message() + detail::locate(text, key));
      }
    }
  }
  cfg.validate();
  return cfg;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// FNV-1a 64-bit hash of the canonical resolved configuration, leaving out
/// the keys that cannot change results (output directory, thread cap).
inline std::string config_hash(const SimConfig& cfg) {
  auto doc = to_json(cfg);
  doc["run"].erase("out_dir");
  doc["run"].erase("threads");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace jbasim

#endif  // JBASIM_CONFIG_HPP
