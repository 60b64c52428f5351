// Timed control/readout programs and their rendering onto a sample grid.
#ifndef JBASIM_PULSE_HPP
#define JBASIM_PULSE_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jbasim/core.hpp"
#include "jbasim/transmon.hpp"

namespace jbasim {

enum class SegmentShape { kRise, kPlateau, kFall };

struct Segment {
  SegmentShape shape = SegmentShape::kPlateau;
  double duration = 0.0;   // ns
  double amplitude = 0.0;  // relative to the sampling amplitude; ramps end here
};

/// Readout drive envelope. Amplitudes are relative to the sampling plateau,
/// whose power (dB at the fridge input) is `power_db`.
struct Envelope {
  std::vector<Segment> segments;
  double t_rise = 0.0;
  double t_sample = 0.0;
  double t_hold = 0.0;
  double hold_fraction = 1.0;
  double power_db = 0.0;

  double duration() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.duration;
    return total;
  }

  /// Relative amplitude at time t since the envelope start.
  double value(double t) const {
    if (t < 0.0) return 0.0;
    double start = 0.0;
    double level = 0.0;
    for (const auto& s : segments) {
      if (t < start + s.duration) {
        if (s.shape == SegmentShape::kPlateau) return s.amplitude;
        const double w = (t - start) / s.duration;
        return level + (s.amplitude - level) * w;
      }
      start += s.duration;
      level = s.amplitude;
    }
    return 0.0;
  }

  double shortest_segment() const {
    double m = kInfinity;
    for (const auto& s : segments) m = std::min(m, s.duration);
    return m;
  }

  void validate() const {
    require(!segments.empty(), ErrorKind::kInvalidArgument, "envelope has no segments");
    for (const auto& s : segments) {
      require(s.duration > 0.0, ErrorKind::kInvalidArgument, "envelope segment durations must be > 0");
      require(s.amplitude >= 0.0, ErrorKind::kInvalidArgument, "envelope amplitudes must be >= 0");
    }
  }
};

/// Sample-and-hold readout: linear rise over t_rise, sampling plateau t_sample,
/// drop to hold_fraction for t_hold, then off.
inline Envelope readout_pulse(double t_rise, double t_sample, double t_hold, double power_db,
                              double hold_fraction = 0.8) {
  require(t_rise > 0.0 && t_sample > 0.0 && t_hold > 0.0, ErrorKind::kInvalidArgument,
          "readout durations must be > 0");
  require(hold_fraction > 0.0 && hold_fraction <= 1.0, ErrorKind::kInvalidArgument,
          "hold_fraction must lie in (0, 1]");
  Envelope e;
  e.t_rise = t_rise;
  e.t_sample = t_sample;
  e.t_hold = t_hold;
  e.hold_fraction = hold_fraction;
  e.power_db = power_db;
  e.segments = {{SegmentShape::kRise, t_rise, 1.0},
                {SegmentShape::kPlateau, t_sample, 1.0},
                {SegmentShape::kPlateau, t_hold, hold_fraction}};
  return e;
}

enum class Transition { k01, k12 };
enum class PulseShape { kSquare, kGaussian };

struct ControlPulse {
  Transition transition = Transition::k01;
  double angle = std::numbers::pi;  // rad; Rabi pulses may exceed 2 pi
  double duration = 20.0;           // ns
  PulseShape shape = PulseShape::kSquare;
  double frequency = 0.0;           // GHz
  bool rabi = false;                // variable-length drive, simulated continuously

  /// Rabi frequency Omega/2pi in GHz at time t since the pulse start.
  double rate(double t) const {
    if (t < 0.0 || t >= duration) return 0.0;
    if (shape == PulseShape::kSquare) return angle / (kTwoPi * duration);
    const double sigma = duration / 4.0;
    const double c = duration / 2.0;
    const double area = sigma * std::sqrt(kTwoPi) * std::erf(duration / (2.0 * std::sqrt(2.0) * sigma));
    return angle / kTwoPi / area * std::exp(-(t - c) * (t - c) / (2.0 * sigma * sigma));
  }

  void validate() const {
    require(duration > 0.0, ErrorKind::kInvalidArgument, "control pulse duration must be > 0");
    require(angle > 0.0, ErrorKind::kInvalidArgument, "control pulse angle must be > 0");
    require(rabi || angle <= kTwoPi + 1e-12, ErrorKind::kInvalidArgument, "rotation angle must lie in (0, 2pi]");
  }
};

inline constexpr double kDefaultRabiFrequency = 0.029;  // GHz

inline ControlPulse rotation_pulse(const TransmonSpectrum& spectrum, Transition transition, double angle,
                                   double duration, PulseShape shape = PulseShape::kSquare) {
  require(spectrum.size() >= 3, ErrorKind::kInvalidArgument, "unknown transition: spectrum too short");
  ControlPulse p;
  p.transition = transition;
  p.angle = angle;
  p.duration = duration;
  p.shape = shape;
  p.frequency = transition == Transition::k01 ? spectrum.f01 : spectrum.f12;
  p.validate();
  return p;
}

inline ControlPulse pi_pulse(const TransmonSpectrum& spectrum, Transition transition, double duration = 20.0,
                             PulseShape shape = PulseShape::kSquare) {
  return rotation_pulse(spectrum, transition, std::numbers::pi, duration, shape);
}

/// Square 0-1 drive of length `duration` at a fixed Rabi frequency. A zero
/// length yields no pulse.
inline std::optional<ControlPulse> rabi_pulse(double duration, double rabi_frequency = kDefaultRabiFrequency,
                                              double frequency = 0.0) {
  require(duration >= 0.0, ErrorKind::kInvalidArgument, "Rabi pulse duration must be >= 0");
  if (duration == 0.0) return std::nullopt;
  ControlPulse p;
  p.transition = Transition::k01;
  p.angle = kTwoPi * rabi_frequency * duration;
  p.duration = duration;
  p.shape = PulseShape::kSquare;
  p.frequency = frequency;
  p.rabi = true;
  return p;
}

enum class Channel { kQubit, kReadout };

struct Event {
  double t_start = 0.0;
  Channel channel = Channel::kQubit;
  std::variant<ControlPulse, Envelope> payload;

  double duration() const {
    return std::visit([](const auto& p) { return p.duration(); }, payload_view());
  }
  double t_end() const { return t_start + duration(); }

 private:
  struct ControlView {
    const ControlPulse* p;
    double duration() const { return p->duration; }
  };
  struct EnvelopeView {
    const Envelope* e;
    double duration() const { return e->duration(); }
  };
  std::variant<ControlView, EnvelopeView> payload_view() const {
    if (const auto* c = std::get_if<ControlPulse>(&payload)) return ControlView{c};
    return EnvelopeView{&std::get<Envelope>(payload)};
  }
};

class Sequence {
 public:
  /// Inserts keeping events sorted by start time (stable for equal starts).
  Sequence& add(double t_start, ControlPulse pulse) { return insert({t_start, Channel::kQubit, std::move(pulse)}); }
  Sequence& add(double t_start, Envelope envelope) {
    return insert({t_start, Channel::kReadout, std::move(envelope)});
  }

  /// Appends after the last event on any channel, separated by `gap` ns.
  Sequence& then(ControlPulse pulse, double gap = 0.0) { return add(end_time() + gap, std::move(pulse)); }
  Sequence& then(Envelope envelope, double gap = 0.0) { return add(end_time() + gap, std::move(envelope)); }

  const std::vector<Event>& events() const { return events_; }
  double end_time() const {
    double t = 0.0;
    for (const auto& e : events_) t = std::max(t, e.t_end());
    return t;
  }
  double total_duration() const { return std::max(total_duration_, end_time()); }
  void set_total_duration(double t) { total_duration_ = t; }

  /// Rejects overlapping events on one channel, naming both.
  void validate() const {
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& a = events_[i];
      require(a.t_start >= 0.0, ErrorKind::kInvalidArgument, "event start times must be >= 0");
      if (const auto* c = std::get_if<ControlPulse>(&a.payload)) c->validate();
      else std::get<Envelope>(a.payload).validate();
      for (std::size_t j = i + 1; j < events_.size(); ++j) {
        const auto& b = events_[j];
        if (a.channel != b.channel) continue;
        if (b.t_start < a.t_end() && a.t_start < b.t_end()) {
          throw Error(ErrorKind::kOverlap, "event " + std::to_string(i) + " [" + std::to_string(a.t_start) + ", " +
                                               std::to_string(a.t_end()) + ") overlaps event " + std::to_string(j) +
                                               " [" + std::to_string(b.t_start) + ", " + std::to_string(b.t_end()) +
                                               ") on the same channel");
        }
      }
    }
    require(total_duration() >= end_time(), ErrorKind::kInvalidArgument, "total duration before last event end");
  }

 private:
  Sequence& insert(Event e) {
    auto pos = std::upper_bound(events_.begin(), events_.end(), e.t_start,
                                [](double t, const Event& ev) { return t < ev.t_start; });
    events_.insert(pos, std::move(e));
    return *this;
  }

  std::vector<Event> events_;
  double total_duration_ = 0.0;
};

struct CompiledControl {
  ControlPulse pulse;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t first = 0;  // first sample index
  std::size_t last = 0;   // one past the last sample
};

struct CompiledReadout {
  Envelope envelope;
  double t_start = 0.0;
  std::size_t first = 0;
  std::size_t sample_start = 0;  // first sample of the sampling plateau
  std::size_t hold_start = 0;    // first sample of the hold plateau
  std::size_t hold_end = 0;      // one past the last hold sample
  std::size_t last = 0;
};

/// Sampled program. Sample k covers [k dt, (k+1) dt) and holds the analytic
/// value at the interval midpoint.
struct CompiledSequence {
  double dt = 0.5;
  std::vector<double> readout;  // drive amplitude, sqrt of power ratio re 0 dB
  std::vector<double> qubit;    // Rabi frequency Omega/2pi, GHz
  std::vector<CompiledControl> controls;
  std::vector<CompiledReadout> readouts;

  std::size_t size() const { return readout.size(); }
  double time(std::size_t k) const { return (static_cast<double>(k) + 0.5) * dt; }
};

inline std::size_t sample_index(double t, double dt) {
  return static_cast<std::size_t>(std::llround(t / dt));
}

inline CompiledSequence compile(const Sequence& seq, double dt = 0.5) {
  require(dt > 0.0, ErrorKind::kInvalidArgument, "dt must be > 0");
  seq.validate();
  CompiledSequence out;
  out.dt = dt;
  if (seq.events().empty()) return out;

  double shortest = kInfinity;
  for (const auto& e : seq.events()) {
    if (const auto* c = std::get_if<ControlPulse>(&e.payload)) shortest = std::min(shortest, c->duration);
    else shortest = std::min(shortest, std::get<Envelope>(e.payload).shortest_segment());
  }
  require(dt <= shortest / 4.0, ErrorKind::kResolution,
          "dt " + std::to_string(dt) + " ns larger than a quarter of the shortest segment (" +
              std::to_string(shortest) + " ns)");

  const std::size_t n = sample_index(seq.total_duration(), dt);
  out.readout.assign(n, 0.0);
  out.qubit.assign(n, 0.0);
  for (const auto& e : seq.events()) {
    const std::size_t first = sample_index(e.t_start, dt);
    const std::size_t last = std::min(n, sample_index(e.t_end(), dt));
    if (const auto* c = std::get_if<ControlPulse>(&e.payload)) {
      for (std::size_t k = first; k < last; ++k) out.qubit[k] = c->rate(out.time(k) - e.t_start);
      out.controls.push_back({*c, e.t_start, e.t_end(), first, last});
    } else {
      const auto& env = std::get<Envelope>(e.payload);
      const double scale = db_to_amplitude_ratio(env.power_db);
      for (std::size_t k = first; k < last; ++k) out.readout[k] = scale * env.value(out.time(k) - e.t_start);
      CompiledReadout r;
      r.envelope = env;
      r.t_start = e.t_start;
      r.first = first;
      r.sample_start = sample_index(e.t_start + env.t_rise, dt);
      r.hold_start = sample_index(e.t_start + env.t_rise + env.t_sample, dt);
      r.hold_end = std::min(last, sample_index(e.t_start + env.t_rise + env.t_sample + env.t_hold, dt));
      r.last = last;
      out.readouts.push_back(std::move(r));
    }
  }
  return out;
}

// Structured-text (JSON) form of sequences.

inline std::string to_string(SegmentShape s) {
  switch (s) {
    case SegmentShape::kRise: return "rise";
    case SegmentShape::kPlateau: return "plateau";
    case SegmentShape::kFall: return "fall";
  }
  return "plateau";
}

inline SegmentShape segment_shape_from(const std::string& s) {
  if (s == "rise") return SegmentShape::kRise;
  if (s == "plateau") return SegmentShape::kPlateau;
  if (s == "fall") return SegmentShape::kFall;
  throw Error(ErrorKind::kConfig, "unknown segment shape '" + s + "'");
}

inline void to_json(nlohmann::json& j, const Envelope& e) {
  j = nlohmann::json{{"t_rise", e.t_rise}, {"t_sample", e.t_sample}, {"t_hold", e.t_hold},
                     {"hold_fraction", e.hold_fraction}, {"power_db", e.power_db}};
  auto segs = nlohmann::json::array();
  for (const auto& s : e.segments) {
    segs.push_back({{"shape", to_string(s.shape)}, {"duration", s.duration}, {"amplitude", s.amplitude}});
  }
  j["segments"] = segs;
}

inline void from_json(const nlohmann::json& j, Envelope& e) {
  e = Envelope{};
  e.t_rise = j.value("t_rise", 0.0);
  e.t_sample = j.value("t_sample", 0.0);
  e.t_hold = j.value("t_hold", 0.0);
  e.hold_fraction = j.value("hold_fraction", 1.0);
  e.power_db = j.value("power_db", 0.0);
  if (j.contains("segments")) {
    for (const auto& s : j.at("segments")) {
      e.segments.push_back({segment_shape_from(s.at("shape").get<std::string>()), s.at("duration").get<double>(),
                            s.at("amplitude").get<double>()});
    }
  } else {
    e = readout_pulse(e.t_rise, e.t_sample, e.t_hold, e.power_db, e.hold_fraction);
  }
}

inline void to_json(nlohmann::json& j, const ControlPulse& p) {
  j = nlohmann::json{{"transition", p.transition == Transition::k01 ? "01" : "12"},
                     {"angle", p.angle},
                     {"duration", p.duration},
                     {"shape", p.shape == PulseShape::kSquare ? "square" : "gaussian"},
                     {"frequency", p.frequency},
                     {"rabi", p.rabi}};
}

inline void from_json(const nlohmann::json& j, ControlPulse& p) {
  p = ControlPulse{};
  const auto tr = j.at("transition").get<std::string>();
  require(tr == "01" || tr == "12", ErrorKind::kConfig, "unknown transition '" + tr + "'");
  p.transition = tr == "01" ? Transition::k01 : Transition::k12;
  p.angle = j.at("angle").get<double>();
  p.duration = j.at("duration").get<double>();
  const auto shape = j.value("shape", std::string("square"));
  require(shape == "square" || shape == "gaussian", ErrorKind::kConfig, "unknown pulse shape '" + shape + "'");
  p.shape = shape == "square" ? PulseShape::kSquare : PulseShape::kGaussian;
  p.frequency = j.value("frequency", 0.0);
  p.rabi = j.value("rabi", false);
}

inline void to_json(nlohmann::json& j, const Sequence& seq) {
  auto events = nlohmann::json::array();
  for (const auto& e : seq.events()) {
    nlohmann::json ev{{"t_start", e.t_start}};
    if (const auto* c = std::get_if<ControlPulse>(&e.payload)) {
      ev["channel"] = "qubit";
      ev["pulse"] = *c;
    } else {
      ev["channel"] = "readout";
      ev["envelope"] = std::get<Envelope>(e.payload);
    }
    events.push_back(ev);
  }
  j = nlohmann::json{{"events", events}, {"total_duration", seq.total_duration()}};
}

inline void from_json(const nlohmann::json& j, Sequence& seq) {
  seq = Sequence{};
  for (const auto& ev : j.at("events")) {
    const auto channel = ev.at("channel").get<std::string>();
    const double t = ev.at("t_start").get<double>();
    if (channel == "qubit") seq.add(t, ev.at("pulse").get<ControlPulse>());
    else if (channel == "readout") seq.add(t, ev.at("envelope").get<Envelope>());
    else throw Error(ErrorKind::kConfig, "unknown channel '" + channel + "'");
  }
  if (j.contains("total_duration")) seq.set_total_duration(j.at("total_duration").get<double>());
}

}  // namespace jbasim

#endif  // JBASIM_PULSE_HPP
