// Result persistence: CSV tables, JSON summaries, config echo and run log.
#ifndef JBASIM_OUTPUT_HPP
#define JBASIM_OUTPUT_HPP

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jbasim/config.hpp"

namespace jbasim {

/// Shortest round-trip text for a double; "nan" and "inf" spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Column table from an experiment result: x then (y, y_err) per series.
inline Table to_table(const ExperimentResult& r) {
  Table t;
  t.columns.push_back(r.x_label);
  for (const auto& s : r.series) {
    t.columns.push_back(s.name);
    t.columns.push_back(s.name + "_err");
  }
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    std::vector<double> row{r.x[i]};
    for (const auto& s : r.series) {
      row.push_back(s.y[i]);
      row.push_back(s.err[i]);
    }
    t.rows.push_back(std::move(row));
  }
  t.metadata.emplace_back("kind", r.kind);
  return t;
}

inline nlohmann::json estimate_json(const Estimate& e) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_number(v)); };
  return {{"value", num(e.value)}, {"err_lo", num(e.err_lo)}, {"err_hi", num(e.err_hi)}};
}

/// Writes every artifact of a run into one directory, each stamped with the
/// resolved-config hash.
class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, const SimConfig& cfg, std::string command)
      : dir_(std::move(dir)), hash_(config_hash(cfg)), command_(std::move(command)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    require(!ec, ErrorKind::kConfig, "cannot create output directory " + dir_.string());
    std::ofstream(dir_ / "run.log", std::ios::trunc);
    log("command " + command_);
    log("config_hash " + hash_);
    write_text("config.json", to_json(cfg).dump(2) + "\n");
  }

  const std::string& hash() const { return hash_; }
  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path write_csv(const std::string& name, const Table& t) const {
    std::string out = "# config_hash: " + hash_ + "\n";
    for (const auto& [k, v] : t.metadata) out += "# " + k + ": " + v + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
      out += "\n";
    }
    return write_text(name + ".csv", out);
  }

  std::filesystem::path write_summary(const std::string& name, const std::map<std::string, Estimate>& fit,
                                      const std::vector<std::string>& warnings = {}) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, e] : fit) j[k] = estimate_json(e);
    j["_meta"] = {{"command", command_}, {"config_hash", hash_}, {"warnings", warnings}};
    return write_text(name + ".json", j.dump(2) + "\n");
  }

  void log(const std::string& line) const {
    std::ofstream f(dir_ / "run.log", std::ios::app);
    f << line << "\n";
  }

 private:
  std::filesystem::path write_text(const std::string& file, const std::string& text) const {
    const auto path = dir_ / file;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kConfig, "cannot write " + path.string());
    f << text;
    log("wrote " + file);
    return path;
  }

  std::filesystem::path dir_;
  std::string hash_;
  std::string command_;
};

}  // namespace jbasim

#endif  // JBASIM_OUTPUT_HPP
