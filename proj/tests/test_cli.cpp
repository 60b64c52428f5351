#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jbasim/config.hpp"
#include "jbasim/output.hpp"

using namespace jbasim;
namespace fs = std::filesystem;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("jbasim_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

struct Run {
  int code = -1;
  std::string err;
};

Run jbasim_run(const std::string& args) {
  const auto err = scratch("stderr.txt");
  const std::string cmd = env("JBASIM_EXE") + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

fs::path config(const std::string& name) { return fs::path(env("JBASIM_CONFIGS")) / name; }

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const SimConfig d;
  for (const char* text : {"", "   \n", "// nothing here\n", "{}"}) {
    EXPECT_EQ(to_json(parse_config(text)), to_json(d)) << text;
  }
}

TEST(Config, RoundTripThroughJson) {
  const auto cfg = load_config(config("paper_fig3.cfg"));
  const auto again = parse_config(to_json(cfg).dump(2));
  EXPECT_EQ(to_json(again), to_json(cfg));
  EXPECT_EQ(config_hash(again), config_hash(cfg));
}

TEST(Config, Fig2Values) {
  const auto c = load_config(config("paper_fig2.cfg"));
  EXPECT_DOUBLE_EQ(c.op.delta, 0.38);
  EXPECT_DOUBLE_EQ(c.op.readout_detuning, 0.017);
  EXPECT_DOUBLE_EQ(c.op.timing.t_rise, 15.0);
  EXPECT_DOUBLE_EQ(c.op.timing.t_sample, 250.0);
  EXPECT_DOUBLE_EQ(c.op.timing.t_hold, 700.0);
  EXPECT_TRUE(std::isnan(c.op.power_db));
  EXPECT_DOUBLE_EQ(c.device.g, 0.044);
  EXPECT_EQ(c.run.states, (std::vector<int>{0, 1, 2}));
}

TEST(Config, Fig3Values) {
  const auto c = load_config(config("paper_fig3.cfg"));
  EXPECT_DOUBLE_EQ(c.op.delta, 0.25);
  EXPECT_DOUBLE_EQ(c.op.readout_detuning, 0.025);
  EXPECT_DOUBLE_EQ(c.op.timing.t_rise, 10.0);
  EXPECT_DOUBLE_EQ(c.op.timing.t_sample, 40.0);
  EXPECT_DOUBLE_EQ(c.op.timing.t_hold, 50.0);
  EXPECT_DOUBLE_EQ(c.op.gap, 120.0);
  EXPECT_DOUBLE_EQ(c.op.power_db, -30.5);
}

TEST(Config, UnknownKeyNamesLine) {
  try {
    parse_config("{\n  \"device\": {\n    \"ej_max_ghz\": 21,\n    \"ej_mx\": 3\n  }\n}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(e.message().find("device.ej_mx"), std::string::npos);
    EXPECT_NE(e.message().find("line 4"), std::string::npos);
  }
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("{\"solver\": {}}"), Error);
  EXPECT_THROW(parse_config("{\"device\": 3}"), Error);
  EXPECT_THROW(parse_config("{\"device\": {\"q0\": \"high\"}}"), Error);
  EXPECT_THROW(parse_config("{\"device\": {\"q0\": null}}"), Error);
  EXPECT_THROW(parse_config("{\"device\": {\"kerr_mhz\": 0.5}}"), Error);
  EXPECT_THROW(parse_config("{\"run\": {\"shots\": -4}}"), Error);
  EXPECT_THROW(parse_config("{\"run\": {\"states\": [0, 3]}}"), Error);
  EXPECT_THROW(parse_config("{\"chain\": {\"pulse_error\": 1.5}}"), Error);
  EXPECT_THROW(parse_config("{\"device\": {\n\"q0\": 600,,\n}}"), Error);
  EXPECT_THROW(load_config("/nonexistent/file.cfg"), Error);
}

TEST(Config, HashIgnoresOutputLocationOnly) {
  SimConfig a;
  SimConfig b = a;
  b.run.out_dir = "elsewhere";
  b.run.threads = 3;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.run.seed = 99;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Output, NumberFormatting) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(kInfinity), "inf");
  EXPECT_EQ(format_number(-kInfinity), "-inf");
  EXPECT_EQ(format_number(kNaN), "nan");
}

TEST(Output, CsvAndSummaryLayout) {
  const auto dir = scratch("layout");
  SimConfig cfg;
  OutputDir out(dir, cfg, "jbasim test");
  Table t;
  t.columns = {"x", "y"};
  t.rows = {{1.0, 2.0}, {3.0, kInfinity}};
  t.metadata = {{"kind", "demo"}};
  out.write_csv("demo", t);
  out.write_summary("demo", {{"a", Estimate{1.0, 0.1, 0.2}}}, {"careful"});
  std::istringstream csv(slurp(dir / "demo.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "# config_hash: " + config_hash(cfg));
  std::getline(csv, line);
  EXPECT_EQ(line.front(), '#');
  std::getline(csv, line);
  EXPECT_EQ(line, "x,y");
  std::getline(csv, line);
  EXPECT_EQ(line, "1,2");
  std::getline(csv, line);
  EXPECT_EQ(line, "3,inf");
  const auto j = nlohmann::json::parse(slurp(dir / "demo.json"));
  EXPECT_DOUBLE_EQ(j["a"]["value"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["a"]["err_lo"].get<double>(), 0.1);
  EXPECT_DOUBLE_EQ(j["a"]["err_hi"].get<double>(), 0.2);
  EXPECT_EQ(j["_meta"]["config_hash"], config_hash(cfg));
  EXPECT_EQ(j["_meta"]["warnings"][0], "careful");
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "config.json")), to_json(cfg));
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(jbasim_run("frobnicate").code, 2);
  EXPECT_EQ(jbasim_run("").code, 2);
  EXPECT_EQ(jbasim_run("spectrum --shots many").code, 2);
}

TEST(Cli, ConfigErrorsExitThree) {
  const auto bad = write_file("bad.cfg", "{\n \"device\": {\"typo_key\": 1}\n}\n");
  const auto r = jbasim_run("spectrum --config " + bad.string() + " --out " + scratch("o1").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("error[config]"), std::string::npos);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(jbasim_run("spectrum --config /nonexistent.cfg").code, 3);
  EXPECT_EQ(jbasim_run("scurve --states 0,5 --out " + scratch("o2").string()).code, 3);
}

TEST(Cli, LibraryErrorsExitFour) {
  const auto r = jbasim_run("scurve --delta-ghz 0.01 --out " + scratch("o3").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.err.rfind("error[", 0), 0u);
}

TEST(Cli, EmptyConfigEchoesDefaults) {
  const auto empty = write_file("empty.cfg", "");
  const auto dir = scratch("defaults");
  ASSERT_EQ(jbasim_run("spectrum --config " + empty.string() + " --out " + dir.string()).code, 0);
  SimConfig expected;
  expected.run.out_dir = dir.string();
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "config.json")), to_json(expected));
  EXPECT_TRUE(fs::exists(dir / "spectrum.csv"));
  EXPECT_TRUE(fs::exists(dir / "spectrum.json"));
  EXPECT_TRUE(fs::exists(dir / "run.log"));
}

TEST(Cli, EchoedConfigReproducesOutputs) {
  const auto a = scratch("echo_a");
  const auto b = scratch("echo_b");
  ASSERT_EQ(jbasim_run("scurve --shots 100 --power-points 5 --seed 4 --out " + a.string()).code, 0);
  ASSERT_EQ(jbasim_run("scurve --config " + (a / "config.json").string() + " --out " + b.string()).code, 0);
  EXPECT_EQ(slurp(a / "scurve_state0.csv"), slurp(b / "scurve_state0.csv"));
  EXPECT_EQ(slurp(a / "scurve_state1.csv"), slurp(b / "scurve_state1.csv"));
}

TEST(Cli, ByteIdenticalReruns) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const std::string args = "scurve --shots 150 --power-points 6 --seed 9 --states 0,1";
  ASSERT_EQ(jbasim_run(args + " --threads 1 --out " + a.string()).code, 0);
  ASSERT_EQ(jbasim_run(args + " --out " + b.string()).code, 0);
  for (const char* f : {"scurve_state0.csv", "scurve_state1.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  auto a_summary = nlohmann::json::parse(slurp(a / "scurve.json"));
  auto b_summary = nlohmann::json::parse(slurp(b / "scurve.json"));
  a_summary.erase("_meta");
  b_summary.erase("_meta");
  EXPECT_EQ(a_summary, b_summary);
}

TEST(Cli, Fig2ScurveWritesThreeStates) {
  const auto dir = scratch("fig2");
  ASSERT_EQ(jbasim_run("scurve --config " + config("paper_fig2.cfg").string() +
                       " --shots 200 --power-points 14 --states 0,1,2 --out " + dir.string())
                .code,
            0);
  for (int s : {0, 1, 2}) {
    const auto csv = slurp(dir / ("scurve_state" + std::to_string(s) + ".csv"));
    EXPECT_EQ(csv.rfind("# config_hash: ", 0), 0u);
    EXPECT_NE(csv.find("power_db"), std::string::npos);
  }
  const auto j = nlohmann::json::parse(slurp(dir / "scurve.json"));
  EXPECT_TRUE(j.contains("contrast_0_1"));
  EXPECT_TRUE(j.contains("contrast_0_2"));
  for (const auto& key : {"value", "err_lo", "err_hi"}) EXPECT_TRUE(j["contrast_0_2"].contains(key));
}

TEST(Cli, RabiComposite) {
  const auto dir = scratch("rabi");
  ASSERT_EQ(jbasim_run("rabi --composite --shots 100 --out " + dir.string()).code, 0);
  const auto j = nlohmann::json::parse(slurp(dir / "rabi.json"));
  EXPECT_TRUE(j.contains("visibility"));
  EXPECT_TRUE(fs::exists(dir / "rabi.csv"));
}

TEST(Cli, TraceDump) {
  const auto dir = scratch("trace");
  ASSERT_EQ(jbasim_run("trace --trace-dump 2 --out " + dir.string()).code, 0);
  for (int s : {0, 1}) {
    std::istringstream csv(slurp(dir / ("trace_shot" + std::to_string(s) + ".csv")));
    std::string line;
    while (std::getline(csv, line) && line.front() == '#') {
    }
    EXPECT_EQ(line, "t_ns,I,Q,n,level");
  }
}

TEST(Cli, HelpIsSuccess) { EXPECT_EQ(jbasim_run("--help").code, 0); }
