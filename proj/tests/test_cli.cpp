#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fdblowup/cli.hpp"
#include "fdblowup/errors.hpp"
#include "fdblowup/odekit.hpp"

using namespace fdblowup;
using namespace fdblowup::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "fdblowup_cli_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_simulation() {
  ExperimentConfig c;
  c.command = Command::Simulate;
  c.h = 0.5;
  c.box_radius = 10.0;
  return c;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(FDBLOWUP_TOOL) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c;
  c.command = Command::Butimes;
  c.kernel = MixedSpec{{{1.0, LaplacianSpec{}},
                        {0.25, FractionalSpec{0.3}},
                        {2.0, ZeroOrderSpec{RadialProfile::Indicator, 0.5, 1.5}},
                        {1.0, DiscreteDeltaSpec{{{2}, {-2}}, {1.0, 1.0}, true}}}};
  c.cutoff = 77;
  c.h = 0.1 + 0.2;  // not exactly representable as a short decimal
  c.tau = 1.0 / 3.0;
  c.horizon = 12.5;
  c.datum = {"smooth_bump", 20.0};
  c.h_list = {0.5, 0.25};
  c.reference_h = 0.125;
  c.nodes = {{-1}, {0}, {1}};
  c.s = 0.75;
  c.xi_max = 3.0;
  c.seed = 42;
  const auto j = to_json(c);
  const auto back = config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(back.h == c.h);
  CHECK(*back.tau == *c.tau);

  const auto d = config_from_json(to_json(ExperimentConfig{}));
  CHECK_FALSE(d.tau);
  CHECK(to_json(d) == to_json(ExperimentConfig{}));
}

TEST_CASE("config errors") {
  using nlohmann::json;
  CHECK_THROWS_AS(config_from_json(json{{"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"command", "plot"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"h", -1.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"tau", "fast"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"tau_fraction", 1.5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"kernel", {{"family", "cauchy"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"kernel", {{"family", "fractional"}, {"t", 1}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"datum", {{"kind", "wave"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"h", "small"}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("auto tau is a fraction of the CFL bound") {
  auto c = small_simulation();
  c.tau_fraction = 0.5;
  const auto k = make_kernel(c, c.h);
  CHECK(resolve_tau(c, k) == doctest::Approx(0.5 * cfl_tau_max(k)).epsilon(1e-15));
  c.tau = 0.01;
  CHECK(resolve_tau(c, k) == 0.01);
}

TEST_CASE("simulate writes a blow-up report and trace") {
  auto c = small_simulation();
  c.output_dir = scratch("simulate").string();
  const auto out = run_experiment(c);
  CHECK(out.exit_code == kExitOk);
  CHECK(out.report["run"]["verdict"] == "BlownUp");
  CHECK(out.report["config"] == to_json(c));
  const auto trace = slurp(fs::path(c.output_dir) / "trace.csv");
  CHECK(trace.rfind("j,t,tau_j,sup_norm,l1_norm,eps_j\n", 0) == 0);
  CHECK(fs::exists(fs::path(c.output_dir) / "report.json"));
  CHECK(fs::exists(fs::path(c.output_dir) / "trace.gp"));
}

TEST_CASE("artifacts are deterministic") {
  auto c = small_simulation();
  c.command = Command::Rates;
  c.output_dir = scratch("det_a").string();
  const auto a = run_experiment(c);
  const auto dir_a = c.output_dir;
  c.output_dir = scratch("det_b").string();
  const auto b = run_experiment(c);
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
    if (a.artifacts[i].filename() == "report.json") continue;  // echoes the output dir
    CHECK(slurp(a.artifacts[i]) == slurp(b.artifacts[i]));
  }
  auto ra = a.report, rb = b.report;
  ra.erase("config");
  rb.erase("config");
  CHECK(ra == rb);
}

TEST_CASE("horizon without verdict is inconclusive") {
  auto c = small_simulation();
  c.max_steps = 3;
  c.output_dir = scratch("inconclusive").string();
  CHECK(run_experiment(c).exit_code == kExitInconclusive);
}

TEST_CASE("symbol certifies both bounds for the fractional kernel") {
  ExperimentConfig c;
  c.command = Command::Symbol;
  c.kernel = FractionalSpec{0.5};
  c.h = 0.5;
  c.cutoff = 4000;
  c.xi_max = 6.0;
  c.output_dir = scratch("symbol").string();
  const auto out = run_experiment(c);
  CHECK(out.report["bounds"]["s1_certified"] == true);
  CHECK(out.report["bounds"]["s2_certified"] == true);
  CHECK(out.report["cfl_margin_min"].get<double>() >= 0.5);
  CHECK(slurp(fs::path(c.output_dir) / "symbol.csv").rfind("xi,m\n", 0) == 0);
}

TEST_CASE("eigen flags the non-simple example") {
  ExperimentConfig c;
  c.command = Command::Eigen;
  c.kernel = DiscreteDeltaSpec{{{2}, {-2}}, {1.0, 1.0}, false};
  c.h = 1.0;
  c.box_radius = 4.0;
  c.nodes = {{-1}, {0}, {1}, {2}};
  c.output_dir = scratch("eigen").string();
  const auto out = run_experiment(c);
  CHECK(out.report["eigen"]["lambda"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.report["eigen"]["simple"] == false);

  c.nodes.clear();
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("butimes in constant-datum mode has no spread") {
  ExperimentConfig c;
  c.command = Command::Butimes;
  c.kernel = LaplacianSpec{};
  c.datum = {"constant", 1.0};
  c.box_radius = 1.0;
  c.tau = 0.001;
  c.h_list = {0.5, 0.25};
  c.reference_h = 0.125;
  const auto t = butimes_study(c);
  for (const auto& r : t.rows) CHECK(r.difference == 0.0);
  CHECK(t.reference_T == doctest::Approx(blowup_times({1.0, 2.0, 0.001}).T_tau).epsilon(1e-10));
  CHECK_FALSE(t.slope);

  c.h_list = {0.5};
  c.datum = {"bump", 0.9};
  c.tau.reset();
  c.box_radius = 6.0;
  c.reference_h = 0.25;
  c.output_dir = scratch("butimes").string();
  const auto out = run_experiment(c);
  CHECK(out.report["slope"].is_null());
}

TEST_CASE("butimes aborts on a row that does not blow up") {
  ExperimentConfig c;
  c.command = Command::Butimes;
  c.p = 5.0;
  c.horizon = 5.0;
  c.h_list = {0.5};
  c.reference_h = 0.25;
  CHECK_THROWS_AS(butimes_study(c), NumericError);
  c.reference_h = 1.0;
  CHECK_THROWS_AS(butimes_study(c), ConfigError);
}

TEST_CASE("Fujita sweep on the Laplacian") {
  ExperimentConfig c;
  c.command = Command::Sweep;
  c.h = 0.5;
  c.box_radius = 20.0;
  c.horizon = 30.0;
  c.p_list = {2.0, 5.0};
  const auto rows = fujita_sweep(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].verdict == RunVerdict::BlownUp);
  CHECK(rows[1].verdict == RunVerdict::GlobalSuspected);
}

TEST_CASE("decay needs an order") {
  ExperimentConfig c;
  c.command = Command::Decay;
  c.sample_times = {1.0, 2.0};
  c.output_dir = scratch("decay").string();
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
  c.s = 1.0;
  c.h = 0.5;
  c.box_radius = 40.0;
  c.sample_times = {4.0, 8.0, 12.0, 16.0, 20.0};
  const auto out = run_experiment(c);
  CHECK(out.report["K"].get<double>() == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(out.report["slope"].get<double>() == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("diffuse conserves mass") {
  ExperimentConfig c;
  c.command = Command::Diffuse;
  c.h = 0.5;
  c.box_radius = 30.0;
  c.datum = {"spike", 1.0};
  c.sample_times = {0.0, 1.0, 2.0};
  c.output_dir = scratch("diffuse").string();
  const auto out = run_experiment(c);
  CHECK(std::abs(out.report["mass_loss"].get<double>()) < 1e-12);
  CHECK(fs::exists(fs::path(c.output_dir) / "field_2.csv"));
}

TEST_CASE("exit codes of the command-line tool") {
  const auto dir = scratch("tool");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"command": "simulate", "h": 0.5, "box_radius": 10})";
    std::ofstream(dir / "bad.json") << R"({"command": "simulate", "h": -0.5})";
    std::ofstream(dir / "short.json") << R"({"command": "simulate", "h": 0.5, "max_steps": 2})";
    std::ofstream(dir / "cfl.json") << R"({"command": "simulate", "h": 0.5, "tau": 1.0})";
  }
  const std::string out = " --out " + (dir / "out").string();
  CHECK(run_tool("simulate --config " + (dir / "ok.json").string() + out) == 0);
  CHECK(run_tool("simulate --config " + (dir / "bad.json").string() + out) == 2);
  CHECK(run_tool("simulate --config " + (dir / "cfl.json").string() + out) == 2);
  CHECK(run_tool("simulate --config " + (dir / "short.json").string() + out) == 4);
  CHECK(run_tool("eigen --config " + (dir / "ok.json").string() + out) == 2);
  CHECK(run_tool("simulate") == 2);
}

TEST_CASE("numeric failures map to exit code 3") {
  CHECK(exit_code_for(NumericError("x")) == kExitNumeric);
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(DomainError("x")) == kExitConfig);
}
