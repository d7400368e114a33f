#include "fdblowup/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "fdblowup/eigen.hpp"
#include "fdblowup/errors.hpp"
#include "fdblowup/io_format.hpp"
#include "fdblowup/operator.hpp"

namespace fdblowup::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::Simulate, "simulate"}, {Command::Diffuse, "diffuse"}, {Command::Eigen, "eigen"},
    {Command::Symbol, "symbol"},     {Command::Sweep, "sweep"},     {Command::Butimes, "butimes"},
    {Command::Rates, "rates"},       {Command::Decay, "decay"}};

const std::set<std::string> kDatumKinds = {"bump", "smooth_bump", "constant", "spike"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError("unknown field '" + key + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad or missing field '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
void read(const json& j, const std::string& key, T& out) {
  if (j.contains(key)) out = get<T>(j, key, "config");
}

template <class T>
void read(const json& j, const std::string& key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = get<T>(j, key, "config");
}

long box_nodes(double radius, double h) {
  return std::max(1L, static_cast<long>(std::ceil(radius / h - 1e-9)));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Gnuplot script plotting column y against column x of a CSV.
void write_plot(const fs::path& path, const std::string& csv, int x, int y, bool logx, bool logy,
                const std::string& xlabel, const std::string& ylabel) {
  auto out = open_out(path);
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead\n";
  if (logx) out << "set logscale x\n";
  if (logy) out << "set logscale y\n";
  out << "set xlabel '" << xlabel << "'\n";
  out << "set ylabel '" << ylabel << "'\n";
  out << "plot '" << csv << "' using " << x << ':' << y << " with linespoints\n";
}

json report_json(const BlowUpReport& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["trigger_step"] = r.trigger_step ? json(*r.trigger_step) : json(nullptr);
  j["T_lower"] = r.T_lower;
  j["T_estimate"] = optional_json(r.T_estimate);
  j["rate_constant"] = optional_json(r.rate_constant);
  j["g_tau"] = r.g_tau;
  j["steps"] = r.steps;
  j["final_sup"] = r.final_sup;
  j["post_trigger_monotone"] = r.post_trigger_monotone;
  return j;
}

std::vector<long> sample_steps(const ExperimentConfig& config, double tau) {
  if (config.sample_times.empty()) throw ConfigError("command needs sample_times");
  std::vector<long> steps;
  for (double t : config.sample_times) {
    if (!(t >= 0.0)) throw ConfigError("sample times must be nonnegative");
    steps.push_back(std::lround(t / tau));
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

FourierSymbol configured_symbol(const ExperimentConfig& config, const WeightKernel& kernel) {
  const double hi = config.xi_max.value_or(std::numbers::pi / config.h);
  return symbol(kernel, axis_samples(config.dim, config.xi_min, hi, config.xi_count, config.xi_geometric));
}

struct Writer {
  fs::path dir;
  Outcome* outcome;

  std::ofstream open(const std::string& name) {
    outcome->artifacts.push_back(dir / name);
    return open_out(dir / name);
  }
  void plot(const std::string& name, const std::string& csv, int x, int y, bool logx, bool logy,
            const std::string& xlabel, const std::string& ylabel) {
    outcome->artifacts.push_back(dir / name);
    write_plot(dir / name, csv, x, y, logx, logy, xlabel, ylabel);
  }
};

void run_simulate(const ExperimentConfig& config, Outcome& out, Writer& w, bool rates) {
  const auto kernel = make_kernel(config, config.h);
  const auto run = run_semilinear(kernel, make_datum(config, config.h), scheme_for(config, kernel));
  out.report["run"] = report_json(run.report);
  {
    auto f = w.open("trace.csv");
    write_trace_csv(f, run.trace);
  }
  {
    auto f = w.open("final_field.csv");
    write_csv(f, run.final_field);
  }
  w.plot("trace.gp", "trace.csv", 2, 4, false, true, "t", "sup norm");
  if (run.report.verdict == RunVerdict::HorizonReached) out.exit_code = kExitInconclusive;
  if (!rates) return;
  if (run.report.verdict != RunVerdict::BlownUp) {
    out.exit_code = kExitInconclusive;
    return;
  }
  const auto rs = rate_series(run.trace, run.report, config.p);
  out.report["rates"] = {{"tail_mean", rs.tail_mean},
                         {"tail_count", rs.tail_count},
                         {"g_tau", rs.g_tau},
                         {"in_bracket", rs.in_bracket},
                         {"bracket", {1.0 / (config.p - 1.0), std::pow(2.0, config.p - 1.0) /
                                                                 (std::pow(2.0, config.p - 1.0) - 1.0)}}};
  auto f = w.open("rates.csv");
  f << "t,rate\n";
  for (const auto& [t, v] : rs.rows) f << format_sci(t) << ',' << format_sci(v) << '\n';
  w.plot("rates.gp", "rates.csv", 1, 2, false, false, "t", "(T - t) sup^(p-1)");
}

DiffusionRun diffuse(const ExperimentConfig& config, const WeightKernel& kernel, const LatticeField& phi) {
  const double tau = resolve_tau(config, kernel);
  const auto steps = sample_steps(config, tau);
  const long stride = std::max(config.trace_stride, 1L);
  return run_diffusion(kernel, phi, tau, steps.back(), steps, stride);
}

void run_diffuse(const ExperimentConfig& config, Outcome& out, Writer& w) {
  const auto kernel = make_kernel(config, config.h);
  const auto phi = make_datum(config, config.h);
  const auto run = diffuse(config, kernel, phi);
  out.report["initial_mass"] = run.initial_mass;
  out.report["final_mass"] = run.final_mass;
  out.report["mass_loss"] = run.initial_mass - run.final_mass;
  {
    auto f = w.open("trace.csv");
    write_trace_csv(f, run.trace);
  }
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    auto f = w.open("field_" + std::to_string(i) + ".csv");
    write_csv(f, run.samples[i].second);
  }
  w.plot("trace.gp", "trace.csv", 2, 4, true, true, "t", "sup norm");
}

void run_decay(const ExperimentConfig& config, Outcome& out, Writer& w) {
  if (!config.s) throw ConfigError("decay needs the order s");
  const auto kernel = make_kernel(config, config.h);
  const auto phi = make_datum(config, config.h);
  const double K = symbol_bounds(configured_symbol(config, kernel), *config.s).limit_K;
  if (!(K > 0.0)) throw NumericError("symbol fit gave a nonpositive K");
  const auto run = diffuse(config, kernel, phi);
  const auto prof = decay_profile(run.samples, lattice_mass(phi), K, *config.s);
  out.report["K"] = K;
  out.report["slope"] = prof.slope;
  out.report["expected_slope"] = -config.dim / (2.0 * *config.s);
  out.report["mass"] = lattice_mass(phi);
  auto f = w.open("decay.csv");
  f << "t,rescaled_discrepancy,rescaled_sup,sup\n";
  for (const auto& r : prof.rows)
    f << format_sci(r.t) << ',' << format_sci(r.rescaled_discrepancy) << ',' << format_sci(r.rescaled_sup) << ','
      << format_sci(r.sup) << '\n';
  w.plot("decay.gp", "decay.csv", 1, 4, true, true, "t", "sup norm");
  if (prof.rows.size() < 2) out.exit_code = kExitInconclusive;
}

void run_symbol(const ExperimentConfig& config, Outcome& out, Writer& w) {
  const auto kernel = make_kernel(config, config.h);
  const auto sym = configured_symbol(config, kernel);
  {
    auto f = w.open("symbol.csv");
    write_symbol_csv(f, sym);
  }
  w.plot("symbol.gp", "symbol.csv", 1, 2, false, false, "xi", "m(xi)");
  out.report["tail_bound"] = sym.tail_bound;
  const double tau = cfl_tau_max(kernel);
  double floor = INFINITY;
  for (double m : sym.values) floor = std::min(floor, 1.0 + tau * m);
  out.report["cfl_margin_min"] = floor;
  const auto s = config.s ? config.s : sym.s_hint;
  if (!s) {
    out.report["bounds"] = nullptr;
    return;
  }
  const auto b = symbol_bounds(sym, *s);
  out.report["bounds"] = {{"s", b.s},
                          {"K_upper", b.K_upper},
                          {"K_lower", b.K_lower},
                          {"limit_K", b.limit_K},
                          {"s1_certified", b.s1_certified},
                          {"s2_certified", b.s2_certified},
                          {"samples_used", b.samples_used}};
}

void run_eigen(const ExperimentConfig& config, Outcome& out, Writer& w) {
  const auto kernel = make_kernel(config, config.h);
  if (!config.nodes.empty() || config.radius) {
    const auto problem = config.nodes.empty() ? DirichletProblem::ball(kernel, *config.radius)
                                              : DirichletProblem::from_nodes(kernel, config.nodes);
    const auto res = solve(problem);
    const auto shape = eigen_shape_checks(res);
    out.report["eigen"] = {{"lambda", res.lambda},
                           {"residual", res.residual},
                           {"gap", res.gap},
                           {"simple", res.simple},
                           {"rayleigh_ok", res.rayleigh_ok},
                           {"iterations", res.iterations},
                           {"nodes", problem.size()},
                           {"positive_interior", shape.positive_interior},
                           {"max_at_center", shape.max_at_center},
                           {"radially_nonincreasing", shape.radially_nonincreasing}};
    if (problem.size() <= 6) {
      const auto m = assemble_dirichlet_matrix(problem);
      out.report["eigen"]["lowest"] = lowest_eigenvalues(m, static_cast<int>(problem.size()));
    }
    auto f = w.open("eigenfunction.csv");
    write_csv(f, res.eigenfunction);
  }
  if (!config.R_list.empty()) {
    if (!config.s) throw ConfigError("eigen scaling needs the order s");
    const auto study = scaling_study(kernel, config.R_list, *config.s);
    out.report["scaling"] = {{"s", study.s}, {"bounded", study.bounded},
                             {"strictly_decreasing", study.strictly_decreasing}};
    {
      auto f = w.open("scaling.csv");
      write_scaling_csv(f, study);
    }
    w.plot("scaling.gp", "scaling.csv", 1, 2, true, true, "R", "lambda");
  }
  if (config.nodes.empty() && !config.radius && config.R_list.empty())
    throw ConfigError("eigen needs radius, nodes or R_list");
}

void run_sweep(const ExperimentConfig& config, Outcome& out, Writer& w) {
  if (config.p_list.empty() && config.R_list.empty()) throw ConfigError("sweep needs p_list or R_list");
  if (!config.p_list.empty()) {
    const auto rows = fujita_sweep(config);
    auto f = w.open("fujita.csv");
    f << "p,verdict,T_estimate,T_lower,failure\n";
    json arr = json::array();
    for (const auto& r : rows) {
      const std::string v = r.verdict ? to_string(*r.verdict) : "Failed";
      f << format_sci(r.p) << ',' << v << ',' << format_sci(r.T_estimate.value_or(NAN)) << ','
        << format_sci(r.T_lower) << ',' << r.failure << '\n';
      arr.push_back({{"p", r.p}, {"verdict", v}, {"T_estimate", optional_json(r.T_estimate)},
                     {"T_lower", r.T_lower}, {"failure", r.failure}});
    }
    out.report["fujita"] = arr;
  }
  if (!config.R_list.empty()) {
    const auto rows = kaplan_sweep(config);
    auto f = w.open("kaplan.csv");
    f << "R,lambda,I0,threshold,guaranteed\n";
    json arr = json::array();
    for (const auto& r : rows) {
      f << format_sci(r.R) << ',' << format_sci(r.lambda) << ',' << format_sci(r.I0) << ','
        << format_sci(r.threshold) << ',' << (r.guaranteed ? 1 : 0) << '\n';
      arr.push_back({{"R", r.R}, {"lambda", r.lambda}, {"I0", r.I0}, {"threshold", r.threshold},
                     {"guaranteed", r.guaranteed}});
    }
    out.report["kaplan"] = arr;
  }
}

void run_butimes(const ExperimentConfig& config, Outcome& out, Writer& w) {
  const auto table = butimes_study(config);
  out.report["reference_h"] = table.reference_h;
  out.report["reference_T"] = table.reference_T;
  out.report["slope"] = optional_json(table.slope);
  out.report["strictly_decreasing"] = table.strictly_decreasing;
  auto f = w.open("butimes.csv");
  f << "h,T,difference\n";
  for (const auto& r : table.rows)
    f << format_sci(r.h) << ',' << format_sci(r.T) << ',' << format_sci(r.difference) << '\n';
  w.plot("butimes.gp", "butimes.csv", 1, 3, true, true, "h", "|T(h) - T(ref)|");
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : kCommands)
    if (cmd == c) return name;
  return "simulate";
}

Command parse_command(const std::string& name) {
  for (const auto& [cmd, n] : kCommands)
    if (name == n) return cmd;
  throw ConfigError("unknown command '" + name + "'");
}

json to_json(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, LaplacianSpec>) {
          return {{"family", "laplacian"}};
        } else if constexpr (std::is_same_v<T, FractionalSpec>) {
          return {{"family", "fractional"}, {"s", k.s}};
        } else if constexpr (std::is_same_v<T, ZeroOrderSpec>) {
          return {{"family", "zero_order"},
                  {"profile", k.profile == RadialProfile::Gaussian ? "gaussian" : "indicator"},
                  {"amplitude", k.amplitude},
                  {"width", k.width}};
        } else if constexpr (std::is_same_v<T, DiscreteDeltaSpec>) {
          return {{"family", "delta"}, {"offsets", k.offsets}, {"masses", k.masses}, {"symmetrize", k.symmetrize}};
        } else {
          json comps = json::array();
          for (const auto& c : k.components) comps.push_back({{"coefficient", c.coefficient}, {"kernel", to_json(c.kernel)}});
          return {{"family", "mixed"}, {"components", comps}};
        }
      },
      spec);
}

KernelSpec kernel_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("kernel must be a JSON object");
  const auto family = get<std::string>(j, "family", "kernel");
  if (family == "laplacian") {
    check_keys(j, {"family"}, "kernel");
    return LaplacianSpec{};
  }
  if (family == "fractional") {
    check_keys(j, {"family", "s"}, "kernel");
    return FractionalSpec{get<double>(j, "s", "kernel")};
  }
  if (family == "zero_order") {
    check_keys(j, {"family", "profile", "amplitude", "width"}, "kernel");
    ZeroOrderSpec z;
    const auto profile = j.contains("profile") ? get<std::string>(j, "profile", "kernel") : "gaussian";
    if (profile == "gaussian") {
      z.profile = RadialProfile::Gaussian;
    } else if (profile == "indicator") {
      z.profile = RadialProfile::Indicator;
    } else {
      throw ConfigError("unknown radial profile '" + profile + "'");
    }
    if (j.contains("amplitude")) z.amplitude = get<double>(j, "amplitude", "kernel");
    if (j.contains("width")) z.width = get<double>(j, "width", "kernel");
    return z;
  }
  if (family == "delta") {
    check_keys(j, {"family", "offsets", "masses", "symmetrize"}, "kernel");
    DiscreteDeltaSpec d;
    d.offsets = get<std::vector<LatticeIndex>>(j, "offsets", "kernel");
    d.masses = get<std::vector<double>>(j, "masses", "kernel");
    if (j.contains("symmetrize")) d.symmetrize = get<bool>(j, "symmetrize", "kernel");
    return d;
  }
  if (family == "mixed") {
    check_keys(j, {"family", "components"}, "kernel");
    MixedSpec m;
    for (const auto& c : j.at("components")) {
      check_keys(c, {"coefficient", "kernel"}, "mixed component");
      m.components.push_back({get<double>(c, "coefficient", "mixed component"), kernel_from_json(c.at("kernel"))});
    }
    return m;
  }
  throw ConfigError("unknown kernel family '" + family + "'");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  j["kernel"] = to_json(c.kernel);
  if (c.cutoff) j["cutoff"] = *c.cutoff;
  j["dim"] = c.dim;
  j["h"] = c.h;
  j["box_radius"] = c.box_radius;
  j["p"] = c.p;
  j["tau"] = c.tau ? json(*c.tau) : json("auto");
  j["tau_fraction"] = c.tau_fraction;
  if (c.horizon) j["horizon"] = *c.horizon;
  j["max_steps"] = c.max_steps;
  j["u_max"] = c.u_max;
  j["global_window"] = c.global_window;
  j["trace_stride"] = c.trace_stride;
  j["datum"] = {{"kind", c.datum.kind}, {"amplitude", c.datum.amplitude}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  if (!c.p_list.empty()) j["p_list"] = c.p_list;
  if (!c.h_list.empty()) j["h_list"] = c.h_list;
  if (c.reference_h) j["reference_h"] = *c.reference_h;
  if (!c.R_list.empty()) j["R_list"] = c.R_list;
  if (c.radius) j["radius"] = *c.radius;
  if (!c.nodes.empty()) j["nodes"] = c.nodes;
  if (c.s) j["s"] = *c.s;
  if (!c.sample_times.empty()) j["sample_times"] = c.sample_times;
  j["xi_min"] = c.xi_min;
  if (c.xi_max) j["xi_max"] = *c.xi_max;
  j["xi_count"] = c.xi_count;
  j["xi_geometric"] = c.xi_geometric;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"command", "kernel", "cutoff", "dim", "h", "box_radius", "p", "tau", "tau_fraction", "horizon",
              "max_steps", "u_max", "global_window", "trace_stride", "datum", "output_dir", "seed", "p_list",
              "h_list", "reference_h", "R_list", "radius", "nodes", "s", "sample_times", "xi_min", "xi_max",
              "xi_count", "xi_geometric"},
             "config");
  ExperimentConfig c;
  if (j.contains("command")) c.command = parse_command(get<std::string>(j, "command", "config"));
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  read(j, "cutoff", c.cutoff);
  read(j, "dim", c.dim);
  read(j, "h", c.h);
  read(j, "box_radius", c.box_radius);
  read(j, "p", c.p);
  if (j.contains("tau")) {
    const auto& t = j.at("tau");
    if (t.is_string()) {
      if (t.get<std::string>() != "auto") throw ConfigError("tau must be a number or \"auto\"");
      c.tau.reset();
    } else {
      read(j, "tau", c.tau);
    }
  }
  read(j, "tau_fraction", c.tau_fraction);
  read(j, "horizon", c.horizon);
  read(j, "max_steps", c.max_steps);
  read(j, "u_max", c.u_max);
  read(j, "global_window", c.global_window);
  read(j, "trace_stride", c.trace_stride);
  if (j.contains("datum")) {
    const auto& d = j.at("datum");
    check_keys(d, {"kind", "amplitude"}, "datum");
    if (d.contains("kind")) c.datum.kind = get<std::string>(d, "kind", "datum");
    if (d.contains("amplitude")) c.datum.amplitude = get<double>(d, "amplitude", "datum");
  }
  read(j, "output_dir", c.output_dir);
  read(j, "seed", c.seed);
  read(j, "p_list", c.p_list);
  read(j, "h_list", c.h_list);
  read(j, "reference_h", c.reference_h);
  read(j, "R_list", c.R_list);
  read(j, "radius", c.radius);
  read(j, "nodes", c.nodes);
  read(j, "s", c.s);
  read(j, "sample_times", c.sample_times);
  read(j, "xi_min", c.xi_min);
  read(j, "xi_max", c.xi_max);
  read(j, "xi_count", c.xi_count);
  read(j, "xi_geometric", c.xi_geometric);
  validate(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  if (c.dim < 1 || c.dim > 3) throw ConfigError("dim must be 1, 2 or 3");
  if (!(c.h > 0.0) || !std::isfinite(c.h)) throw ConfigError("h must be positive");
  if (!(c.box_radius > 0.0) || !std::isfinite(c.box_radius)) throw ConfigError("box_radius must be positive");
  if (!(c.p > 1.0)) throw ConfigError("p must exceed 1");
  if (c.tau && !(*c.tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(c.tau_fraction > 0.0 && c.tau_fraction <= 1.0)) throw ConfigError("tau_fraction must lie in (0,1]");
  if (c.horizon && !(*c.horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (c.max_steps < 0) throw ConfigError("max_steps must be nonnegative");
  if (!(c.u_max > 1.0)) throw ConfigError("u_max must exceed 1");
  if (c.global_window < 1) throw ConfigError("global_window must be positive");
  if (c.trace_stride < 1) throw ConfigError("trace_stride must be positive");
  if (c.cutoff && *c.cutoff < 1) throw ConfigError("cutoff must be positive");
  if (!kDatumKinds.contains(c.datum.kind)) throw ConfigError("unknown datum kind '" + c.datum.kind + "'");
  if (!(c.datum.amplitude >= 0.0) || !std::isfinite(c.datum.amplitude))
    throw ConfigError("datum amplitude must be nonnegative");
  for (double p : c.p_list)
    if (!(p > 1.0)) throw ConfigError("every p in p_list must exceed 1");
  for (double h : c.h_list)
    if (!(h > 0.0)) throw ConfigError("every h in h_list must be positive");
  if (c.reference_h && !(*c.reference_h > 0.0)) throw ConfigError("reference_h must be positive");
  for (double r : c.R_list)
    if (!(r > 0.0)) throw ConfigError("every R in R_list must be positive");
  if (c.radius && !(*c.radius > 0.0)) throw ConfigError("radius must be positive");
  for (const auto& a : c.nodes)
    if (static_cast<int>(a.size()) != c.dim) throw ConfigError("node dimension does not match dim");
  if (c.s && !(*c.s > 0.0 && *c.s <= 1.0)) throw ConfigError("s must lie in (0,1]");
  if (!(c.xi_min > 0.0)) throw ConfigError("xi_min must be positive");
  if (c.xi_max && !(*c.xi_max > c.xi_min)) throw ConfigError("xi_max must exceed xi_min");
  if (c.xi_count < 3) throw ConfigError("xi_count must be at least 3");
}

WeightKernel make_kernel(const ExperimentConfig& config, double h) {
  const long a = box_nodes(config.box_radius, h);
  return build_kernel(config.kernel, h, config.dim, config.cutoff.value_or(default_cutoff(config.kernel, h, a)));
}

LatticeField make_datum(const ExperimentConfig& config, double h) {
  const LatticeBox box(config.dim, box_nodes(config.box_radius, h));
  const double amp = config.datum.amplitude;
  const auto& kind = config.datum.kind;
  if (kind == "constant")
    return {h, box, Extension::Constant, std::vector<double>(box.size(), amp), amp};
  if (kind == "spike") {
    std::vector<double> v(box.size(), 0.0);
    v[box.flat(LatticeIndex(config.dim, 0))] = amp;
    return {h, box, Extension::Zero, std::move(v)};
  }
  const int power = kind == "smooth_bump" ? 4 : 1;
  return restrict_function(
      [amp, power](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return amp * std::pow(std::max(0.0, 1.0 - r2), power);
      },
      h, box, Extension::Zero);
}

double resolve_tau(const ExperimentConfig& config, const WeightKernel& kernel) {
  return config.tau.value_or(config.tau_fraction * cfl_tau_max(kernel));
}

SchemeConfig scheme_for(const ExperimentConfig& config, const WeightKernel& kernel) {
  SchemeConfig s;
  s.p = config.p;
  s.tau = resolve_tau(config, kernel);
  s.horizon_time = config.horizon.value_or(std::numeric_limits<double>::infinity());
  s.max_steps = config.max_steps;
  s.u_max = config.u_max;
  s.global_window = config.global_window;
  s.trace_stride = config.trace_stride;
  return s;
}

ButimesTable butimes_study(const ExperimentConfig& config) {
  if (config.h_list.empty()) throw ConfigError("butimes needs h_list");
  if (!config.reference_h) throw ConfigError("butimes needs reference_h");
  if (!(*config.reference_h < *std::min_element(config.h_list.begin(), config.h_list.end())))
    throw ConfigError("reference_h must be finer than every h in h_list");

  auto blowup_time = [&](double h) {
    const auto kernel = make_kernel(config, h);
    auto scheme = scheme_for(config, kernel);
    scheme.trace_stride = std::max(scheme.max_steps, 1L);  // only the report is needed
    const auto run = run_semilinear(kernel, make_datum(config, h), scheme);
    if (run.report.verdict != RunVerdict::BlownUp)
      throw NumericError("no blow-up at h = " + format_sci(h) + " (" + to_string(run.report.verdict) + ")");
    return *run.report.T_estimate;
  };

  ButimesTable table;
  table.reference_h = *config.reference_h;
  table.reference_T = blowup_time(table.reference_h);
  for (double h : config.h_list) {
    const double T = blowup_time(h);
    table.rows.push_back({h, T, std::abs(T - table.reference_T)});
  }
  auto sorted = table.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.h > b.h; });
  table.strictly_decreasing = sorted.size() >= 2;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    table.strictly_decreasing = table.strictly_decreasing && sorted[i].difference < sorted[i - 1].difference;
  const bool positive = std::all_of(sorted.begin(), sorted.end(), [](const auto& r) { return r.difference > 0.0; });
  if (sorted.size() >= 2 && positive) {
    std::vector<double> hs, ds;
    for (const auto& r : sorted) {
      hs.push_back(r.h);
      ds.push_back(r.difference);
    }
    table.slope = loglog_slope(hs, ds);
  }
  return table;
}

std::vector<FujitaRow> fujita_sweep(const ExperimentConfig& config) {
  std::vector<FujitaRow> rows;
  const auto kernel = make_kernel(config, config.h);
  const auto u0 = make_datum(config, config.h);
  for (double p : config.p_list) {
    FujitaRow row;
    row.p = p;
    try {
      auto scheme = scheme_for(config, kernel);
      scheme.p = p;
      scheme.trace_stride = std::max(scheme.max_steps, 1L);
      const auto run = run_semilinear(kernel, u0, scheme);
      row.verdict = run.report.verdict;
      row.T_estimate = run.report.T_estimate;
      row.T_lower = run.report.T_lower;
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<KaplanRow> kaplan_sweep(const ExperimentConfig& config) {
  const auto kernel = make_kernel(config, config.h);
  const auto u0 = make_datum(config, config.h);
  std::vector<KaplanRow> rows;
  for (double r : config.R_list) {
    const auto eig = solve(DirichletProblem::ball(kernel, r));
    const auto k = kaplan_check(u0, eig, config.p);
    rows.push_back({r, eig.lambda, k.I0, k.threshold, k.guaranteed});
  }
  return rows;
}

Outcome run_experiment(const ExperimentConfig& config) {
  validate(config);
  Outcome out;
  out.report["command"] = to_string(config.command);
  out.report["config"] = to_json(config);
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  Writer w{dir, &out};
  switch (config.command) {
    case Command::Simulate:
      run_simulate(config, out, w, false);
      break;
    case Command::Rates:
      run_simulate(config, out, w, true);
      break;
    case Command::Diffuse:
      run_diffuse(config, out, w);
      break;
    case Command::Decay:
      run_decay(config, out, w);
      break;
    case Command::Symbol:
      run_symbol(config, out, w);
      break;
    case Command::Eigen:
      run_eigen(config, out, w);
      break;
    case Command::Sweep:
      run_sweep(config, out, w);
      break;
    case Command::Butimes:
      run_butimes(config, out, w);
      break;
  }
  out.report["exit_code"] = out.exit_code;
  auto f = w.open("report.json");
  f << out.report.dump(2) << '\n';
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kExitConfig;
  return kExitNumeric;
}

}  // namespace fdblowup::cli
