#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdblowup/evolution.hpp"
#include "fdblowup/weights.hpp"

namespace fdblowup::cli {

enum class Command { Simulate, Diffuse, Eigen, Symbol, Sweep, Butimes, Rates, Decay };
std::string to_string(Command c);
/// Throws ConfigError for an unknown name.
Command parse_command(const std::string& name);

/// Initial datum. bump: amplitude (1-|x|^2)_+ (0.9 gives the standard bump);
/// smooth_bump: amplitude (1-|x|^2)_+^4; constant: amplitude everywhere, Constant extension;
/// spike: amplitude at the origin only.
struct DatumSpec {
  std::string kind = "bump";
  double amplitude = 0.9;
};

struct ExperimentConfig {
  Command command = Command::Simulate;
  KernelSpec kernel = LaplacianSpec{};
  std::optional<long> cutoff;  ///< default_cutoff when unset
  int dim = 1;
  double h = 0.25;
  double box_radius = 10.0;  ///< half-width of the box in length units; A = ceil(box_radius / h)

  double p = 2.0;
  std::optional<double> tau;    ///< explicit base step, used for every h
  double tau_fraction = 0.9;    ///< tau = fraction * cfl_tau_max when tau is unset
  std::optional<double> horizon;
  long max_steps = 10'000'000;
  double u_max = 1e8;
  long global_window = 100;
  long trace_stride = 1;
  DatumSpec datum;

  std::string output_dir = "out";
  unsigned long seed = 0;

  std::vector<double> p_list;           ///< sweep
  std::vector<double> h_list;           ///< butimes
  std::optional<double> reference_h;    ///< butimes
  std::vector<double> R_list;           ///< eigen scaling, Kaplan part of sweep
  std::optional<double> radius;         ///< eigen ball
  std::vector<LatticeIndex> nodes;      ///< eigen domain as an explicit node list (overrides radius)
  std::optional<double> s;              ///< symbol, decay, eigen scaling
  std::vector<double> sample_times;     ///< diffuse, decay
  double xi_min = 0.01;                 ///< symbol samples along the first axis
  std::optional<double> xi_max;         ///< pi / h when unset
  int xi_count = 200;
  bool xi_geometric = false;
};

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
/// Missing fields take their defaults; unknown fields and bad values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError for values no command can use.
void validate(const ExperimentConfig& config);

WeightKernel make_kernel(const ExperimentConfig& config, double h);
LatticeField make_datum(const ExperimentConfig& config, double h);
double resolve_tau(const ExperimentConfig& config, const WeightKernel& kernel);
SchemeConfig scheme_for(const ExperimentConfig& config, const WeightKernel& kernel);

struct ButimesRow {
  double h = 0.0;
  double T = 0.0;
  double difference = 0.0;  ///< |T(h) - T(reference)|
};

struct ButimesTable {
  double reference_h = 0.0;
  double reference_T = 0.0;
  std::vector<ButimesRow> rows;       ///< in the order of h_list
  std::optional<double> slope;        ///< log-log slope of difference against h
  bool strictly_decreasing = false;   ///< differences shrink as h is refined
};

/// Blow-up times over h_list against reference_h. A row that does not blow up aborts
/// with NumericError naming its h.
ButimesTable butimes_study(const ExperimentConfig& config);

struct FujitaRow {
  double p = 0.0;
  std::optional<RunVerdict> verdict;  ///< unset when the run failed
  std::optional<double> T_estimate;
  double T_lower = 0.0;
  std::string failure;
};

std::vector<FujitaRow> fujita_sweep(const ExperimentConfig& config);

struct KaplanRow {
  double R = 0.0;
  double lambda = 0.0;
  double I0 = 0.0;
  double threshold = 0.0;
  bool guaranteed = false;
};

/// Kaplan functional of the configured datum on B_R for every R in R_list.
std::vector<KaplanRow> kaplan_sweep(const ExperimentConfig& config);

struct Outcome {
  int exit_code = 0;  ///< 0 ok, 4 inconclusive
  nlohmann::json report;
  std::vector<std::filesystem::path> artifacts;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitInconclusive = 4;

/// Runs the command and writes CSV tables, report.json and a gnuplot script into
/// output_dir. Errors propagate as ConfigError, DomainError or NumericError.
Outcome run_experiment(const ExperimentConfig& config);

/// Maps an exception from run_experiment to the exit code.
int exit_code_for(const std::exception& e);

}  // namespace fdblowup::cli
