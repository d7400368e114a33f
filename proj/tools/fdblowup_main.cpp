#include <iostream>

#include <CLI11.hpp>

#include "fdblowup/cli.hpp"
#include "fdblowup/errors.hpp"

using namespace fdblowup;

int main(int argc, char** argv) {
  CLI::App app{"Monotone finite-difference blow-up laboratory"};
  std::string command, config_path, out_dir;
  app.add_option("command", command, "simulate, diffuse, eigen, symbol, sweep, butimes, rates or decay")
      ->required();
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  try {
    auto config = cli::load_config(config_path);
    const auto requested = cli::parse_command(command);
    if (requested != config.command)
      throw ConfigError("config is for '" + cli::to_string(config.command) + "', not '" + command + "'");
    if (!out_dir.empty()) config.output_dir = out_dir;
    const auto outcome = cli::run_experiment(config);
    for (const auto& path : outcome.artifacts) std::cout << path.string() << '\n';
    if (outcome.exit_code == cli::kExitInconclusive) std::cerr << "inconclusive: no verdict within the horizon\n";
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
