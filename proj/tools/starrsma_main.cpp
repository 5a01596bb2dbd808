// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run experiments from a JSON config, run parameter
// sweeps, or run the built-in self checks.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "starrsma/harness.hpp"

namespace {

int exit_code_for_rows(const std::vector<starrsma::ResultRow>& rows) {
  for (const auto& r : rows) {
    if (r.status.rfind("error", 0) == 0) return 1;
  }
  return 0;
}

int do_run(const std::string& config_path, const std::string& out_path,
           const std::string& format, std::optional<std::uint64_t> seed,
           std::optional<int> workers) {
  starrsma::ExperimentSpec spec = starrsma::load_spec(config_path);
  if (seed.has_value()) spec.base.seed = *seed;
  if (workers.has_value()) spec.workers = *workers;
  spec.validate();

  const auto rows = starrsma::run_experiment(spec);
  const auto fmt = format == "json" ? starrsma::EmitFormat::Json
                                    : starrsma::EmitFormat::Csv;
  if (out_path.empty()) {
    std::cout << starrsma::render_rows(rows, fmt);
  } else {
    starrsma::emit(rows, out_path, fmt);
  }
  return exit_code_for_rows(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STAR-RIS assisted rate-splitting max-min energy-efficiency simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "csv", var;
  std::string values_csv;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  auto add_io = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out_path, "output path (stdout when omitted)");
    cmd->add_option("--format", format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--workers", workers, "worker thread count");
  };

  CLI::App* run = app.add_subcommand("run", "run the experiment in the config");
  add_io(run);

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_io(sweep);
  sweep->add_option("--var", var, "sweep variable: P_C|n|eps|P")->required();
  sweep->add_option("--values", values_csv, "comma-separated sweep values")->required();

  CLI::App* check = app.add_subcommand("check", "run the oracle/property self checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return do_run(config_path, out_path, format, seed, workers);
    }
    if (sweep->parsed()) {
      starrsma::ExperimentSpec spec = starrsma::load_spec(config_path);
      spec.sweep_var = starrsma::sweep_var_from_string(var);
      spec.sweep_values.clear();
      std::stringstream ss(values_csv);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) spec.sweep_values.push_back(std::stod(item));
      }
      if (seed.has_value()) spec.base.seed = *seed;
      if (workers.has_value()) spec.workers = *workers;
      spec.validate();
      const auto rows = starrsma::run_experiment(spec);
      const auto fmt = format == "json" ? starrsma::EmitFormat::Json
                                        : starrsma::EmitFormat::Csv;
      if (out_path.empty()) {
        std::cout << starrsma::render_rows(rows, fmt);
      } else {
        starrsma::emit(rows, out_path, fmt);
      }
      return exit_code_for_rows(rows);
    }
    if (check->parsed()) {
      const auto results = starrsma::run_self_checks();
      bool all = true;
      for (const auto& r : results) {
        std::printf("[%s] %-28s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const starrsma::InvalidInputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
