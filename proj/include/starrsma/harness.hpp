// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: config ingestion, Monte Carlo sweeps, baseline
// wiring, warm-start chains and CSV/JSON emission.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starrsma/solver.hpp"

namespace starrsma {

enum class Scheme : uint8_t { Rsma = 0, Tin = 1 };
enum class RisWiring : uint8_t { Star = 0, Reflect = 1, None = 2, Random = 3 };

const char* to_string(Scheme s);
const char* to_string(RisWiring m);
Scheme scheme_from_string(const std::string& s);
RisWiring ris_wiring_from_string(const std::string& s);

enum class SweepVar : uint8_t { None = 0, P_C, N, Eps, P };
const char* to_string(SweepVar v);
SweepVar sweep_var_from_string(const std::string& s);

struct ExperimentSpec {
  ScenarioConfig base;
  Scheme scheme = Scheme::Rsma;
  RisWiring ris_mode = RisWiring::Star;
  SweepVar sweep_var = SweepVar::None;
  std::vector<double> sweep_values;  // positive, sorted ascending
  int trials = 1;
  bool warm_start = true;
  int workers = 1;
  bool include_timing = true;  // wall_ms = 0 when false (reproducible bytes)
  SolverSettings settings;

  void validate() const;
};

struct ResultRow {
  std::string sweep_var = "none";
  double sweep_value = 0.0;
  int trial = 0;
  std::string scheme;
  std::string ris_mode;
  double min_ee_nats = 0.0;
  double min_ee_bits = 0.0;
  RealVector r_k;
  RealVector e_k;
  int iters = 0;
  std::string status;
  std::int64_t wall_ms = 0;
};

/// Fixed RIS mask/state plus which stages run, for one (scheme, ris_mode).
struct BaselineWiring {
  ProblemWiring problem;
  ModeMask mask;
  std::optional<StarRisState> fixed_ris;  // set for none/random
};

/// Applies scheme/ris_mode to a config: tin pins Wc and q to zero; reflect
/// uses an all-reflect mask; none pins theta to zero; random fixes a
/// per-trial random all-reflect state.
BaselineWiring wire_baseline(Scheme scheme, RisWiring mode, const ScenarioConfig& cfg,
                             std::uint64_t trial);

/// Runs one (scheme, ris_mode, sweep value, trial) cell, including the
/// warm-start chain when requested, sharing a solution cache across cells.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentSpec spec);

  std::vector<ResultRow> run();

  /// Solve a single cell; cached. Exposed for the ordering/acceptance tests,
  /// which compare cells across schemes and modes on paired seeds.
  const SolveResult& solve_cell(Scheme scheme, RisWiring mode, double sweep_value,
                                int trial);

  ScenarioConfig config_for(double sweep_value) const;

 private:
  ExperimentSpec spec_;
  std::map<std::string, SolveResult> cache_;
  SolveResult compute_cell(Scheme scheme, RisWiring mode, double sweep_value,
                           int trial);
};

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

enum class EmitFormat : uint8_t { Csv, Json };

std::string render_rows(const std::vector<ResultRow>& rows, EmitFormat format);
void emit(const std::vector<ResultRow>& rows, const std::string& path, EmitFormat format);

/// Flat-JSON config parsing; unknown keys are an error.
ExperimentSpec parse_spec_json(const std::string& json_text);
ExperimentSpec load_spec(const std::string& path);

/// Fast oracle/property self-checks behind the `check` CLI subcommand.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<CheckResult> run_self_checks();

}  // namespace starrsma
