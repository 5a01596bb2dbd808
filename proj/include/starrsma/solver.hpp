// SPDX-License-Identifier: Apache-2.0
//
// Inner convex subproblem solvers (beamforming and RIS stages) and the
// alternating-optimization outer loop for the max-min EE problem.

#pragma once

#include <optional>
#include <vector>

#include "starrsma/surrogate.hpp"

namespace starrsma {

struct SolverSettings {
  std::vector<double> rho_schedule{10.0, 100.0, 1000.0};
  std::vector<double> mu_schedule{1.0, 10.0, 100.0, 1000.0, 10000.0};
  double armijo_init = 1.0;
  double armijo_shrink = 0.5;
  double armijo_slope = 1e-4;
  int inner_max_iters = 500;        // per (rho, mu) stage
  double inner_grad_tol = 1e-6;
  double ao_rel_tol = 1e-5;
  int ao_max_iters = 50;
  int feasibility_max_iters = 10;   // AO rounds of the min-rate phase

  void validate() const;
};

enum class SolveStatus : uint8_t { Converged, MaxIters, InfeasibleMinRate };

const char* to_string(SolveStatus s);

struct SolveResult {
  BeamformerSet ws;
  StarRisState ris;
  RealVector q;
  RateReport report;
  std::vector<double> trajectory;  // true min-EE per AO iteration
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
};

struct CommonRateAllocation {
  RealVector q;
  double level = 0.0;   // achieved min_k (r_k + q_k) / p_k
  bool feasible = true; // min-rate constraints attainable within the cap
};

/// Exact maximizer of min_k (r_k + q_k)/p_k over q >= 0, sum q <= cap,
/// r_k + q_k >= r_th, by bisection on the attained level (tolerance 1e-10).
CommonRateAllocation allocate_common_rate(const RealVector& rates,
                                          const RealVector& powers, double cap,
                                          double r_th);

/// Which parts of the problem a run optimizes. TIN pins the common stream to
/// zero; fixed-RIS modes skip the RIS stage.
struct ProblemWiring {
  bool common_enabled = true;
  bool optimize_ris = true;
};

struct StageResult {
  BeamformerSet ws;
  StarRisState ris;
  RealVector q;
  double surrogate_objective = 0.0;  // min_k of the stage objective at output
  bool improved = false;             // false: safeguard kept the expansion point
};

/// Beamforming stage: quadratic-transform objective with eta fixed, exact q
/// by allocation, projected-gradient ascent over the power ball with
/// log-sum-exp smoothing and (rho, mu) continuation. Never returns a point
/// whose surrogate fractional objective is below the expansion point's.
StageResult solve_beamforming(const ChannelSet& cs, const StarRisState& ris,
                              const BeamformerSet& ws_j, const RealVector& eta,
                              const ScenarioConfig& cfg, const SolverSettings& settings,
                              const ProblemWiring& wiring);

/// RIS stage: powers fixed, maximizes min_k (r^_pk + q_k)/p_k over the masked
/// per-element unit disks; same machinery and safeguard.
StageResult solve_ris(const ChannelSet& cs, const BeamformerSet& ws_fixed,
                      const StarRisState& ris_j, const ScenarioConfig& cfg,
                      const SolverSettings& settings, const ProblemWiring& wiring);

struct InitialPoint {
  BeamformerSet ws;
  StarRisState ris;
  RealVector q;
};

/// Deterministic default initializer: matched-filter beamformers at equal
/// power, RIS phases aligned per element for the first user of each side.
InitialPoint default_initial_point(const ChannelSet& cs, const ScenarioConfig& cfg,
                                   const ModeMask& mask, const ProblemWiring& wiring);

/// Alternating optimization of problem; the trajectory of true min-EE values
/// is nondecreasing. `init` overrides the default initial point; when several
/// candidate inits are available the caller picks the best and passes it.
SolveResult optimize(const ChannelSet& cs, const ScenarioConfig& cfg,
                     const SolverSettings& settings, const ProblemWiring& wiring,
                     const std::optional<InitialPoint>& init = std::nullopt);

/// True rates at (ris, ws) with shares re-allocated against the raw rates;
/// `feasible` reports whether the min-rate constraints hold.
RateReport evaluate_with_allocation(const ChannelSet& cs, const StarRisState& ris,
                                    const BeamformerSet& ws, const ScenarioConfig& cfg,
                                    bool common_enabled, bool* feasible);

/// max(0, min over k) smoothed from below: softmin_rho(f) in
/// [min f - ln(K)/rho, min f].
double softmin(const RealVector& values, double rho);
RealVector softmin_weights(const RealVector& values, double rho);

}  // namespace starrsma
