// SPDX-License-Identifier: Apache-2.0
//
// Finite-blocklength rate expressions, per-user transmit power and energy
// efficiency. Raw rates may be negative; clamping happens only in reports.

#pragma once

#include <vector>

#include "starrsma/channel.hpp"
#include "starrsma/numerics.hpp"
#include "starrsma/types.hpp"

namespace starrsma {

struct BeamformerSet {
  ComplexMatrix Wc;                // N_BS x d_c
  std::vector<ComplexMatrix> Wk;   // N_BS x d_p each

  static BeamformerSet zero(int N_BS, int d_c, int d_p, int K);
  double total_power() const;     // Tr(WcWc^H) + sum Tr(WkWk^H)
  int users() const { return static_cast<int>(Wk.size()); }
};

struct FblParams {
  int n_c = 256;
  int n_p = 256;
  double eps_c = 5e-6;
  double eps_p = 5e-6;

  static FblParams from(const ScenarioConfig& cfg);
  void validate() const;
};

struct RateReport {
  RealVector r_kp;     // clamped private rates [nats/cu]
  RealVector r_kc;     // clamped common decoding rates
  RealVector raw_kp;   // unclamped private rates
  RealVector raw_kc;   // unclamped common rates
  double common_cap = 0.0;   // max(0, min_k raw_kc)
  RealVector q;        // common-rate shares
  RealVector r_k;      // r_kp + q_k
  RealVector p_k;      // per-user consumed power [W]
  RealVector e_k;      // r_k / p_k
  double min_ee = 0.0;
};

/// Interference-plus-noise covariances of user k for the current variables.
/// Sp excludes the user's own private stream, Sa includes all private
/// streams, Sc additionally includes the common stream.
struct UserCovariances {
  std::vector<ComplexMatrix> HW;  // H_k W_i for each i
  ComplexMatrix HWc;              // H_k W_c
  ComplexMatrix Sp, Sa, Sc;       // N_u x N_u
};

UserCovariances user_covariances(const ComplexMatrix& H_k, const BeamformerSet& ws,
                                 double sigma2, int k);

/// Eq.-(4)-style private rate: logdet term minus the dispersion penalty.
double private_rate(const ComplexMatrix& H_k, const BeamformerSet& ws, double sigma2,
                    const FblParams& fbl, int k);

/// Eq.-(3)-style common decoding rate at user k.
double common_rate(const ComplexMatrix& H_k, const BeamformerSet& ws, double sigma2,
                   const FblParams& fbl, int k);

/// max(0, min_k r_kc) over raw common rates.
double common_cap(const RealVector& raw_common_rates);

/// P_C + beta * (Tr(WcWc^H)/K + Tr(WkWk^H)).
double user_power(const BeamformerSet& ws, int k, double P_C, double beta, int K);

/// r/p with r clamped at zero; p must be positive.
double energy_efficiency(double rate, double power);

/// Full evaluation of one variable assignment. Throws
/// ConstraintViolationError if sum(q) exceeds the common cap by more
/// than 1e-9.
RateReport evaluate(const ChannelSet& cs, const StarRisState& ris,
                    const BeamformerSet& ws, const RealVector& q,
                    const ScenarioConfig& cfg);

}  // namespace starrsma
