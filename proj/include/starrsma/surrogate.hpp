// SPDX-License-Identifier: Apache-2.0
//
// Concave lower bounds of the FBL rates around an expansion point
// (Hbar, Wbar), used for both the beamforming step (channel fixed, W free)
// and the RIS step (W fixed, channel affine in theta). The bound of each
// rate is  a + 2Re tr(A_sig X_sig^H Y^H) + 2 sum_i Re tr(A_i X_i^H Y^H)
//          - tr(B (sigma^2 I + sum of Gram terms)),
// affine plus a concave quadratic in whichever block is free; it is tight
// and gradient-matching at the expansion point and a global lower bound.

#pragma once

#include <optional>
#include <vector>

#include "starrsma/rates.hpp"

namespace starrsma {

/// Constants of one user's pair of bounds at one expansion point.
struct UserSurrogate {
  // private-rate bound
  double a_p = 0.0;
  ComplexMatrix A_sig_p;                 // N_u x d_p
  std::vector<ComplexMatrix> A_cross_p;  // per interferer i != k (empty at i == k)
  ComplexMatrix B_p;                     // N_u x N_u, Hermitian PSD
  double v_p = 0.0;
  bool degenerate_p = false;

  // common-rate bound (unused under TIN wiring)
  double a_c = 0.0;
  ComplexMatrix A_sig_c;                 // N_u x d_c
  std::vector<ComplexMatrix> A_cross_c;  // per private i (all i)
  ComplexMatrix B_c;
  double v_c = 0.0;
  bool degenerate_c = false;
};

struct SurrogateConstants {
  std::vector<UserSurrogate> users;
  std::vector<ComplexMatrix> Hbar;  // composed channels at the expansion point
  BeamformerSet Wbar;
  double sigma2 = 0.0;
  FblParams fbl;
  int I_rank = 0;                   // min(N_BS, N_u)
  bool common_enabled = true;
};

/// Shared builder: constants at an explicit expansion point (Hbar, Wbar).
SurrogateConstants build_constants(const std::vector<ComplexMatrix>& Hbar,
                                   const BeamformerSet& ws_bar,
                                   const ScenarioConfig& cfg, bool common_enabled);

/// Lemma-1 constants: RIS state fixed, expansion at ws_bar.
SurrogateConstants build_bf_constants(const ChannelSet& cs, const StarRisState& ris,
                                      const BeamformerSet& ws_bar,
                                      const ScenarioConfig& cfg, bool common_enabled);

/// Lemma-2 constants: beamformers fixed at ws_fixed, expansion at ris_bar.
/// Same constants as Lemma 1 evaluated at (H(ris_bar), ws_fixed).
SurrogateConstants build_ris_constants(const ChannelSet& cs, const StarRisState& ris_bar,
                                       const BeamformerSet& ws_fixed,
                                       const ScenarioConfig& cfg, bool common_enabled);

/// Evaluator over beamformers with the channel frozen at Hbar.
/// Gradients use the stacked real/imag convention: for a complex direction Z,
/// d f = 2 Re<Z, G>; callers differentiating over real coordinates multiply
/// real and imaginary parts of G by 2.
class BfSurrogate {
 public:
  explicit BfSurrogate(const SurrogateConstants& consts);

  double value_private(int k, const BeamformerSet& ws) const;
  double value_common(int k, const BeamformerSet& ws) const;

  /// Accumulates coeff * (complex cogradient) into grad.
  void add_grad_private(int k, const BeamformerSet& ws, double coeff,
                        BeamformerSet& grad) const;
  void add_grad_common(int k, const BeamformerSet& ws, double coeff,
                       BeamformerSet& grad) const;

  const SurrogateConstants& constants() const { return *consts_; }

 private:
  const SurrogateConstants* consts_;
  struct Cache {
    ComplexMatrix L_sig_p;                 // Hbar^H A_sig_p
    std::vector<ComplexMatrix> L_cross_p;  // Hbar^H A_ki
    ComplexMatrix C_p;                     // Hbar^H B_p Hbar
    double const_p = 0.0;                  // a_p - sigma2 * tr(B_p)
    ComplexMatrix L_sig_c;
    std::vector<ComplexMatrix> L_cross_c;
    ComplexMatrix C_c;
    double const_c = 0.0;
  };
  std::vector<Cache> cache_;
};

/// Evaluator over channels H_k with the beamformers frozen at Wbar; the
/// caller composes H_k(theta) and chains gradients through the affine map.
class RisSurrogate {
 public:
  explicit RisSurrogate(const SurrogateConstants& consts);

  double value_private(int k, const ComplexMatrix& H_k) const;
  double value_common(int k, const ComplexMatrix& H_k) const;
  ComplexMatrix grad_h_private(int k, const ComplexMatrix& H_k) const;
  ComplexMatrix grad_h_common(int k, const ComplexMatrix& H_k) const;

  const SurrogateConstants& constants() const { return *consts_; }

 private:
  const SurrogateConstants* consts_;
  struct Cache {
    ComplexMatrix M_p;    // A_sig_p Wbar_k^H + sum A_ki Wbar_i^H
    ComplexMatrix M_c;
    ComplexMatrix P_w;    // sum_i Wbar_i Wbar_i^H
    ComplexMatrix P_wc;   // P_w + Wbar_c Wbar_c^H
    double trB_p = 0.0;
    double trB_c = 0.0;
  };
  std::vector<Cache> cache_;
};

/// Chain rule from a channel cogradient to the active RIS coefficient vector:
/// entry m (on the user's side) is conj(diag(D * G_H^H * D_k))_m.
ComplexVector chain_grad_to_theta(const ComplexMatrix& grad_H, const ChannelSet& cs,
                                  int k);

/// Quadratic-transform auxiliaries eta_k = sqrt(r_k) / p_k from a report.
RealVector update_eta(const RateReport& report);

}  // namespace starrsma
