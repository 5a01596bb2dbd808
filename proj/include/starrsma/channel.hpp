// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration, channel generation (Rician RIS links, Rayleigh
// direct links, log-distance path loss) and composition of the effective
// per-user channel through the STAR-RIS.

#pragma once

#include <cstdint>
#include <vector>

#include "starrsma/numerics.hpp"
#include "starrsma/types.hpp"

namespace starrsma {

enum class UserSide : uint8_t { Reflect = 0, Transmit = 1 };

struct PathLossModel {
  double pl0_dB = 30.0;          // reference loss at 1 m
  double exponent_direct = 3.75; // BS-user (NLOS)
  double exponent_ris = 2.2;     // BS-RIS and RIS-user (LOS)
};

struct ScenarioConfig {
  int K = 4;       // users
  int N_BS = 2;    // BS antennas
  int N_u = 2;     // user antennas
  int M = 16;      // RIS elements, even
  int d_c = 2;     // streams of the common message
  int d_p = 2;     // streams per private message

  double sigma2 = 1e-12;    // noise power [W]
  double P = 1.0;           // BS power budget [W]
  double P_C = 1.0;         // static power per user [W]
  double beta = 1.0;        // transmit power-efficiency factor, >= 1
  double r_th = 0.0;        // per-user minimum rate [nats/cu]

  int n_c = 256;            // common blocklength [channel uses]
  int n_p = 256;            // private blocklength
  double eps_total = 1e-5;  // total error target
  double eps_c_fraction = 0.5;  // share of eps_total assigned to the common stage

  double rice_K = 3.0;      // Ricean factor (linear) for D and D_k
  PathLossModel pathloss;

  Vec3 bs_pos{0.0, 0.0, 0.0};
  Vec3 ris_pos{40.0, 2.0, 0.0};
  std::vector<Vec3> user_pos;        // size K once finalized
  std::vector<UserSide> user_side;   // size K once finalized

  std::uint64_t seed = 1;

  double eps_c() const { return eps_total * eps_c_fraction; }
  double eps_p() const { return eps_total * (1.0 - eps_c_fraction); }

  /// Throws InvalidInputError on violated invariants.
  void validate() const;
};

/// Fills in the default user layout when none was given: K/2 users uniformly
/// in a 5 m-radius disk on the reflect side, K/2 on the transmit side, drawn
/// deterministically from cfg.seed.
ScenarioConfig with_default_geometry(ScenarioConfig cfg);

/// Deterministic stream of N(0,1)/CN(0,1) variates. mt19937_64 plus explicit
/// Box-Muller so output is identical across standard libraries.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);
  double normal();
  Complex cnormal();  // CN(0,1)
  double uniform();   // (0,1]

 private:
  std::uint64_t state_[2];
  std::uint64_t next_raw();
};

struct ChannelSet {
  ComplexMatrix D;                  // M x N_BS, BS -> RIS
  std::vector<ComplexMatrix> Dk;    // N_u x M, RIS -> user k
  std::vector<ComplexMatrix> Gk;    // N_u x N_BS, BS -> user k
  std::vector<UserSide> side;
};

struct StarRisState {
  ComplexVector theta_t;  // length M
  ComplexVector theta_r;  // length M
  ModeMask mask;

  static StarRisState zero(int M, ModeMask mask);
  /// Active coefficient per element (theta of the element's own mode).
  ComplexVector active() const;
  static StarRisState from_active(const ComplexVector& z, const ModeMask& mask);
  void validate() const;
};

/// First M/2 elements transmit-only, second half reflect-only. M must be even.
ModeMask default_mode_mask(int M);
ModeMask all_reflect_mask(int M);

/// Linear power gain 10^{-(pl0 + 10*exponent*log10(d))/10}; d >= 1 m.
double path_loss(double distance_m, double pl0_dB, double exponent);

/// One channel realization. Identical (cfg, rng stream) gives bitwise
/// identical output.
ChannelSet generate_channels(const ScenarioConfig& cfg, Rng& rng);

/// Convenience: generator stream derived from (cfg.seed, trial).
ChannelSet generate_channels(const ScenarioConfig& cfg, std::uint64_t trial);

/// H_k = D_k diag(theta_side(k)) D + G_k.
ComplexMatrix compose_channel(const ChannelSet& cs, const StarRisState& ris, int k);

std::vector<ComplexMatrix> compose_all(const ChannelSet& cs, const StarRisState& ris);

}  // namespace starrsma
