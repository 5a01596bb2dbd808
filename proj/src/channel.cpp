// SPDX-License-Identifier: Apache-2.0

#include "starrsma/channel.hpp"

#include <cmath>

namespace starrsma {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derived generator streams; stream 0 is reserved for geometry defaults.
constexpr std::uint64_t kGeometryStream = 0;
constexpr std::uint64_t kChannelStreamBase = 1;

}  // namespace

void ScenarioConfig::validate() const {
  if (K < 1) throw InvalidInputError("config: K must be >= 1");
  if (N_BS < 1 || N_u < 1) throw InvalidInputError("config: antenna counts must be >= 1");
  if (M < 2 || M % 2 != 0) throw InvalidInputError("config: M must be even and >= 2");
  if (d_c < 1 || d_p < 1) throw InvalidInputError("config: stream counts must be >= 1");
  if (!(sigma2 > 0.0)) throw InvalidInputError("config: sigma2 must be positive");
  if (!(P > 0.0)) throw InvalidInputError("config: P must be positive");
  if (!(P_C > 0.0)) throw InvalidInputError("config: P_C must be positive");
  if (!(beta >= 1.0)) throw InvalidInputError("config: beta must be >= 1");
  if (r_th < 0.0) throw InvalidInputError("config: r_th must be nonnegative");
  if (n_c < 1 || n_p < 1) throw InvalidInputError("config: blocklengths must be >= 1");
  if (!(eps_total > 0.0 && eps_total < 1.0)) {
    throw InvalidInputError("config: eps_total must be in (0, 1)");
  }
  if (!(eps_c_fraction > 0.0 && eps_c_fraction < 1.0)) {
    throw InvalidInputError("config: eps_c_fraction must be in (0, 1)");
  }
  if (rice_K < 0.0) throw InvalidInputError("config: rice_K must be nonnegative");
  if (!user_pos.empty() || !user_side.empty()) {
    if (static_cast<int>(user_pos.size()) != K ||
        static_cast<int>(user_side.size()) != K) {
      throw InvalidInputError("config: user_pos/user_side must list exactly K users");
    }
  }
}

ScenarioConfig with_default_geometry(ScenarioConfig cfg) {
  if (!cfg.user_pos.empty()) return cfg;
  Rng rng(cfg.seed, kGeometryStream);
  const int reflect_count = (cfg.K + 1) / 2;
  cfg.user_pos.resize(cfg.K);
  cfg.user_side.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const bool reflect = k < reflect_count;
    const Vec3 center = reflect ? Vec3(45.0, 5.0, 0.0) : Vec3(45.0, -5.0, 0.0);
    const double r = 5.0 * std::sqrt(rng.uniform());
    const double phi = 2.0 * kPi * rng.uniform();
    cfg.user_pos[k] = center + Vec3(r * std::cos(phi), r * std::sin(phi), 0.0);
    cfg.user_side[k] = reflect ? UserSide::Reflect : UserSide::Transmit;
  }
  return cfg;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
  state_[0] = splitmix64(s);
  state_[1] = splitmix64(s);
  if (state_[0] == 0 && state_[1] == 0) state_[0] = 1;
}

std::uint64_t Rng::next_raw() {
  // xoroshiro128+
  const std::uint64_t s0 = state_[0];
  std::uint64_t s1 = state_[1];
  const std::uint64_t result = s0 + s1;
  s1 ^= s0;
  state_[0] = ((s0 << 55) | (s0 >> 9)) ^ s1 ^ (s1 << 14);
  state_[1] = (s1 << 36) | (s1 >> 28);
  return result;
}

double Rng::uniform() {
  // (0, 1]: 53-bit mantissa, never exactly zero so log() is safe.
  return (static_cast<double>(next_raw() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
  // One Box-Muller pair per call pair; cache the partner.
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Complex Rng::cnormal() {
  const double u1 = uniform();
  const double u2 = uniform();
  const double mag = std::sqrt(-std::log(u1));  // gives CN(0,1) overall
  return Complex(mag * std::cos(2.0 * kPi * u2), mag * std::sin(2.0 * kPi * u2));
}

StarRisState StarRisState::zero(int M, ModeMask mask) {
  StarRisState s;
  s.theta_t = ComplexVector::Zero(M);
  s.theta_r = ComplexVector::Zero(M);
  s.mask = std::move(mask);
  return s;
}

ComplexVector StarRisState::active() const {
  ComplexVector z(theta_t.size());
  for (Eigen::Index m = 0; m < z.size(); ++m) {
    z(m) = mask[static_cast<size_t>(m)] == RisMode::Transmit ? theta_t(m) : theta_r(m);
  }
  return z;
}

StarRisState StarRisState::from_active(const ComplexVector& z, const ModeMask& mask) {
  if (static_cast<size_t>(z.size()) != mask.size()) {
    throw InvalidInputError("StarRisState: active vector length mismatch");
  }
  StarRisState s;
  s.mask = mask;
  s.theta_t = project_unit_disk(z, mask, RisMode::Transmit);
  s.theta_r = project_unit_disk(z, mask, RisMode::Reflect);
  return s;
}

void StarRisState::validate() const {
  const auto M = theta_t.size();
  if (theta_r.size() != M || static_cast<Eigen::Index>(mask.size()) != M) {
    throw InvalidInputError("StarRisState: inconsistent lengths");
  }
  for (Eigen::Index m = 0; m < M; ++m) {
    const bool transmit = mask[static_cast<size_t>(m)] == RisMode::Transmit;
    const Complex off = transmit ? theta_r(m) : theta_t(m);
    const Complex on = transmit ? theta_t(m) : theta_r(m);
    if (off != Complex(0.0, 0.0)) {
      throw InvalidInputError("StarRisState: off-mode coefficient not zero");
    }
    if (std::abs(on) > 1.0 + 1e-12) {
      throw InvalidInputError("StarRisState: coefficient modulus above one");
    }
  }
}

ModeMask default_mode_mask(int M) {
  if (M < 2 || M % 2 != 0) throw InvalidInputError("default_mode_mask: M must be even");
  ModeMask mask(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m) {
    mask[static_cast<size_t>(m)] = m < M / 2 ? RisMode::Transmit : RisMode::Reflect;
  }
  return mask;
}

ModeMask all_reflect_mask(int M) {
  return ModeMask(static_cast<size_t>(M), RisMode::Reflect);
}

double path_loss(double distance_m, double pl0_dB, double exponent) {
  if (!(distance_m >= 1.0)) {
    throw InvalidInputError("path_loss: distance must be >= 1 m");
  }
  return std::pow(10.0, -(pl0_dB + 10.0 * exponent * std::log10(distance_m)) / 10.0);
}

namespace {

// Half-wavelength ULA response along the azimuth between two points.
ComplexVector steering(int n, const Vec3& from, const Vec3& to) {
  const double az = std::atan2(to.y() - from.y(), to.x() - from.x());
  ComplexVector a(n);
  for (int i = 0; i < n; ++i) {
    const double phase = kPi * i * std::sin(az);
    a(i) = Complex(std::cos(phase), std::sin(phase));
  }
  return a;
}

ComplexMatrix rician(int rows, int cols, double amp, double rice_K,
                     const ComplexMatrix& los, Rng& rng) {
  const double los_w = std::sqrt(rice_K / (rice_K + 1.0));
  const double nlos_w = std::sqrt(1.0 / (rice_K + 1.0));
  ComplexMatrix x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      x(i, j) = amp * (los_w * los(i, j) + nlos_w * rng.cnormal());
    }
  }
  return x;
}

ComplexMatrix rayleigh(int rows, int cols, double amp, Rng& rng) {
  ComplexMatrix x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      x(i, j) = amp * rng.cnormal();
    }
  }
  return x;
}

}  // namespace

ChannelSet generate_channels(const ScenarioConfig& cfg_in, Rng& rng) {
  ScenarioConfig cfg = with_default_geometry(cfg_in);
  cfg.validate();
  const auto& pl = cfg.pathloss;

  const double d_bs_ris = (cfg.ris_pos - cfg.bs_pos).norm();
  if (d_bs_ris < 1e-9) throw InvalidInputError("generate_channels: BS and RIS coincide");

  ChannelSet cs;
  cs.side = cfg.user_side;

  // Fixed draw order: D, then D_k for every user, then G_k for every user.
  {
    const double amp = std::sqrt(path_loss(d_bs_ris, pl.pl0_dB, pl.exponent_ris));
    const ComplexMatrix los =
        steering(cfg.M, cfg.bs_pos, cfg.ris_pos) *
        steering(cfg.N_BS, cfg.ris_pos, cfg.bs_pos).adjoint();
    cs.D = rician(cfg.M, cfg.N_BS, amp, cfg.rice_K, los, rng);
  }
  cs.Dk.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const double d = (cfg.user_pos[k] - cfg.ris_pos).norm();
    if (d < 1e-9) throw InvalidInputError("generate_channels: user coincides with RIS");
    const double amp = std::sqrt(path_loss(d, pl.pl0_dB, pl.exponent_ris));
    const ComplexMatrix los =
        steering(cfg.N_u, cfg.ris_pos, cfg.user_pos[k]) *
        steering(cfg.M, cfg.user_pos[k], cfg.ris_pos).adjoint();
    cs.Dk.push_back(rician(cfg.N_u, cfg.M, amp, cfg.rice_K, los, rng));
  }
  cs.Gk.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const double d = (cfg.user_pos[k] - cfg.bs_pos).norm();
    if (d < 1e-9) throw InvalidInputError("generate_channels: user coincides with BS");
    const double amp = std::sqrt(path_loss(d, pl.pl0_dB, pl.exponent_direct));
    cs.Gk.push_back(rayleigh(cfg.N_u, cfg.N_BS, amp, rng));
  }
  return cs;
}

ChannelSet generate_channels(const ScenarioConfig& cfg, std::uint64_t trial) {
  Rng rng(cfg.seed, kChannelStreamBase + trial);
  return generate_channels(cfg, rng);
}

ComplexMatrix compose_channel(const ChannelSet& cs, const StarRisState& ris, int k) {
  if (k < 0 || k >= static_cast<int>(cs.Gk.size())) {
    throw InvalidInputError("compose_channel: user index out of range");
  }
  const ComplexVector& theta =
      cs.side[static_cast<size_t>(k)] == UserSide::Reflect ? ris.theta_r : ris.theta_t;
  return cs.Dk[static_cast<size_t>(k)] * theta.asDiagonal() * cs.D +
         cs.Gk[static_cast<size_t>(k)];
}

std::vector<ComplexMatrix> compose_all(const ChannelSet& cs, const StarRisState& ris) {
  std::vector<ComplexMatrix> out;
  out.reserve(cs.Gk.size());
  for (int k = 0; k < static_cast<int>(cs.Gk.size()); ++k) {
    out.push_back(compose_channel(cs, ris, k));
  }
  return out;
}

}  // namespace starrsma
