// SPDX-License-Identifier: Apache-2.0

#include "starrsma/rates.hpp"

#include <cmath>

namespace starrsma {

BeamformerSet BeamformerSet::zero(int N_BS, int d_c, int d_p, int K) {
  BeamformerSet ws;
  ws.Wc = ComplexMatrix::Zero(N_BS, d_c);
  ws.Wk.assign(static_cast<size_t>(K), ComplexMatrix::Zero(N_BS, d_p));
  return ws;
}

double BeamformerSet::total_power() const {
  double p = Wc.squaredNorm();
  for (const auto& w : Wk) p += w.squaredNorm();
  return p;
}

FblParams FblParams::from(const ScenarioConfig& cfg) {
  FblParams f;
  f.n_c = cfg.n_c;
  f.n_p = cfg.n_p;
  f.eps_c = cfg.eps_c();
  f.eps_p = cfg.eps_p();
  f.validate();
  return f;
}

void FblParams::validate() const {
  if (n_c < 1 || n_p < 1) throw InvalidInputError("fbl: blocklengths must be >= 1");
  if (!(eps_c > 0.0 && eps_c < 1.0) || !(eps_p > 0.0 && eps_p < 1.0)) {
    throw InvalidInputError("fbl: error targets must be in (0, 1)");
  }
}

UserCovariances user_covariances(const ComplexMatrix& H_k, const BeamformerSet& ws,
                                 double sigma2, int k) {
  if (!(sigma2 > 0.0)) throw InvalidInputError("rates: sigma2 must be positive");
  const auto n = H_k.rows();
  UserCovariances uc;
  uc.HW.reserve(ws.Wk.size());
  ComplexMatrix interference = sigma2 * ComplexMatrix::Identity(n, n);
  ComplexMatrix own = ComplexMatrix::Zero(n, n);
  for (int i = 0; i < static_cast<int>(ws.Wk.size()); ++i) {
    if (H_k.cols() != ws.Wk[static_cast<size_t>(i)].rows()) {
      throw InvalidInputError("rates: beamformer/channel dimension mismatch");
    }
    uc.HW.push_back(H_k * ws.Wk[static_cast<size_t>(i)]);
    const ComplexMatrix gram = uc.HW.back() * uc.HW.back().adjoint();
    if (i == k) {
      own = gram;
    } else {
      interference += gram;
    }
  }
  uc.HWc = H_k * ws.Wc;
  uc.Sp = interference;
  uc.Sa = interference + own;
  uc.Sc = uc.Sa + uc.HWc * uc.HWc.adjoint();
  return uc;
}

namespace {

// Shared body of Eqs. (3)-(4): logdet(S_num)/logdet(S_den) difference minus
// the dispersion penalty built on the numerator Gram and S_disp.
double fbl_rate(const ComplexMatrix& S_den, const ComplexMatrix& S_num,
                const ComplexMatrix& S_disp, const ComplexMatrix& gram_sig,
                double eps, int n_block) {
  const HpdMatrix den = HpdMatrix::from(S_den);
  const HpdMatrix num = HpdMatrix::from(S_num);
  const HpdMatrix disp = HpdMatrix::from(S_disp);
  const double shannon = num.logdet() - den.logdet();
  const double v = 2.0 * disp.trace_solve(gram_sig);
  const double penalty =
      inv_q(eps) / std::sqrt(static_cast<double>(n_block)) * std::sqrt(std::max(v, 0.0));
  return shannon - penalty;
}

}  // namespace

double private_rate(const ComplexMatrix& H_k, const BeamformerSet& ws, double sigma2,
                    const FblParams& fbl, int k) {
  const UserCovariances uc = user_covariances(H_k, ws, sigma2, k);
  const ComplexMatrix gram_kk = uc.HW[static_cast<size_t>(k)] *
                                uc.HW[static_cast<size_t>(k)].adjoint();
  return fbl_rate(uc.Sp, uc.Sa, uc.Sa, gram_kk, fbl.eps_p, fbl.n_p);
}

double common_rate(const ComplexMatrix& H_k, const BeamformerSet& ws, double sigma2,
                   const FblParams& fbl, int k) {
  const UserCovariances uc = user_covariances(H_k, ws, sigma2, k);
  const ComplexMatrix gram_c = uc.HWc * uc.HWc.adjoint();
  return fbl_rate(uc.Sa, uc.Sc, uc.Sc, gram_c, fbl.eps_c, fbl.n_c);
}

double common_cap(const RealVector& raw_common_rates) {
  if (raw_common_rates.size() == 0) return 0.0;
  return std::max(0.0, raw_common_rates.minCoeff());
}

double user_power(const BeamformerSet& ws, int k, double P_C, double beta, int K) {
  if (k < 0 || k >= ws.users()) throw InvalidInputError("user_power: bad user index");
  return P_C + beta * (ws.Wc.squaredNorm() / static_cast<double>(K) +
                       ws.Wk[static_cast<size_t>(k)].squaredNorm());
}

double energy_efficiency(double rate, double power) {
  if (!(power > 0.0)) throw InvalidInputError("energy_efficiency: power must be positive");
  return std::max(rate, 0.0) / power;
}

RateReport evaluate(const ChannelSet& cs, const StarRisState& ris,
                    const BeamformerSet& ws, const RealVector& q,
                    const ScenarioConfig& cfg) {
  const int K = cfg.K;
  if (ws.users() != K || q.size() != K) {
    throw InvalidInputError("evaluate: variable sizes do not match config");
  }
  const FblParams fbl = FblParams::from(cfg);
  RateReport rep;
  rep.raw_kp.resize(K);
  rep.raw_kc.resize(K);
  rep.r_kp.resize(K);
  rep.r_kc.resize(K);
  rep.q = q;
  rep.r_k.resize(K);
  rep.p_k.resize(K);
  rep.e_k.resize(K);
  for (int k = 0; k < K; ++k) {
    const ComplexMatrix H_k = compose_channel(cs, ris, k);
    rep.raw_kp(k) = private_rate(H_k, ws, cfg.sigma2, fbl, k);
    rep.raw_kc(k) = common_rate(H_k, ws, cfg.sigma2, fbl, k);
    rep.r_kp(k) = std::max(0.0, rep.raw_kp(k));
    rep.r_kc(k) = std::max(0.0, rep.raw_kc(k));
    if (q(k) < -1e-12) throw ConstraintViolationError("evaluate: negative share");
  }
  rep.common_cap = common_cap(rep.raw_kc);
  if (q.sum() > rep.common_cap + 1e-9) {
    throw ConstraintViolationError("evaluate: shares exceed the common-rate cap");
  }
  for (int k = 0; k < K; ++k) {
    rep.r_k(k) = rep.r_kp(k) + q(k);
    rep.p_k(k) = user_power(ws, k, cfg.P_C, cfg.beta, K);
    rep.e_k(k) = energy_efficiency(rep.r_k(k), rep.p_k(k));
  }
  rep.min_ee = rep.e_k.minCoeff();
  return rep;
}

}  // namespace starrsma
