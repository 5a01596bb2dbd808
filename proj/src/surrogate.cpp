// SPDX-License-Identifier: Apache-2.0

#include "starrsma/surrogate.hpp"

#include <cmath>

namespace starrsma {

namespace {

constexpr double kDegenerateV = 1e-14;

struct BoundParts {
  double a = 0.0;
  ComplexMatrix A_sig;
  std::vector<ComplexMatrix> A_cross;
  ComplexMatrix B;
  double v = 0.0;
  bool degenerate = false;
};

// One rate bound around (Hbar, Wbar). S_den is the interference-plus-noise
// covariance of the decoded stream, S_all = S_den + gram(signal); cross_HW
// lists H W_i for the streams whose Grams vary inside the dispersion
// denominator (the signal's own Gram enters only through the B quadratic).
//
// The dispersion constant uses the exact linearization value
// N_u - 2 sigma^2 tr(S_all^{-1}) so the bound is tight at the expansion
// point; it is a global lower bound by joint convexity of tr(X Y^{-1}).
BoundParts build_bound(const ComplexMatrix& S_den_m, const ComplexMatrix& S_all_m,
                       const ComplexMatrix& HW_sig,
                       const std::vector<const ComplexMatrix*>& cross_HW,
                       double sigma2, double eps, int n_block, int I_rank) {
  const auto N_u = S_den_m.rows();
  const HpdMatrix S_den = HpdMatrix::from(S_den_m);
  const HpdMatrix S_all = HpdMatrix::from(S_all_m);

  const ComplexMatrix gram_sig = HW_sig * HW_sig.adjoint();
  const double q_inv = inv_q(eps);
  const double sqrt_n = std::sqrt(static_cast<double>(n_block));

  BoundParts out;
  out.v = 2.0 * S_all.trace_solve(gram_sig);
  out.degenerate = !(out.v > kDegenerateV);

  const double shannon_logdet = S_all.logdet() - S_den.logdet();
  const double tr_den_sig = S_den.trace_solve(gram_sig);

  const ComplexMatrix inv_den = S_den.solve(ComplexMatrix::Identity(N_u, N_u));
  const ComplexMatrix inv_all = S_all.solve(ComplexMatrix::Identity(N_u, N_u));

  out.A_sig = S_den.solve(HW_sig);
  out.A_cross.resize(cross_HW.size());

  if (out.degenerate) {
    // Zero signal at the expansion point: keep the Shannon bound, replace the
    // dispersion by its worst-case constant -Q^{-1}(eps)/sqrt(n)*sqrt(2 I).
    out.a = shannon_logdet - tr_den_sig -
            q_inv / sqrt_n * std::sqrt(2.0 * static_cast<double>(I_rank));
    out.B = 0.5 * ((inv_den - inv_all) + (inv_den - inv_all).adjoint());
    for (size_t i = 0; i < cross_HW.size(); ++i) {
      if (cross_HW[i] != nullptr) {
        out.A_cross[i] = ComplexMatrix::Zero(N_u, cross_HW[i]->cols());
      }
    }
    return out;
  }

  const double c = q_inv / (sqrt_n * std::sqrt(out.v));
  out.a = shannon_logdet - tr_den_sig - q_inv / (2.0 * sqrt_n) * std::sqrt(out.v) -
          c * (static_cast<double>(N_u) - 2.0 * sigma2 * S_all.trace_inverse());

  ComplexMatrix B = (inv_den - inv_all) + c * (inv_all * S_den_m * inv_all);
  out.B = 0.5 * (B + B.adjoint());

  for (size_t i = 0; i < cross_HW.size(); ++i) {
    if (cross_HW[i] != nullptr) {
      out.A_cross[i] = c * S_all.solve(*cross_HW[i]);
    }
  }
  return out;
}

}  // namespace

SurrogateConstants build_constants(const std::vector<ComplexMatrix>& Hbar,
                                   const BeamformerSet& ws_bar,
                                   const ScenarioConfig& cfg, bool common_enabled) {
  const int K = cfg.K;
  if (static_cast<int>(Hbar.size()) != K || ws_bar.users() != K) {
    throw InvalidInputError("surrogate: channel/beamformer counts do not match config");
  }
  SurrogateConstants sc;
  sc.Hbar = Hbar;
  sc.Wbar = ws_bar;
  sc.sigma2 = cfg.sigma2;
  sc.fbl = FblParams::from(cfg);
  sc.I_rank = std::min(cfg.N_BS, cfg.N_u);
  sc.common_enabled = common_enabled;
  sc.users.resize(static_cast<size_t>(K));

  for (int k = 0; k < K; ++k) {
    const UserCovariances uc = user_covariances(Hbar[static_cast<size_t>(k)], ws_bar,
                                                cfg.sigma2, k);
    auto& u = sc.users[static_cast<size_t>(k)];

    {
      std::vector<const ComplexMatrix*> cross(static_cast<size_t>(K), nullptr);
      for (int i = 0; i < K; ++i) {
        if (i != k) cross[static_cast<size_t>(i)] = &uc.HW[static_cast<size_t>(i)];
      }
      BoundParts p = build_bound(uc.Sp, uc.Sa, uc.HW[static_cast<size_t>(k)], cross,
                                 cfg.sigma2, sc.fbl.eps_p, sc.fbl.n_p, sc.I_rank);
      u.a_p = p.a;
      u.A_sig_p = std::move(p.A_sig);
      u.A_cross_p = std::move(p.A_cross);
      u.B_p = std::move(p.B);
      u.v_p = p.v;
      u.degenerate_p = p.degenerate;
    }

    if (common_enabled) {
      std::vector<const ComplexMatrix*> cross(static_cast<size_t>(K), nullptr);
      for (int i = 0; i < K; ++i) {
        cross[static_cast<size_t>(i)] = &uc.HW[static_cast<size_t>(i)];
      }
      BoundParts p = build_bound(uc.Sa, uc.Sc, uc.HWc, cross, cfg.sigma2, sc.fbl.eps_c,
                                 sc.fbl.n_c, sc.I_rank);
      u.a_c = p.a;
      u.A_sig_c = std::move(p.A_sig);
      u.A_cross_c = std::move(p.A_cross);
      u.B_c = std::move(p.B);
      u.v_c = p.v;
      u.degenerate_c = p.degenerate;
    }
  }
  return sc;
}

SurrogateConstants build_bf_constants(const ChannelSet& cs, const StarRisState& ris,
                                      const BeamformerSet& ws_bar,
                                      const ScenarioConfig& cfg, bool common_enabled) {
  return build_constants(compose_all(cs, ris), ws_bar, cfg, common_enabled);
}

SurrogateConstants build_ris_constants(const ChannelSet& cs, const StarRisState& ris_bar,
                                       const BeamformerSet& ws_fixed,
                                       const ScenarioConfig& cfg, bool common_enabled) {
  return build_constants(compose_all(cs, ris_bar), ws_fixed, cfg, common_enabled);
}

BfSurrogate::BfSurrogate(const SurrogateConstants& consts) : consts_(&consts) {
  const int K = static_cast<int>(consts.users.size());
  cache_.resize(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& u = consts.users[static_cast<size_t>(k)];
    const auto& H = consts.Hbar[static_cast<size_t>(k)];
    auto& c = cache_[static_cast<size_t>(k)];
    c.L_sig_p = H.adjoint() * u.A_sig_p;
    c.L_cross_p.resize(static_cast<size_t>(K));
    for (int i = 0; i < K; ++i) {
      if (i != k) c.L_cross_p[static_cast<size_t>(i)] =
          H.adjoint() * u.A_cross_p[static_cast<size_t>(i)];
    }
    c.C_p = H.adjoint() * u.B_p * H;
    c.const_p = u.a_p - consts.sigma2 * std::real(u.B_p.trace());
    if (consts.common_enabled) {
      c.L_sig_c = H.adjoint() * u.A_sig_c;
      c.L_cross_c.resize(static_cast<size_t>(K));
      for (int i = 0; i < K; ++i) {
        c.L_cross_c[static_cast<size_t>(i)] =
            H.adjoint() * u.A_cross_c[static_cast<size_t>(i)];
      }
      c.C_c = H.adjoint() * u.B_c * H;
      c.const_c = u.a_c - consts.sigma2 * std::real(u.B_c.trace());
    }
  }
}

double BfSurrogate::value_private(int k, const BeamformerSet& ws) const {
  const auto& c = cache_[static_cast<size_t>(k)];
  double val = c.const_p;
  val += 2.0 * std::real((ws.Wk[static_cast<size_t>(k)].adjoint() * c.L_sig_p).trace());
  for (int i = 0; i < ws.users(); ++i) {
    const auto& Wi = ws.Wk[static_cast<size_t>(i)];
    if (i != k) {
      val += 2.0 * std::real(
          (Wi.adjoint() * c.L_cross_p[static_cast<size_t>(i)]).trace());
    }
    val -= std::real((Wi.adjoint() * c.C_p * Wi).trace());
  }
  return val;
}

double BfSurrogate::value_common(int k, const BeamformerSet& ws) const {
  const auto& c = cache_[static_cast<size_t>(k)];
  double val = c.const_c;
  val += 2.0 * std::real((ws.Wc.adjoint() * c.L_sig_c).trace());
  val -= std::real((ws.Wc.adjoint() * c.C_c * ws.Wc).trace());
  for (int i = 0; i < ws.users(); ++i) {
    const auto& Wi = ws.Wk[static_cast<size_t>(i)];
    val += 2.0 * std::real((Wi.adjoint() * c.L_cross_c[static_cast<size_t>(i)]).trace());
    val -= std::real((Wi.adjoint() * c.C_c * Wi).trace());
  }
  return val;
}

void BfSurrogate::add_grad_private(int k, const BeamformerSet& ws, double coeff,
                                   BeamformerSet& grad) const {
  const auto& c = cache_[static_cast<size_t>(k)];
  for (int i = 0; i < ws.users(); ++i) {
    const auto& Wi = ws.Wk[static_cast<size_t>(i)];
    if (i == k) {
      grad.Wk[static_cast<size_t>(i)] += coeff * (c.L_sig_p - c.C_p * Wi);
    } else {
      grad.Wk[static_cast<size_t>(i)] +=
          coeff * (c.L_cross_p[static_cast<size_t>(i)] - c.C_p * Wi);
    }
  }
}

void BfSurrogate::add_grad_common(int k, const BeamformerSet& ws, double coeff,
                                  BeamformerSet& grad) const {
  const auto& c = cache_[static_cast<size_t>(k)];
  grad.Wc += coeff * (c.L_sig_c - c.C_c * ws.Wc);
  for (int i = 0; i < ws.users(); ++i) {
    grad.Wk[static_cast<size_t>(i)] +=
        coeff * (c.L_cross_c[static_cast<size_t>(i)] - c.C_c * ws.Wk[static_cast<size_t>(i)]);
  }
}

RisSurrogate::RisSurrogate(const SurrogateConstants& consts) : consts_(&consts) {
  const int K = static_cast<int>(consts.users.size());
  const auto& ws = consts.Wbar;
  ComplexMatrix P_w = ComplexMatrix::Zero(ws.Wk[0].rows(), ws.Wk[0].rows());
  for (const auto& w : ws.Wk) P_w += w * w.adjoint();
  const ComplexMatrix P_wc = P_w + ws.Wc * ws.Wc.adjoint();

  cache_.resize(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& u = consts.users[static_cast<size_t>(k)];
    auto& c = cache_[static_cast<size_t>(k)];
    c.P_w = P_w;
    c.P_wc = P_wc;
    c.M_p = u.A_sig_p * ws.Wk[static_cast<size_t>(k)].adjoint();
    for (int i = 0; i < K; ++i) {
      if (i != k) {
        c.M_p += u.A_cross_p[static_cast<size_t>(i)] * ws.Wk[static_cast<size_t>(i)].adjoint();
      }
    }
    c.trB_p = std::real(u.B_p.trace());
    if (consts.common_enabled) {
      c.M_c = u.A_sig_c * ws.Wc.adjoint();
      for (int i = 0; i < K; ++i) {
        c.M_c += u.A_cross_c[static_cast<size_t>(i)] * ws.Wk[static_cast<size_t>(i)].adjoint();
      }
      c.trB_c = std::real(u.B_c.trace());
    }
  }
}

double RisSurrogate::value_private(int k, const ComplexMatrix& H_k) const {
  const auto& u = consts_->users[static_cast<size_t>(k)];
  const auto& c = cache_[static_cast<size_t>(k)];
  double val = u.a_p - consts_->sigma2 * c.trB_p;
  val += 2.0 * std::real((c.M_p * H_k.adjoint()).trace());
  val -= std::real((H_k.adjoint() * u.B_p * H_k * c.P_w).trace());
  return val;
}

double RisSurrogate::value_common(int k, const ComplexMatrix& H_k) const {
  const auto& u = consts_->users[static_cast<size_t>(k)];
  const auto& c = cache_[static_cast<size_t>(k)];
  double val = u.a_c - consts_->sigma2 * c.trB_c;
  val += 2.0 * std::real((c.M_c * H_k.adjoint()).trace());
  val -= std::real((H_k.adjoint() * u.B_c * H_k * c.P_wc).trace());
  return val;
}

ComplexMatrix RisSurrogate::grad_h_private(int k, const ComplexMatrix& H_k) const {
  const auto& u = consts_->users[static_cast<size_t>(k)];
  const auto& c = cache_[static_cast<size_t>(k)];
  return c.M_p - u.B_p * H_k * c.P_w;
}

ComplexMatrix RisSurrogate::grad_h_common(int k, const ComplexMatrix& H_k) const {
  const auto& u = consts_->users[static_cast<size_t>(k)];
  const auto& c = cache_[static_cast<size_t>(k)];
  return c.M_c - u.B_c * H_k * c.P_wc;
}

ComplexVector chain_grad_to_theta(const ComplexMatrix& grad_H, const ChannelSet& cs,
                                  int k) {
  // d H / d theta_m is the rank-one product (D_k column m)(D row m); the
  // cogradient entry is conj(diag(D grad_H^H D_k)).
  const ComplexMatrix X = cs.D * grad_H.adjoint();              // M x N_u
  const ComplexMatrix DkT = cs.Dk[static_cast<size_t>(k)].transpose();  // M x N_u
  ComplexVector u = (X.cwiseProduct(DkT)).rowwise().sum();
  return u.conjugate();
}

RealVector update_eta(const RateReport& report) {
  RealVector eta(report.r_k.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    if (!(report.p_k(k) > 0.0)) throw InvalidInputError("update_eta: nonpositive power");
    eta(k) = std::sqrt(std::max(0.0, report.r_k(k))) / report.p_k(k);
  }
  return eta;
}

}  // namespace starrsma
