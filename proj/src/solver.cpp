// SPDX-License-Identifier: Apache-2.0

#include "starrsma/solver.hpp"

#include <algorithm>
#include <cmath>

namespace starrsma {

void SolverSettings::validate() const {
  auto increasing = [](const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i) {
      if (!(v[i] > v[i - 1])) return false;
    }
    return !v.empty() && v.front() > 0.0;
  };
  if (!increasing(rho_schedule) || !increasing(mu_schedule)) {
    throw InvalidInputError("settings: schedules must be positive and strictly increasing");
  }
  if (!(armijo_init > 0.0) || !(armijo_shrink > 0.0 && armijo_shrink < 1.0) ||
      !(armijo_slope > 0.0) || !(inner_grad_tol > 0.0) || !(ao_rel_tol > 0.0)) {
    throw InvalidInputError("settings: tolerances must be positive");
  }
  if (inner_max_iters < 1 || ao_max_iters < 1) {
    throw InvalidInputError("settings: iteration limits must be >= 1");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max-iters";
    case SolveStatus::InfeasibleMinRate: return "infeasible-min-rate";
  }
  return "unknown";
}

double softmin(const RealVector& values, double rho) {
  const double m = values.minCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    s += std::exp(-rho * (values(i) - m));
  }
  return m - std::log(s) / rho;
}

RealVector softmin_weights(const RealVector& values, double rho) {
  const double m = values.minCoeff();
  RealVector w(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    w(i) = std::exp(-rho * (values(i) - m));
  }
  w /= w.sum();
  return w;
}

CommonRateAllocation allocate_common_rate(const RealVector& rates,
                                          const RealVector& powers, double cap,
                                          double r_th) {
  const auto K = rates.size();
  if (powers.size() != K || K == 0) {
    throw InvalidInputError("allocate_common_rate: vector sizes");
  }
  if (cap < 0.0) throw InvalidInputError("allocate_common_rate: negative cap");
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(powers(k) > 0.0)) {
      throw InvalidInputError("allocate_common_rate: nonpositive power");
    }
  }

  RealVector q_min(K);
  for (Eigen::Index k = 0; k < K; ++k) q_min(k) = std::max(0.0, r_th - rates(k));

  CommonRateAllocation out;
  if (q_min.sum() > cap + 1e-12) {
    // The minimum-rate floors alone exceed the budget; best effort keeps the
    // cap and scales the floors.
    out.feasible = false;
    out.q = q_min.sum() > 0.0 ? RealVector(q_min * (cap / q_min.sum()))
                              : RealVector(RealVector::Zero(K));
    out.level = ((rates + out.q).array() / powers.array()).minCoeff();
    return out;
  }

  auto shares_at = [&](double t) {
    RealVector q(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      q(k) = std::max(q_min(k), std::max(0.0, t * powers(k) - rates(k)));
    }
    return q;
  };

  double lo = ((rates + q_min).array() / powers.array()).minCoeff();
  double hi = lo + 1.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    hi = std::max(hi, (rates(k) + cap + 1.0) / powers(k));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (shares_at(mid).sum() <= cap) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  // Polish on the final linear piece: with the active set frozen at `lo`,
  // sum_{k active}(t p_k - r_k) + sum_{inactive} floor_k = cap is linear in t.
  double t_star = lo;
  {
    double psum = 0.0, rsum = 0.0, fixed = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double floor_k = std::max(q_min(k), 0.0);
      if (lo * powers(k) - rates(k) >= floor_k - 1e-12) {
        psum += powers(k);
        rsum += rates(k);
      } else {
        fixed += floor_k;
      }
    }
    if (psum > 0.0) {
      const double t = (cap - fixed + rsum) / psum;
      if (t >= lo - 1e-9 && shares_at(t).sum() <= cap + 1e-12) t_star = std::max(t_star, t);
    }
  }

  out.q = shares_at(t_star);
  const double slack = cap - out.q.sum();
  if (slack < 0.0) out.q *= cap / out.q.sum();
  out.level = ((rates + out.q).array() / powers.array()).minCoeff();
  out.feasible = true;
  return out;
}

namespace {

// -------- beamformer-set arithmetic helpers --------

BeamformerSet ws_like(const BeamformerSet& ws) {
  BeamformerSet g;
  g.Wc = ComplexMatrix::Zero(ws.Wc.rows(), ws.Wc.cols());
  g.Wk.reserve(ws.Wk.size());
  for (const auto& w : ws.Wk) g.Wk.push_back(ComplexMatrix::Zero(w.rows(), w.cols()));
  return g;
}

BeamformerSet ws_axpy(const BeamformerSet& x, double a, const BeamformerSet& d) {
  BeamformerSet out = x;
  out.Wc += a * d.Wc;
  for (size_t i = 0; i < out.Wk.size(); ++i) out.Wk[i] += a * d.Wk[i];
  return out;
}

double ws_dot_real(const BeamformerSet& a, const BeamformerSet& b) {
  double s = std::real((a.Wc.conjugate().cwiseProduct(b.Wc)).sum());
  for (size_t i = 0; i < a.Wk.size(); ++i) {
    s += std::real((a.Wk[i].conjugate().cwiseProduct(b.Wk[i])).sum());
  }
  return s;
}

double ws_norm(const BeamformerSet& a) { return std::sqrt(ws_dot_real(a, a)); }

ComplexVector clamp_disk(const ComplexVector& z) {
  ComplexVector out = z;
  for (Eigen::Index m = 0; m < out.size(); ++m) {
    const double mag = std::abs(out(m));
    if (mag > 1.0) out(m) /= mag;
  }
  return out;
}

enum class StageObjective { MaxMinEE, MaxMinRate };

// Lexicographic stage score: constraint violation first, objective second.
struct Score {
  double violation = 0.0;
  double value = 0.0;
  bool better_than(const Score& o) const {
    if (violation < o.violation - 1e-12) return true;
    if (violation > o.violation + 1e-12) return false;
    return value > o.value;
  }
};

RealVector user_powers(const BeamformerSet& ws, const ScenarioConfig& cfg) {
  RealVector p(cfg.K);
  for (int k = 0; k < cfg.K; ++k) p(k) = user_power(ws, k, cfg.P_C, cfg.beta, cfg.K);
  return p;
}

// Fractional objective of a stage point under its own exact q allocation.
// The min-rate phase allocates against unit powers, which makes the
// allocator maximize min_k (r_k + q_k) itself.
Score stage_score(const RealVector& r_p, const RealVector& r_c_or_empty,
                  const RealVector& p, const ScenarioConfig& cfg, bool common_enabled,
                  StageObjective obj, RealVector* q_out) {
  const double cap = common_enabled && r_c_or_empty.size() > 0
                         ? std::max(0.0, r_c_or_empty.minCoeff())
                         : 0.0;
  const RealVector alloc_p =
      obj == StageObjective::MaxMinEE ? p : RealVector(RealVector::Ones(cfg.K));
  const CommonRateAllocation alloc = allocate_common_rate(r_p, alloc_p, cap, cfg.r_th);
  if (q_out != nullptr) *q_out = alloc.q;
  Score s;
  for (int k = 0; k < cfg.K; ++k) {
    s.violation += std::max(0.0, cfg.r_th - (r_p(k) + alloc.q(k)));
  }
  if (obj == StageObjective::MaxMinEE) {
    s.value = ((r_p + alloc.q).array() / p.array()).minCoeff();
  } else {
    s.value = (r_p + alloc.q).minCoeff();
  }
  return s;
}

}  // namespace

StageResult solve_beamforming(const ChannelSet& cs, const StarRisState& ris,
                              const BeamformerSet& ws_j, const RealVector& eta,
                              const ScenarioConfig& cfg, const SolverSettings& settings,
                              const ProblemWiring& wiring, StageObjective obj);

namespace {

struct BfEval {
  RealVector r_p;
  RealVector r_c;  // empty under TIN
  RealVector p;
};

BfEval bf_rates(const BfSurrogate& sur, const BeamformerSet& ws,
                const ScenarioConfig& cfg, bool common_enabled) {
  BfEval e;
  e.r_p.resize(cfg.K);
  e.p.resize(cfg.K);
  if (common_enabled) e.r_c.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    e.r_p(k) = sur.value_private(k, ws);
    e.p(k) = user_power(ws, k, cfg.P_C, cfg.beta, cfg.K);
    if (common_enabled) e.r_c(k) = sur.value_common(k, ws);
  }
  return e;
}

}  // namespace

StageResult solve_beamforming(const ChannelSet& cs, const StarRisState& ris,
                              const BeamformerSet& ws_j, const RealVector& eta,
                              const ScenarioConfig& cfg, const SolverSettings& settings,
                              const ProblemWiring& wiring, StageObjective obj) {
  settings.validate();
  const bool common = wiring.common_enabled;
  const SurrogateConstants consts = build_bf_constants(cs, ris, ws_j, cfg, common);
  const BfSurrogate sur(consts);

  // Smoothed penalized objective; q held fixed during a line search.
  auto eval = [&](const BeamformerSet& ws, const RealVector& q, double rho, double mu,
                  BeamformerSet* grad) {
    const BfEval e = bf_rates(sur, ws, cfg, common);
    RealVector phi(cfg.K);
    RealVector t(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      t(k) = e.r_p(k) + q(k);
      phi(k) = obj == StageObjective::MaxMinEE
                   ? 2.0 * eta(k) * std::sqrt(std::max(0.0, t(k))) -
                         eta(k) * eta(k) * e.p(k)
                   : t(k);
    }
    double F = softmin(phi, rho);
    RealVector rate_viol(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      rate_viol(k) = std::max(0.0, cfg.r_th - t(k));
      F -= mu * rate_viol(k) * rate_viol(k);
    }
    double cap_viol = 0.0;
    if (common) {
      cap_viol = std::max(0.0, q.sum() - softmin(e.r_c, rho));
      F -= mu * cap_viol * cap_viol;
    }
    if (grad != nullptr) {
      *grad = ws_like(ws);
      const RealVector w = softmin_weights(phi, rho);
      for (int k = 0; k < cfg.K; ++k) {
        double rate_coeff = w(k);
        if (obj == StageObjective::MaxMinEE) {
          rate_coeff = t(k) > 0.0 ? w(k) * eta(k) / std::sqrt(t(k)) : 0.0;
          // power term of phi_k
          const double pc = w(k) * eta(k) * eta(k) * cfg.beta;
          grad->Wc -= pc / static_cast<double>(cfg.K) * ws.Wc;
          grad->Wk[static_cast<size_t>(k)] -= pc * ws.Wk[static_cast<size_t>(k)];
        }
        rate_coeff += 2.0 * mu * rate_viol(k);
        if (rate_coeff != 0.0) sur.add_grad_private(k, ws, rate_coeff, *grad);
      }
      if (common && cap_viol > 0.0) {
        const RealVector wc = softmin_weights(e.r_c, rho);
        for (int k = 0; k < cfg.K; ++k) {
          sur.add_grad_common(k, ws, 2.0 * mu * cap_viol * wc(k), *grad);
        }
      }
      if (!common) grad->Wc.setZero();  // Wc pinned under TIN
    }
    return F;
  };

  auto alloc_q = [&](const BeamformerSet& ws, Score* score) {
    const BfEval e = bf_rates(sur, ws, cfg, common);
    RealVector q;
    const Score s = stage_score(e.r_p, e.r_c, e.p, cfg, common, obj, &q);
    if (score != nullptr) *score = s;
    return q;
  };

  Score base_score;
  RealVector base_q = alloc_q(ws_j, &base_score);

  BeamformerSet ws = ws_j;
  RealVector q = base_q;
  const size_t stages = std::max(settings.rho_schedule.size(), settings.mu_schedule.size());
  for (size_t stage = 0; stage < stages; ++stage) {
    const double rho =
        settings.rho_schedule[std::min(stage, settings.rho_schedule.size() - 1)];
    const double mu =
        settings.mu_schedule[std::min(stage, settings.mu_schedule.size() - 1)];
    // Spectral (Barzilai-Borwein) initial step, safeguarded by Armijo below.
    double step_init = settings.armijo_init;
    bool have_prev = false;
    BeamformerSet prev_ws, prev_grad;
    for (int it = 0; it < settings.inner_max_iters; ++it) {
      // Re-allocated shares enter only when they do not decrease the merit;
      // otherwise the cap penalty must first pull the rates back up.
      {
        const RealVector q_new = alloc_q(ws, nullptr);
        if (eval(ws, q_new, rho, mu, nullptr) >= eval(ws, q, rho, mu, nullptr)) {
          q = q_new;
        }
      }
      BeamformerSet grad;
      const double F = eval(ws, q, rho, mu, &grad);
      // projected-gradient mapping as the stationarity measure
      const BeamformerSet probe = project_power(ws_axpy(ws, 1.0, grad), cfg.P);
      const BeamformerSet diff = ws_axpy(probe, -1.0, ws);
      if (ws_norm(diff) <= settings.inner_grad_tol * (1.0 + std::sqrt(ws.total_power()))) {
        break;
      }
      if (have_prev) {
        const BeamformerSet dx = ws_axpy(ws, -1.0, prev_ws);
        const BeamformerSet dg = ws_axpy(grad, -1.0, prev_grad);
        const double dgg = ws_dot_real(dg, dg);
        if (dgg > 0.0) {
          const double bb = std::abs(ws_dot_real(dx, dg)) / dgg;
          if (std::isfinite(bb) && bb > 0.0) {
            step_init = std::clamp(bb, 1e-12, 1e6);
          }
        }
      }
      prev_ws = ws;
      prev_grad = grad;
      have_prev = true;

      double step = step_init;
      bool accepted = false;
      int rejects = 0;
      while (step >= 1e-14) {
        const BeamformerSet cand = project_power(ws_axpy(ws, step, grad), cfg.P);
        const BeamformerSet d = ws_axpy(cand, -1.0, ws);
        const double dir = 2.0 * ws_dot_real(d, grad);
        if (dir <= 0.0) break;
        const double Fc = eval(cand, q, rho, mu, nullptr);
        if (Fc >= F + settings.armijo_slope * dir) {
          if (Fc - F < 1e-12 * (1.0 + std::abs(F))) {
            ws = cand;
            accepted = false;  // plateau; move to the next stage
            break;
          }
          ws = cand;
          accepted = true;
          if (rejects == 0) step_init = step * 2.0;
          break;
        }
        step *= settings.armijo_shrink;
        ++rejects;
      }
      if (!accepted) break;
    }
  }

  Score cand_score;
  RealVector cand_q = alloc_q(ws, &cand_score);

  StageResult res;
  res.ris = ris;
  if (cand_score.better_than(base_score)) {
    res.ws = ws;
    res.q = cand_q;
    res.surrogate_objective = cand_score.value;
    res.improved = true;
  } else {
    res.ws = ws_j;
    res.q = base_q;
    res.surrogate_objective = base_score.value;
    res.improved = false;
  }
  return res;
}

StageResult solve_beamforming(const ChannelSet& cs, const StarRisState& ris,
                              const BeamformerSet& ws_j, const RealVector& eta,
                              const ScenarioConfig& cfg, const SolverSettings& settings,
                              const ProblemWiring& wiring) {
  return solve_beamforming(cs, ris, ws_j, eta, cfg, settings, wiring,
                           StageObjective::MaxMinEE);
}

StageResult solve_ris(const ChannelSet& cs, const BeamformerSet& ws_fixed,
                      const StarRisState& ris_j, const ScenarioConfig& cfg,
                      const SolverSettings& settings, const ProblemWiring& wiring,
                      StageObjective obj);

namespace {

struct RisEval {
  RealVector r_p;
  RealVector r_c;
};

}  // namespace

StageResult solve_ris(const ChannelSet& cs, const BeamformerSet& ws_fixed,
                      const StarRisState& ris_j, const ScenarioConfig& cfg,
                      const SolverSettings& settings, const ProblemWiring& wiring,
                      StageObjective obj) {
  settings.validate();
  const bool common = wiring.common_enabled;
  const SurrogateConstants consts = build_ris_constants(cs, ris_j, ws_fixed, cfg, common);
  const RisSurrogate sur(consts);
  const ModeMask& mask = ris_j.mask;
  const RealVector p = user_powers(ws_fixed, cfg);

  // Channels are evaluated at unclamped z during line searches; from_active
  // would project, so compose manually.
  auto compose_raw = [&](const ComplexVector& z, int k) {
    const bool reflect = cs.side[static_cast<size_t>(k)] == UserSide::Reflect;
    ComplexVector theta = ComplexVector::Zero(z.size());
    for (Eigen::Index m = 0; m < z.size(); ++m) {
      const bool elem_reflect = mask[static_cast<size_t>(m)] == RisMode::Reflect;
      if (elem_reflect == reflect) theta(m) = z(m);
    }
    return ComplexMatrix(cs.Dk[static_cast<size_t>(k)] * theta.asDiagonal() * cs.D +
                         cs.Gk[static_cast<size_t>(k)]);
  };

  auto rates_at = [&](const ComplexVector& z) {
    RisEval e;
    e.r_p.resize(cfg.K);
    if (common) e.r_c.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      const ComplexMatrix H = compose_raw(z, k);
      e.r_p(k) = sur.value_private(k, H);
      if (common) e.r_c(k) = sur.value_common(k, H);
    }
    return e;
  };

  auto mask_side = [&](ComplexVector& g, int k) {
    const bool reflect = cs.side[static_cast<size_t>(k)] == UserSide::Reflect;
    for (Eigen::Index m = 0; m < g.size(); ++m) {
      const bool elem_reflect = mask[static_cast<size_t>(m)] == RisMode::Reflect;
      if (elem_reflect != reflect) g(m) = Complex(0.0, 0.0);
    }
  };

  auto eval = [&](const ComplexVector& z, const RealVector& q, double rho, double mu,
                  ComplexVector* grad) {
    const RisEval e = rates_at(z);
    RealVector phi(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      const double t = e.r_p(k) + q(k);
      phi(k) = obj == StageObjective::MaxMinEE ? t / p(k) : t;
    }
    double F = softmin(phi, rho);
    RealVector rate_viol(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
      rate_viol(k) = std::max(0.0, cfg.r_th - (e.r_p(k) + q(k)));
      F -= mu * rate_viol(k) * rate_viol(k);
    }
    double cap_viol = 0.0;
    if (common) {
      cap_viol = std::max(0.0, q.sum() - softmin(e.r_c, rho));
      F -= mu * cap_viol * cap_viol;
    }
    if (grad != nullptr) {
      grad->setZero(z.size());
      const RealVector w = softmin_weights(phi, rho);
      for (int k = 0; k < cfg.K; ++k) {
        double coeff = obj == StageObjective::MaxMinEE ? w(k) / p(k) : w(k);
        coeff += 2.0 * mu * rate_viol(k);
        if (coeff != 0.0) {
          const ComplexMatrix H = compose_raw(z, k);
          ComplexVector g = chain_grad_to_theta(sur.grad_h_private(k, H), cs, k);
          mask_side(g, k);
          *grad += coeff * g;
        }
      }
      if (common && cap_viol > 0.0) {
        const RealVector wc = softmin_weights(e.r_c, rho);
        for (int k = 0; k < cfg.K; ++k) {
          const ComplexMatrix H = compose_raw(z, k);
          ComplexVector g = chain_grad_to_theta(sur.grad_h_common(k, H), cs, k);
          mask_side(g, k);
          *grad += 2.0 * mu * cap_viol * wc(k) * g;
        }
      }
    }
    return F;
  };

  auto alloc_q = [&](const ComplexVector& z, Score* score) {
    const RisEval e = rates_at(z);
    RealVector q;
    const Score s = stage_score(e.r_p, e.r_c, p, cfg, common, obj, &q);
    if (score != nullptr) *score = s;
    return q;
  };

  ComplexVector z0 = ris_j.active();
  Score base_score;
  RealVector base_q = alloc_q(z0, &base_score);

  ComplexVector z = z0;
  RealVector q = base_q;
  const size_t stages = std::max(settings.rho_schedule.size(), settings.mu_schedule.size());
  for (size_t stage = 0; stage < stages; ++stage) {
    const double rho =
        settings.rho_schedule[std::min(stage, settings.rho_schedule.size() - 1)];
    const double mu =
        settings.mu_schedule[std::min(stage, settings.mu_schedule.size() - 1)];
    double step_init = settings.armijo_init;
    bool have_prev = false;
    ComplexVector prev_z, prev_grad;
    for (int it = 0; it < settings.inner_max_iters; ++it) {
      {
        const RealVector q_new = alloc_q(z, nullptr);
        if (eval(z, q_new, rho, mu, nullptr) >= eval(z, q, rho, mu, nullptr)) {
          q = q_new;
        }
      }
      ComplexVector grad;
      const double F = eval(z, q, rho, mu, &grad);
      const ComplexVector probe = clamp_disk(z + grad);
      if ((probe - z).norm() <= settings.inner_grad_tol * (1.0 + z.norm())) break;
      if (have_prev) {
        const ComplexVector dx = z - prev_z;
        const ComplexVector dg = grad - prev_grad;
        const double dgg = std::real(dg.dot(dg));
        if (dgg > 0.0) {
          const double bb = std::abs(std::real(dx.dot(dg))) / dgg;
          if (std::isfinite(bb) && bb > 0.0) {
            step_init = std::clamp(bb, 1e-12, 1e6);
          }
        }
      }
      prev_z = z;
      prev_grad = grad;
      have_prev = true;

      double step = step_init;
      bool accepted = false;
      int rejects = 0;
      while (step >= 1e-14) {
        const ComplexVector cand = clamp_disk(z + step * grad);
        const ComplexVector d = cand - z;
        const double dir = 2.0 * std::real(d.dot(grad));  // d.dot = conj(d).grad
        if (dir <= 0.0) break;
        const double Fc = eval(cand, q, rho, mu, nullptr);
        if (Fc >= F + settings.armijo_slope * dir) {
          if (Fc - F < 1e-12 * (1.0 + std::abs(F))) {
            z = cand;
            accepted = false;
            break;
          }
          z = cand;
          accepted = true;
          if (rejects == 0) step_init = step * 2.0;
          break;
        }
        step *= settings.armijo_shrink;
        ++rejects;
      }
      if (!accepted) break;
    }
  }

  Score cand_score;
  RealVector cand_q = alloc_q(z, &cand_score);

  StageResult res;
  res.ws = ws_fixed;
  if (cand_score.better_than(base_score)) {
    res.ris = StarRisState::from_active(clamp_disk(z), mask);
    res.q = cand_q;
    res.surrogate_objective = cand_score.value;
    res.improved = true;
  } else {
    res.ris = ris_j;
    res.q = base_q;
    res.surrogate_objective = base_score.value;
    res.improved = false;
  }
  return res;
}

StageResult solve_ris(const ChannelSet& cs, const BeamformerSet& ws_fixed,
                      const StarRisState& ris_j, const ScenarioConfig& cfg,
                      const SolverSettings& settings, const ProblemWiring& wiring) {
  return solve_ris(cs, ws_fixed, ris_j, cfg, settings, wiring, StageObjective::MaxMinEE);
}

InitialPoint default_initial_point(const ChannelSet& cs, const ScenarioConfig& cfg,
                                   const ModeMask& mask, const ProblemWiring& wiring) {
  InitialPoint init;

  // RIS: unit-magnitude coefficients, each element phase-aligned with the
  // direct channel of the first user on its side.
  const int M = cfg.M;
  ComplexVector z(M);
  for (int m = 0; m < M; ++m) {
    const UserSide served = mask[static_cast<size_t>(m)] == RisMode::Reflect
                                ? UserSide::Reflect
                                : UserSide::Transmit;
    int u = -1;
    for (int k = 0; k < cfg.K; ++k) {
      if (cs.side[static_cast<size_t>(k)] == served) {
        u = k;
        break;
      }
    }
    if (u < 0) {
      z(m) = Complex(1.0, 0.0);
      continue;
    }
    const Complex t = (cs.D.row(m) * cs.Gk[static_cast<size_t>(u)].adjoint() *
                       cs.Dk[static_cast<size_t>(u)].col(m))(0, 0);
    const double mag = std::abs(t);
    z(m) = mag > 0.0 ? Complex(std::conj(t / mag)) : Complex(1.0, 0.0);
  }
  init.ris = StarRisState::from_active(z, mask);

  // Beamformers: matched filter (dominant right singular vectors of the
  // composed channel), equal power per message.
  const int messages = wiring.common_enabled ? cfg.K + 1 : cfg.K;
  const double per_message = cfg.P / static_cast<double>(messages);
  init.ws.Wk.reserve(cfg.K);
  ComplexMatrix stacked(cfg.K * cfg.N_u, cfg.N_BS);
  for (int k = 0; k < cfg.K; ++k) {
    const ComplexMatrix H = compose_channel(cs, init.ris, k);
    stacked.middleRows(k * cfg.N_u, cfg.N_u) = H;
    Eigen::JacobiSVD<ComplexMatrix> svd(H, Eigen::ComputeFullV);
    const int d = std::min(cfg.d_p, cfg.N_BS);
    ComplexMatrix W = ComplexMatrix::Zero(cfg.N_BS, cfg.d_p);
    W.leftCols(d) = svd.matrixV().leftCols(d);
    W *= std::sqrt(per_message / static_cast<double>(d));
    init.ws.Wk.push_back(W);
  }
  init.ws.Wc = ComplexMatrix::Zero(cfg.N_BS, cfg.d_c);
  if (wiring.common_enabled) {
    Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeFullV);
    const int d = std::min(cfg.d_c, cfg.N_BS);
    init.ws.Wc.leftCols(d) = svd.matrixV().leftCols(d);
    init.ws.Wc *= std::sqrt(per_message / static_cast<double>(d));
  }
  init.ws = project_power(init.ws, cfg.P);
  init.q = RealVector::Zero(cfg.K);
  return init;
}

// Allocation against raw true rates so the min-rate constraint is honest;
// the reported objective uses clamped rates on top of the same q.
RateReport evaluate_with_allocation(const ChannelSet& cs, const StarRisState& ris,
                                    const BeamformerSet& ws, const ScenarioConfig& cfg,
                                    bool common_enabled, bool* feasible) {
  const FblParams fbl = FblParams::from(cfg);
  RealVector raw_p(cfg.K), raw_c(cfg.K), p(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const ComplexMatrix H = compose_channel(cs, ris, k);
    raw_p(k) = private_rate(H, ws, cfg.sigma2, fbl, k);
    raw_c(k) = common_enabled ? common_rate(H, ws, cfg.sigma2, fbl, k) : 0.0;
    p(k) = user_power(ws, k, cfg.P_C, cfg.beta, cfg.K);
  }
  const double cap = common_enabled ? common_cap(raw_c) : 0.0;
  const CommonRateAllocation alloc = allocate_common_rate(raw_p, p, cap, cfg.r_th);
  if (feasible != nullptr) {
    *feasible = alloc.feasible &&
                ((raw_p + alloc.q).array() >= cfg.r_th - 1e-6).all();
  }
  return evaluate(cs, ris, ws, alloc.q, cfg);
}

SolveResult optimize(const ChannelSet& cs, const ScenarioConfig& cfg,
                     const SolverSettings& settings, const ProblemWiring& wiring,
                     const std::optional<InitialPoint>& init) {
  settings.validate();
  cfg.validate();

  InitialPoint point = init.has_value()
                           ? *init
                           : default_initial_point(cs, cfg, default_mode_mask(cfg.M), wiring);
  point.ws = project_power(point.ws, cfg.P);

  SolveResult res;
  res.ws = point.ws;
  res.ris = point.ris;

  bool feasible = false;
  RateReport report = evaluate_with_allocation(cs, res.ris, res.ws, cfg,
                                           wiring.common_enabled, &feasible);

  // Feasibility phase: push min_k (r_pk + q_k) above the threshold before
  // optimizing EE.
  for (int round = 0; !feasible && round < settings.feasibility_max_iters; ++round) {
    const RealVector eta = RealVector::Zero(cfg.K);
    StageResult bf = solve_beamforming(cs, res.ris, res.ws, eta, cfg, settings, wiring,
                                       StageObjective::MaxMinRate);
    res.ws = bf.ws;
    if (wiring.optimize_ris) {
      StageResult rs = solve_ris(cs, res.ws, res.ris, cfg, settings, wiring,
                                 StageObjective::MaxMinRate);
      res.ris = rs.ris;
    }
    report = evaluate_with_allocation(cs, res.ris, res.ws, cfg, wiring.common_enabled,
                                  &feasible);
  }
  if (!feasible) {
    res.status = SolveStatus::InfeasibleMinRate;
    res.report = report;
    res.q = report.q;
    res.trajectory = {report.min_ee};
    return res;
  }

  res.trajectory.push_back(report.min_ee);
  res.status = SolveStatus::MaxIters;
  int slow_iters = 0;
  for (int j = 0; j < settings.ao_max_iters; ++j) {
    res.iterations = j + 1;
    const RealVector eta = update_eta(report);

    StageResult bf = solve_beamforming(cs, res.ris, res.ws, eta, cfg, settings, wiring,
                                       StageObjective::MaxMinEE);
    BeamformerSet ws_next = bf.ws;
    StarRisState ris_next = res.ris;
    if (wiring.optimize_ris) {
      StageResult rs = solve_ris(cs, ws_next, res.ris, cfg, settings, wiring,
                                 StageObjective::MaxMinEE);
      ris_next = rs.ris;
    }

    bool still_feasible = false;
    RateReport next = evaluate_with_allocation(cs, ris_next, ws_next, cfg,
                                           wiring.common_enabled, &still_feasible);

    // Monotone by construction; guard against round-off regressions anyway.
    if (next.min_ee < report.min_ee - 1e-15) {
      res.status = SolveStatus::Converged;
      break;
    }
    res.ws = ws_next;
    res.ris = ris_next;
    const double prev = report.min_ee;
    report = next;
    res.trajectory.push_back(report.min_ee);
    // A single slow iteration can precede real progress (fresh eta and
    // expansion points); stop only after two in a row.
    if (report.min_ee - prev <= settings.ao_rel_tol * std::max(std::abs(prev), 1e-12)) {
      if (++slow_iters >= 2) {
        res.status = SolveStatus::Converged;
        break;
      }
    } else {
      slow_iters = 0;
    }
  }

  res.report = report;
  res.q = report.q;
  return res;
}

}  // namespace starrsma
