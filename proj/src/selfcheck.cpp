// SPDX-License-Identifier: Apache-2.0
//
// Fast oracle and property checks behind the `check` CLI subcommand. The full
// suites live under tests/; these are the quick desk checks.

#include <cmath>
#include <sstream>

#include "starrsma/harness.hpp"

namespace starrsma {

namespace {

// Independent Q^{-1} oracle: bisection on Q built from erfc.
double inv_q_bisect(double eps) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (q_function(mid) > eps) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double scalar_private_rate(double sig, double interf, double sigma2, double eps,
                           int n) {
  const double shannon = std::log(1.0 + sig / (sigma2 + interf));
  const double v = 2.0 * sig / (sigma2 + interf + sig);
  return shannon - inv_q(eps) / std::sqrt(static_cast<double>(n)) * std::sqrt(v);
}

ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.K = 2;
  cfg.M = 4;
  cfg.n_c = cfg.n_p = 256;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

std::vector<CheckResult> run_self_checks() {
  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    out.push_back({name, pass, detail});
  };

  {
    bool ok = true;
    std::ostringstream d;
    for (double eps : {1e-2, 1e-5, 5e-6, 1e-9}) {
      const double err = std::abs(q_function(inv_q(eps)) - eps) / eps;
      const double ref_err = std::abs(inv_q(eps) - inv_q_bisect(eps));
      if (err > 1e-8 || ref_err > 1e-9) ok = false;
      d << eps << ":" << err << " ";
    }
    add("inv-q roundtrip", ok, d.str());
  }

  {
    // Scalar FBL worked examples against the closed form.
    BeamformerSet ws;
    ws.Wc = ComplexMatrix::Zero(1, 1);
    ws.Wk = {ComplexMatrix::Constant(1, 1, Complex(1.0, 0.0))};
    ComplexMatrix H = ComplexMatrix::Identity(1, 1);
    FblParams fbl;
    fbl.n_p = 256;
    fbl.eps_p = 5e-6;
    const double got = private_rate(H, ws, 1.0, fbl, 0);
    const double want = scalar_private_rate(1.0, 0.0, 1.0, 5e-6, 256);
    const bool ok = std::abs(got - want) < 1e-12;
    std::ostringstream d;
    d << "got " << got << " want " << want;
    add("fbl scalar oracle", ok, d.str());
  }

  {
    RealVector r(2), p(2);
    r << 0.2, 0.4;
    p << 1.0, 1.0;
    const auto a = allocate_common_rate(r, p, 0.3, 0.0);
    const bool ok = std::abs(a.q(0) - 0.25) < 1e-8 && std::abs(a.q(1) - 0.05) < 1e-8 &&
                    std::abs(a.level - 0.45) < 1e-8;
    std::ostringstream d;
    d << "q = (" << a.q(0) << ", " << a.q(1) << "), level " << a.level;
    add("common-rate allocation", ok, d.str());
  }

  {
    RealVector v(3);
    v << 0.5, 0.3, 0.4;
    bool ok = true;
    for (double rho : {10.0, 100.0, 1000.0}) {
      const double s = softmin(v, rho);
      if (!(s <= 0.3 + 1e-12 && s >= 0.3 - std::log(3.0) / rho - 1e-12)) ok = false;
    }
    add("softmin bound", ok, "");
  }

  {
    // Surrogate tightness on one random desk scenario.
    ScenarioConfig cfg = with_default_geometry(tiny_config());
    const ChannelSet cs = generate_channels(cfg, 0);
    const ModeMask mask = default_mode_mask(cfg.M);
    ProblemWiring wiring;
    const InitialPoint init = default_initial_point(cs, cfg, mask, wiring);
    const SurrogateConstants consts =
        build_bf_constants(cs, init.ris, init.ws, cfg, true);
    const BfSurrogate sur(consts);
    const FblParams fbl = FblParams::from(cfg);
    double worst = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
      const ComplexMatrix H = compose_channel(cs, init.ris, k);
      worst = std::max(worst, std::abs(sur.value_private(k, init.ws) -
                                       private_rate(H, init.ws, cfg.sigma2, fbl, k)));
      worst = std::max(worst, std::abs(sur.value_common(k, init.ws) -
                                       common_rate(H, init.ws, cfg.sigma2, fbl, k)));
    }
    std::ostringstream d;
    d << "max |surrogate - rate| at expansion = " << worst;
    add("surrogate tightness", worst < 1e-6, d.str());
  }

  {
    // One small AO run: trajectory must be nondecreasing.
    ScenarioConfig cfg = with_default_geometry(tiny_config());
    const ChannelSet cs = generate_channels(cfg, 0);
    SolverSettings st;
    st.ao_max_iters = 6;
    st.inner_max_iters = 60;
    ProblemWiring wiring;
    const SolveResult res = optimize(cs, cfg, st, wiring);
    bool ok = res.trajectory.size() >= 2;
    for (size_t i = 1; i < res.trajectory.size(); ++i) {
      if (res.trajectory[i] < res.trajectory[i - 1] - 1e-9) ok = false;
    }
    std::ostringstream d;
    d << "min-EE " << (res.trajectory.empty() ? 0.0 : res.trajectory.back()) << " after "
      << res.iterations << " iterations";
    add("ao monotone trajectory", ok, d.str());
  }

  {
    // Projection idempotence.
    ComplexVector theta(4);
    theta << Complex(0.5, 0.5), Complex(2.0, 0.0), Complex(0.0, -3.0), Complex(1.0, 0.0);
    const ModeMask mask = default_mode_mask(4);
    const ComplexVector p1 = project_unit_disk(theta, mask, RisMode::Transmit);
    const ComplexVector p2 = project_unit_disk(p1, mask, RisMode::Transmit);
    bool ok = (p1 - p2).norm() == 0.0;
    for (Eigen::Index m = 0; m < p1.size(); ++m) {
      if (mask[static_cast<size_t>(m)] != RisMode::Transmit &&
          p1(m) != Complex(0.0, 0.0)) {
        ok = false;
      }
      if (std::abs(p1(m)) > 1.0 + 1e-15) ok = false;
    }
    add("unit-disk projection", ok, "");
  }

  return out;
}

}  // namespace starrsma
