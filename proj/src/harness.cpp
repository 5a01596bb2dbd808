// SPDX-License-Identifier: Apache-2.0

#include "starrsma/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace starrsma {

using json = nlohmann::ordered_json;

const char* to_string(Scheme s) { return s == Scheme::Rsma ? "rsma" : "tin"; }

const char* to_string(RisWiring m) {
  switch (m) {
    case RisWiring::Star: return "star";
    case RisWiring::Reflect: return "reflect";
    case RisWiring::None: return "none";
    case RisWiring::Random: return "random";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "rsma") return Scheme::Rsma;
  if (s == "tin") return Scheme::Tin;
  throw InvalidInputError("unknown scheme: " + s);
}

RisWiring ris_wiring_from_string(const std::string& s) {
  if (s == "star") return RisWiring::Star;
  if (s == "reflect") return RisWiring::Reflect;
  if (s == "none") return RisWiring::None;
  if (s == "random") return RisWiring::Random;
  throw InvalidInputError("unknown ris_mode: " + s);
}

const char* to_string(SweepVar v) {
  switch (v) {
    case SweepVar::None: return "none";
    case SweepVar::P_C: return "P_C";
    case SweepVar::N: return "n";
    case SweepVar::Eps: return "eps";
    case SweepVar::P: return "P";
  }
  return "unknown";
}

SweepVar sweep_var_from_string(const std::string& s) {
  if (s == "none") return SweepVar::None;
  if (s == "P_C") return SweepVar::P_C;
  if (s == "n") return SweepVar::N;
  if (s == "eps") return SweepVar::Eps;
  if (s == "P") return SweepVar::P;
  throw InvalidInputError("unknown sweep variable: " + s);
}

void ExperimentSpec::validate() const {
  base.validate();
  settings.validate();
  if (trials < 1) throw InvalidInputError("spec: trials must be >= 1");
  if (workers < 1) throw InvalidInputError("spec: workers must be >= 1");
  if (sweep_var != SweepVar::None) {
    if (sweep_values.empty()) throw InvalidInputError("spec: sweep without values");
    for (size_t i = 0; i < sweep_values.size(); ++i) {
      if (!(sweep_values[i] > 0.0)) {
        throw InvalidInputError("spec: sweep values must be positive");
      }
      if (i > 0 && !(sweep_values[i] > sweep_values[i - 1])) {
        throw InvalidInputError("spec: sweep values must be sorted ascending");
      }
    }
  } else if (!sweep_values.empty()) {
    throw InvalidInputError("spec: sweep_values given without sweep_var");
  }
}

BaselineWiring wire_baseline(Scheme scheme, RisWiring mode, const ScenarioConfig& cfg,
                             std::uint64_t trial) {
  BaselineWiring w;
  w.problem.common_enabled = scheme == Scheme::Rsma;
  switch (mode) {
    case RisWiring::Star:
      w.mask = default_mode_mask(cfg.M);
      w.problem.optimize_ris = true;
      break;
    case RisWiring::Reflect:
      w.mask = all_reflect_mask(cfg.M);
      w.problem.optimize_ris = true;
      break;
    case RisWiring::None:
      w.mask = all_reflect_mask(cfg.M);
      w.problem.optimize_ris = false;
      w.fixed_ris = StarRisState::zero(cfg.M, w.mask);
      break;
    case RisWiring::Random: {
      // Random reflective configuration, one draw per trial.
      w.mask = all_reflect_mask(cfg.M);
      w.problem.optimize_ris = false;
      Rng rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL, trial);
      ComplexVector z(cfg.M);
      for (int m = 0; m < cfg.M; ++m) {
        const double phi = 2.0 * 3.141592653589793238462643 * rng.uniform();
        z(m) = Complex(std::cos(phi), std::sin(phi));
      }
      w.fixed_ris = StarRisState::from_active(z, w.mask);
      break;
    }
  }
  return w;
}

ExperimentRunner::ExperimentRunner(ExperimentSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

ScenarioConfig ExperimentRunner::config_for(double sweep_value) const {
  ScenarioConfig cfg = spec_.base;
  switch (spec_.sweep_var) {
    case SweepVar::None: break;
    case SweepVar::P_C: cfg.P_C = sweep_value; break;
    case SweepVar::N:
      cfg.n_c = static_cast<int>(std::lround(sweep_value));
      cfg.n_p = cfg.n_c;
      break;
    case SweepVar::Eps: cfg.eps_total = sweep_value; break;
    case SweepVar::P: cfg.P = sweep_value; break;
  }
  return cfg;
}

namespace {

std::string cell_key(Scheme s, RisWiring m, double v, int trial) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d|%d|%.17g|%d", static_cast<int>(s),
                static_cast<int>(m), v, trial);
  return buf;
}

struct Candidate {
  InitialPoint point;
  double value = 0.0;
};

double candidate_value(const ChannelSet& cs, const InitialPoint& p,
                       const ScenarioConfig& cfg, bool common_enabled) {
  bool feasible = false;
  const RateReport rep =
      evaluate_with_allocation(cs, p.ris, p.ws, cfg, common_enabled, &feasible);
  return feasible ? rep.min_ee : -1.0;
}

// Star-feasible restriction of a wider-mask state: keep coefficients of
// elements whose mode matches, drop the rest.
StarRisState restrict_to_mask(const StarRisState& src, const ModeMask& mask) {
  ComplexVector z = ComplexVector::Zero(src.theta_t.size());
  for (Eigen::Index m = 0; m < z.size(); ++m) {
    const auto mode = mask[static_cast<size_t>(m)];
    const Complex v =
        mode == RisMode::Reflect ? src.theta_r(m) : src.theta_t(m);
    z(m) = v;
  }
  return StarRisState::from_active(z, mask);
}

// RSMA seed from a TIN solution: move a small power fraction into a common
// beamformer pointed along the stacked channels.
InitialPoint rsma_seed_from_tin(const ChannelSet& cs, const SolveResult& tin,
                                const ScenarioConfig& cfg) {
  InitialPoint p;
  p.ris = tin.ris;
  p.ws = tin.ws;
  const double delta = 0.05;
  ComplexMatrix stacked(cfg.K * cfg.N_u, cfg.N_BS);
  for (int k = 0; k < cfg.K; ++k) {
    stacked.middleRows(k * cfg.N_u, cfg.N_u) = compose_channel(cs, tin.ris, k);
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeFullV);
  const int d = std::min(cfg.d_c, cfg.N_BS);
  ComplexMatrix Wc = ComplexMatrix::Zero(cfg.N_BS, cfg.d_c);
  Wc.leftCols(d) = svd.matrixV().leftCols(d);
  const double used = tin.ws.total_power();
  const double budget = std::max(used, 1e-12);
  Wc *= std::sqrt(delta * budget / static_cast<double>(d));
  for (auto& w : p.ws.Wk) w *= std::sqrt(1.0 - delta);
  p.ws.Wc = Wc;
  p.q = RealVector::Zero(cfg.K);
  return p;
}

}  // namespace

// Tasks are partitioned by trial and every cached cell is trial-keyed, so a
// key is only ever computed by one thread; the mutex guards the map itself.
namespace {
std::mutex g_cache_mutex;
}

const SolveResult& ExperimentRunner::solve_cell(Scheme scheme, RisWiring mode,
                                                double sweep_value, int trial) {
  const std::string key = cell_key(scheme, mode, sweep_value, trial);
  {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  SolveResult r = compute_cell(scheme, mode, sweep_value, trial);
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  auto [it, inserted] = cache_.emplace(key, std::move(r));
  return it->second;
}

SolveResult ExperimentRunner::compute_cell(Scheme scheme, RisWiring mode,
                                           double sweep_value, int trial) {
  ScenarioConfig cfg = with_default_geometry(config_for(sweep_value));
  const ChannelSet cs = generate_channels(cfg, static_cast<std::uint64_t>(trial));
  const BaselineWiring wiring = wire_baseline(scheme, mode, cfg, static_cast<std::uint64_t>(trial));

  // Each candidate initial point gets its own AO run; the best final result
  // wins. This keeps every warm-start chain a true lower bound (the chained
  // point is one of the starts) without trapping the solver in the chained
  // basin.
  std::vector<InitialPoint> candidates;
  auto push_candidate = [&](InitialPoint p) {
    p.ws = project_power(p.ws, cfg.P);
    candidates.push_back(std::move(p));
  };

  {
    InitialPoint def = default_initial_point(cs, cfg, wiring.mask, wiring.problem);
    if (wiring.fixed_ris.has_value()) def.ris = *wiring.fixed_ris;
    push_candidate(std::move(def));
  }

  if (spec_.warm_start) {
    if (spec_.sweep_var != SweepVar::None) {
      // Within a sweep, chain each point from its predecessor only.
      auto it = std::find(spec_.sweep_values.begin(), spec_.sweep_values.end(),
                          sweep_value);
      if (it != spec_.sweep_values.end() && it != spec_.sweep_values.begin()) {
        const SolveResult& prev = solve_cell(scheme, mode, *(it - 1), trial);
        InitialPoint p{prev.ws, prev.ris, prev.q};
        push_candidate(std::move(p));
      }
    } else {
      // Ordering chains: random -> reflect -> star within a scheme, and
      // tin -> rsma within a mode.
      if (mode == RisWiring::Reflect) {
        const SolveResult& prev =
            solve_cell(scheme, RisWiring::Random, sweep_value, trial);
        push_candidate(InitialPoint{prev.ws, prev.ris, prev.q});
      } else if (mode == RisWiring::Star) {
        const SolveResult& prev =
            solve_cell(scheme, RisWiring::Reflect, sweep_value, trial);
        InitialPoint p{prev.ws, restrict_to_mask(prev.ris, wiring.mask), prev.q};
        push_candidate(std::move(p));
      }
      if (scheme == Scheme::Rsma) {
        const SolveResult& tin = solve_cell(Scheme::Tin, mode, sweep_value, trial);
        // Exact TIN point (feasible for RSMA) plus a seeded common stream.
        BeamformerSet lifted = tin.ws;
        lifted.Wc = ComplexMatrix::Zero(cfg.N_BS, cfg.d_c);
        push_candidate(InitialPoint{lifted, tin.ris, RealVector::Zero(cfg.K)});
        push_candidate(rsma_seed_from_tin(cs, tin, cfg));
      }
    }
  }

  std::optional<SolveResult> best;
  for (const auto& c : candidates) {
    SolveResult r = optimize(cs, cfg, spec_.settings, wiring.problem, c);
    if (!best.has_value() || r.report.min_ee > best->report.min_ee) {
      best = std::move(r);
    }
  }
  return std::move(*best);
}

std::vector<ResultRow> ExperimentRunner::run() {
  const std::vector<double> values = spec_.sweep_var == SweepVar::None
                                         ? std::vector<double>{0.0}
                                         : spec_.sweep_values;

  // One task per trial; a trial walks its sweep values in order so warm-start
  // chaining stays sequential, and no cache key is shared across threads.
  std::vector<ResultRow> rows(static_cast<size_t>(spec_.trials) * values.size());
  std::mutex next_mtx;
  int next_trial = 0;

  auto worker = [&]() {
    for (;;) {
      int trial;
      {
        std::lock_guard<std::mutex> lock(next_mtx);
        if (next_trial >= spec_.trials) return;
        trial = next_trial++;
      }
      for (size_t vi = 0; vi < values.size(); ++vi) {
        ResultRow row;
        row.sweep_var = to_string(spec_.sweep_var);
        row.sweep_value = values[vi];
        row.trial = trial;
        row.scheme = to_string(spec_.scheme);
        row.ris_mode = to_string(spec_.ris_mode);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const SolveResult& r =
              solve_cell(spec_.scheme, spec_.ris_mode, values[vi], trial);
          row.min_ee_nats = r.report.min_ee;
          row.min_ee_bits = r.report.min_ee / std::log(2.0);
          row.r_k = r.report.r_k;
          row.e_k = r.report.e_k;
          row.iters = r.iterations;
          row.status = to_string(r.status);
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
          row.r_k = RealVector::Zero(spec_.base.K);
          row.e_k = RealVector::Zero(spec_.base.K);
        }
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_ms =
            spec_.include_timing
                ? std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
                : 0;
        rows[static_cast<size_t>(trial) * values.size() + vi] = std::move(row);
      }
    }
  };

  const int n_workers = std::min<int>(spec_.workers, spec_.trials);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    if (a.trial != b.trial) return a.trial < b.trial;
    if (a.scheme != b.scheme) return a.scheme < b.scheme;
    return a.ris_mode < b.ris_mode;
  });
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  ExperimentRunner runner(spec);
  return runner.run();
}

namespace {

std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

double round9(double x) { return std::strtod(fmt9(x).c_str(), nullptr); }

}  // namespace

std::string render_rows(const std::vector<ResultRow>& rows, EmitFormat format) {
  if (format == EmitFormat::Csv) {
    std::ostringstream out;
    out << "sweep_var,sweep_value,trial,scheme,ris_mode,min_ee_nats,min_ee_bits,"
           "iters,status,wall_ms";
    const int K = rows.empty() ? 0 : static_cast<int>(rows.front().r_k.size());
    for (int k = 1; k <= K; ++k) out << ",r_" << k;
    for (int k = 1; k <= K; ++k) out << ",e_" << k;
    out << "\n";
    for (const auto& r : rows) {
      out << r.sweep_var << ',' << fmt9(r.sweep_value) << ',' << r.trial << ','
          << r.scheme << ',' << r.ris_mode << ',' << fmt9(r.min_ee_nats) << ','
          << fmt9(r.min_ee_bits) << ',' << r.iters << ',' << r.status << ','
          << r.wall_ms;
      for (Eigen::Index k = 0; k < r.r_k.size(); ++k) out << ',' << fmt9(r.r_k(k));
      for (Eigen::Index k = 0; k < r.e_k.size(); ++k) out << ',' << fmt9(r.e_k(k));
      out << "\n";
    }
    return out.str();
  }
  json arr = json::array();
  for (const auto& r : rows) {
    json o;
    o["sweep_var"] = r.sweep_var;
    o["sweep_value"] = round9(r.sweep_value);
    o["trial"] = r.trial;
    o["scheme"] = r.scheme;
    o["ris_mode"] = r.ris_mode;
    o["min_ee_nats"] = round9(r.min_ee_nats);
    o["min_ee_bits"] = round9(r.min_ee_bits);
    o["iters"] = r.iters;
    o["status"] = r.status;
    o["wall_ms"] = r.wall_ms;
    json rk = json::array(), ek = json::array();
    for (Eigen::Index k = 0; k < r.r_k.size(); ++k) rk.push_back(round9(r.r_k(k)));
    for (Eigen::Index k = 0; k < r.e_k.size(); ++k) ek.push_back(round9(r.e_k(k)));
    o["r_k"] = rk;
    o["e_k"] = ek;
    arr.push_back(o);
  }
  return arr.dump(2) + "\n";
}

void emit(const std::vector<ResultRow>& rows, const std::string& path,
          EmitFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("emit: cannot open output file " + path);
  out << render_rows(rows, format);
}

namespace {

template <typename T>
T get_number(const json& j, const std::string& key) {
  if (!j.at(key).is_number()) throw InvalidInputError("config: " + key + " must be a number");
  return j.at(key).get<T>();
}

Vec3 get_vec3(const json& j, const std::string& key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw InvalidInputError("config: " + key + " must be [x, y, z]");
  }
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

}  // namespace

ExperimentSpec parse_spec_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw InvalidInputError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInputError("config: top level must be an object");

  static const std::vector<std::string> known = {
      "K", "N_BS", "N_u", "M", "d_c", "d_p", "sigma2", "P", "P_C", "beta", "r_th",
      "n_c", "n_p", "eps_total", "eps_c_fraction", "rice_K", "pl0_dB",
      "exponent_direct", "exponent_ris", "bs_pos", "ris_pos", "user_pos",
      "user_side", "seed", "scheme", "ris_mode", "sweep_var", "sweep_values",
      "trials", "warm_start", "workers", "include_timing", "rho_schedule",
      "mu_schedule", "inner_max_iters", "inner_grad_tol", "ao_rel_tol",
      "ao_max_iters", "armijo_init", "armijo_shrink", "armijo_slope",
      "feasibility_max_iters"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw InvalidInputError("config: unknown key '" + it.key() + "'");
    }
  }

  ExperimentSpec spec;
  auto& cfg = spec.base;
  if (j.contains("K")) cfg.K = get_number<int>(j, "K");
  if (j.contains("N_BS")) cfg.N_BS = get_number<int>(j, "N_BS");
  if (j.contains("N_u")) cfg.N_u = get_number<int>(j, "N_u");
  if (j.contains("M")) cfg.M = get_number<int>(j, "M");
  if (j.contains("d_c")) cfg.d_c = get_number<int>(j, "d_c");
  else cfg.d_c = cfg.N_u;
  if (j.contains("d_p")) cfg.d_p = get_number<int>(j, "d_p");
  else cfg.d_p = cfg.N_u;
  if (j.contains("sigma2")) cfg.sigma2 = get_number<double>(j, "sigma2");
  if (j.contains("P")) cfg.P = get_number<double>(j, "P");
  if (j.contains("P_C")) cfg.P_C = get_number<double>(j, "P_C");
  if (j.contains("beta")) cfg.beta = get_number<double>(j, "beta");
  if (j.contains("r_th")) cfg.r_th = get_number<double>(j, "r_th");
  if (j.contains("n_c")) cfg.n_c = get_number<int>(j, "n_c");
  if (j.contains("n_p")) cfg.n_p = get_number<int>(j, "n_p");
  if (j.contains("eps_total")) cfg.eps_total = get_number<double>(j, "eps_total");
  if (j.contains("eps_c_fraction")) cfg.eps_c_fraction = get_number<double>(j, "eps_c_fraction");
  if (j.contains("rice_K")) cfg.rice_K = get_number<double>(j, "rice_K");
  if (j.contains("pl0_dB")) cfg.pathloss.pl0_dB = get_number<double>(j, "pl0_dB");
  if (j.contains("exponent_direct")) {
    cfg.pathloss.exponent_direct = get_number<double>(j, "exponent_direct");
  }
  if (j.contains("exponent_ris")) {
    cfg.pathloss.exponent_ris = get_number<double>(j, "exponent_ris");
  }
  if (j.contains("bs_pos")) cfg.bs_pos = get_vec3(j, "bs_pos");
  if (j.contains("ris_pos")) cfg.ris_pos = get_vec3(j, "ris_pos");
  if (j.contains("user_pos")) {
    for (const auto& u : j.at("user_pos")) {
      if (!u.is_array() || u.size() != 3) {
        throw InvalidInputError("config: user_pos entries must be [x, y, z]");
      }
      cfg.user_pos.emplace_back(u[0].get<double>(), u[1].get<double>(),
                                u[2].get<double>());
    }
  }
  if (j.contains("user_side")) {
    for (const auto& s : j.at("user_side")) {
      const std::string v = s.get<std::string>();
      if (v == "reflect") cfg.user_side.push_back(UserSide::Reflect);
      else if (v == "transmit") cfg.user_side.push_back(UserSide::Transmit);
      else throw InvalidInputError("config: user_side entries must be reflect|transmit");
    }
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("scheme")) spec.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  if (j.contains("ris_mode")) {
    spec.ris_mode = ris_wiring_from_string(j.at("ris_mode").get<std::string>());
  }
  if (j.contains("sweep_var")) {
    spec.sweep_var = sweep_var_from_string(j.at("sweep_var").get<std::string>());
  }
  if (j.contains("sweep_values")) {
    for (const auto& v : j.at("sweep_values")) spec.sweep_values.push_back(v.get<double>());
  }
  if (j.contains("trials")) spec.trials = get_number<int>(j, "trials");
  if (j.contains("warm_start")) spec.warm_start = j.at("warm_start").get<bool>();
  if (j.contains("workers")) spec.workers = get_number<int>(j, "workers");
  if (j.contains("include_timing")) spec.include_timing = j.at("include_timing").get<bool>();

  auto& st = spec.settings;
  if (j.contains("rho_schedule")) {
    st.rho_schedule = j.at("rho_schedule").get<std::vector<double>>();
  }
  if (j.contains("mu_schedule")) {
    st.mu_schedule = j.at("mu_schedule").get<std::vector<double>>();
  }
  if (j.contains("inner_max_iters")) st.inner_max_iters = get_number<int>(j, "inner_max_iters");
  if (j.contains("inner_grad_tol")) st.inner_grad_tol = get_number<double>(j, "inner_grad_tol");
  if (j.contains("ao_rel_tol")) st.ao_rel_tol = get_number<double>(j, "ao_rel_tol");
  if (j.contains("ao_max_iters")) st.ao_max_iters = get_number<int>(j, "ao_max_iters");
  if (j.contains("armijo_init")) st.armijo_init = get_number<double>(j, "armijo_init");
  if (j.contains("armijo_shrink")) st.armijo_shrink = get_number<double>(j, "armijo_shrink");
  if (j.contains("armijo_slope")) st.armijo_slope = get_number<double>(j, "armijo_slope");
  if (j.contains("feasibility_max_iters")) {
    st.feasibility_max_iters = get_number<int>(j, "feasibility_max_iters");
  }

  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec_json(ss.str());
}

}  // namespace starrsma
