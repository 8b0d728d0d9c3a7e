#pragma once

// End-to-end runs: surface document -> embedding -> flows -> mass report.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qlm/embedding.hpp"
#include "qlm/errors.hpp"
#include "qlm/flows.hpp"
#include "qlm/foliation.hpp"
#include "qlm/mass.hpp"
#include "qlm/report.hpp"
#include "qlm/spinor.hpp"
#include "qlm/surface.hpp"

namespace qlm {

struct RunConfig {
  std::string command = "report";
  std::string input;
  double kappa = 1.0;
  std::size_t ntheta = 64;
  std::size_t npsi = 64;
  double r_max = 0.0;  // 0 selects 8/kappa
  std::size_t steps = 400;
  std::string strategy = "auto";
  std::string out = "out";
  std::uint64_t seed = 1;
  double tol_defect = 1e-6;
  double tol_mono = 1e-6;
  int laplacian_order = 4;
  int sff_order = 4;

  double effective_r_max() const { return r_max > 0.0 ? r_max : 8.0 / kappa; }

  void validate() const {
    if (!(kappa > 0.0)) throw InputError("--kappa must be positive");
    if (steps < 16) throw InputError("--steps must be at least 16");
    if (effective_r_max() < 2.0 / kappa) throw InputError("--rmax must be at least 2/kappa");
    if (!(tol_defect > 0.0) || !(tol_mono > 0.0)) throw InputError("tolerances must be positive");
    if (laplacian_order != 2 && laplacian_order != 4) throw InputError("--laplacian must be 2 or 4");
  }
};

/// Sign and normalization conventions fixed by this build; listed in every report.
inline std::vector<std::string> applied_decisions() {
  return {"v_inf_uses_exp_plus_3kr", "exported_W0_future_directed", "gamma0_is_kappaX_plus_N",
          "barrier_phi_is_h", "limit_constant_fitted_not_assumed"};
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string config_fingerprint(const RunConfig& c, const std::string& input_text) {
  std::ostringstream s;
  s << input_text << '|' << fmt(c.kappa) << '|' << c.ntheta << '|' << c.npsi << '|'
    << fmt(c.effective_r_max()) << '|' << c.steps << '|' << c.strategy << '|' << c.seed << '|'
    << fmt(c.tol_defect) << '|' << fmt(c.tol_mono) << '|' << c.laplacian_order << '|' << c.sff_order;
  return s.str();
}

inline std::string embedding_fingerprint(const RunConfig& c, const std::string& input_text) {
  std::ostringstream s;
  s << input_text << '|' << fmt(c.kappa) << '|' << c.ntheta << '|' << c.npsi << '|' << c.strategy
    << '|' << fmt(c.tol_defect) << '|' << c.sff_order;
  return s.str();
}

inline EmbeddingStrategy resolve_strategy(const std::string& name, const SurfaceSpec& spec) {
  if (name == "geodesic_sphere") return EmbeddingStrategy::geodesic_sphere;
  if (name == "axisymmetric") return EmbeddingStrategy::axisymmetric;
  if (name == "general") return EmbeddingStrategy::general;
  if (name == "auto") {
    if (spec.preset_name == "round_sphere") return EmbeddingStrategy::geodesic_sphere;
    return is_axisymmetric(spec) ? EmbeddingStrategy::axisymmetric : EmbeddingStrategy::general;
  }
  throw InputError("unknown strategy '" + name + "'");
}

/// Everything a run produces. Later stages are empty when the command stops early.
struct RunResult {
  RunConfig config;
  std::string config_hash;
  SurfaceSpec spec;
  AdmissibilityReport admissibility;
  EmbeddedSurface es;
  bool embedding_from_cache = false;
  FoliationSchedule schedule;
  Field calH;
  USolution u;
  WVectorSolution W;
  WSolution W_scalar;
  Spinor spinor;
  std::vector<MassProfile> mass_components;
  MassProfile mass;
  LimitCheck limit;
  EnergyMomentum P;
  BarrierCheck barrier;
  double barrier_residual = 0.0;
  GaugeDeviation gauge;
  double decay_exponent = 0.0;
  double gauge_exponent = 0.0;
  bool has_u = false, has_w = false, has_mass = false;
};

/// Spinor for the scalar W solve, drawn from the run seed.
inline Spinor seeded_spinor(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Spinor a{{nd(rng), nd(rng)}, {nd(rng), nd(rng)}};
  const double n = std::sqrt(a.norm_sq());
  return Spinor{a.a1 / n, a.a2 / n};
}

inline EmbeddedSurface embed_with_cache(const RunConfig& cfg, const SurfaceSpec& spec,
                                        const std::string& input_text, bool& from_cache) {
  EmbeddingOptions opts;
  opts.strategy = resolve_strategy(cfg.strategy, spec);
  opts.tol_defect = cfg.tol_defect;
  opts.sff_order = cfg.sff_order;
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(cfg.out) / "cache" / hex64(fnv1a(embedding_fingerprint(cfg, input_text)));
  const fs::path table = dir / "embedding.tsv";
  const fs::path meta = dir / "embedding.txt";
  from_cache = false;
  if (fs::exists(table) && fs::exists(meta)) {
    const KeyValueReport m = read_report(meta.string());
    EmbeddedSurface es;
    es.grid = spec.grid;
    es.kappa = cfg.kappa;
    es.metric = spec.metric;
    es.strategy = m.get("strategy") ? *m.get("strategy") : "cached";
    es.iterations = m.get("iterations") ? std::stoi(*m.get("iterations")) : 0;
    read_embedding_tsv(table.string(), es);
    es.defect = m.get("defect") ? std::stod(*m.get("defect")) : isometry_defect(es.grid, es.X, es.metric);
    second_fundamental_form(es, cfg.sff_order);
    es.certified = es.convex && es.defect < cfg.tol_defect;
    from_cache = true;
    return es;
  }
  EmbeddedSurface es = embed(spec, cfg.kappa, opts);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create cache directory " + dir.string());
  write_embedding_tsv(table.string(), es);
  KeyValueReport m;
  m.set("strategy", es.strategy);
  m.set("iterations", es.iterations);
  m.set("defect", es.defect);
  m.write(meta.string());
  return es;
}

inline int command_depth(const std::string& cmd) {
  if (cmd == "embed") return 0;
  if (cmd == "foliate") return 1;
  if (cmd == "solve-u") return 2;
  if (cmd == "solve-w") return 3;
  if (cmd == "mass" || cmd == "report" || cmd == "verify") return 4;
  throw InputError("unknown command '" + cmd + "'");
}

/// Runs the pipeline as far as the command needs. Throws the typed errors.
inline RunResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const int depth = command_depth(cfg.command);
  RunResult res;
  res.config = cfg;
  const std::string text = read_text(cfg.input);
  res.config_hash = hex64(fnv1a(config_fingerprint(cfg, text)));
  res.spec = parse_surface_spec(load_json_file(cfg.input), SphereGrid(cfg.ntheta, cfg.npsi));
  res.config.ntheta = res.spec.grid.ntheta();
  res.config.npsi = res.spec.grid.npsi();

  res.admissibility = check_admissibility(res.spec, cfg.kappa);
  if (!(res.admissibility.minK > -cfg.kappa * cfg.kappa))
    throw AdmissibilityError("K > -kappa^2 fails: min K = " + fmt(res.admissibility.minK) +
                             ", needs kappa > " + fmt(res.admissibility.kappa_floor));
  if (!(res.admissibility.min_H_gap > 0.0))
    throw AdmissibilityError("H > |tr p| fails: min gap = " + fmt(res.admissibility.min_H_gap));

  res.es = embed_with_cache(cfg, res.spec, text, res.embedding_from_cache);
  if (!res.es.certified)
    throw SolverError("embedding not certified: isometry defect " + fmt(res.es.defect) +
                      (res.es.convex ? "" : ", image not convex"));
  if (depth < 1) return res;

  res.schedule = make_schedule(cfg.kappa, cfg.steps, cfg.effective_r_max());
  if (depth < 2) return res;

  const FoliationFrame f0 = frame_at_q(res.es, 1.0);
  res.calH = resolve_mean_curvature(res.spec, f0.H0);
  res.u = solve_u(res.es, res.calH, res.schedule, cfg.laplacian_order);
  res.has_u = true;
  res.gauge = gauge_deviation(res.u.v);
  res.decay_exponent = fit_decay_exponent(res.gauge.r, res.gauge.u_minus_1, 2.0 / cfg.kappa, res.schedule.r_max);
  res.gauge_exponent = fit_decay_exponent(res.gauge.r, res.gauge.a_minus_i, 2.0 / cfg.kappa, res.schedule.r_max);
  res.barrier = check_barriers(res.es, res.u.v);
  {
    std::vector<double> rs;
    for (std::size_t k = 0; k < res.schedule.size(); ++k)
      if (res.schedule.q[k] > 0.0 && res.schedule.r(k) <= res.schedule.r_max) rs.push_back(res.schedule.r(k));
    const Field& u0 = res.u.u0;
    const auto [umin, umax] = std::minmax_element(u0.begin(), u0.end());
    const BarrierProfile prof = barrier_profile(res.es, rs);
    res.barrier_residual = std::max(barrier_residual(barrier_ode(prof, std::min(*umin, 1.0))),
                                    barrier_residual(barrier_ode(prof, std::max(*umax, 1.0))));
  }
  if (depth < 3) return res;

  res.W = solve_W_vector(res.es, res.u.v, cfg.laplacian_order);
  res.spinor = seeded_spinor(cfg.seed);
  const FourVector z = zeta(res.spinor);
  const auto gm = gamma0(res.es);
  Field term(gm.size());
  for (std::size_t i = 0; i < gm.size(); ++i) term[i] = -lorentz_dot(gm[i], z);
  res.W_scalar = solve_W_scalar(res.es, res.u.v, term, cfg.laplacian_order);
  res.has_w = true;
  if (depth < 4) return res;

  std::vector<const FlowField*> comps;
  for (const auto& c : res.W.components.Wt) comps.push_back(&c);
  res.mass_components = mass_profiles(res.es, res.u.v, comps);
  res.mass = mass_profile(res.es, res.u.v, res.W_scalar.Wt[0]);
  res.limit = limit_check(res.es, res.u.v_inf, z, res.mass);
  res.P = energy_momentum(res.es, res.u.u0, res.W.W0);
  res.has_mass = true;
  return res;
}

// ---------------------------------------------------------------------------
// Verification battery

struct CheckResult {
  std::string name;
  bool pass = true;
  double value = 0.0;
  std::string note;
};

inline std::vector<CheckResult> verify_run(const RunResult& r) {
  std::vector<CheckResult> out;
  const auto add = [&](std::string name, bool pass, double value, std::string note = "") {
    out.push_back({std::move(name), pass, value, std::move(note)});
  };
  const auto& es = r.es;
  const double k = es.kappa;
  double hx = 0, hn = 0, xn = 0, g0 = 0;
  const auto gm = gamma0(es);
  for (std::size_t i = 0; i < es.X.size(); ++i) {
    hx = std::max(hx, std::abs(lorentz_dot(es.X[i], es.X[i]) + 1.0 / (k * k)) * k * k);
    hn = std::max(hn, std::abs(lorentz_dot(es.N[i], es.N[i]) - 1.0));
    xn = std::max(xn, std::abs(lorentz_dot(es.X[i], es.N[i])) * k);
    g0 = std::max(g0, std::abs(lorentz_dot(gm[i], gm[i])));
  }
  add("hyperboloid_residual", std::max({hx, hn, xn}) < 1e-8, std::max({hx, hn, xn}));
  add("gamma0_null", g0 < 1e-8, g0);
  add("embedding_defect", es.defect < r.config.tol_defect, es.defect);
  add("gauss_evolution", gauss_evolution_check(es, 1.0 / k, 1e-3) < 1e-5 * k * k,
      gauss_evolution_check(es, 1.0 / k, 1e-3));
  {
    std::mt19937_64 rng(r.config.seed);
    std::uniform_real_distribution<double> U(0.05, 5.0), R(-2.0, 10.0), K(0.05, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) worst = std::max(worst, identity_check(U(rng), R(rng), K(rng)));
    add("mass_identity", worst < 1e-11, worst);
  }
  if (r.has_u) {
    add("barrier_ode_residual", r.barrier_residual < 1e-10, r.barrier_residual);
    add("barrier_lower", r.barrier.lower_ok, r.barrier.lower_margin,
        r.barrier.lower_applicable ? "" : "skipped: min u0 > 1");
    add("barrier_upper", r.barrier.upper_ok, r.barrier.upper_margin,
        r.barrier.upper_applicable ? "" : "skipped: max u0 < 1");
    double umax = 0.0;
    for (double x : r.u.u0) umax = std::max(umax, std::abs(x - 1.0));
    if (umax > 1e-12) {
      add("decay_exponent", std::abs(r.decay_exponent - 3.0 * k) <= 0.1 * 3.0 * k, r.decay_exponent);
      add("gauge_exponent", r.gauge_exponent >= 2.8 * k, r.gauge_exponent);
    } else {
      double vmax = 0.0;
      for (double x : r.u.v_inf) vmax = std::max(vmax, std::abs(x));
      add("fixed_point", vmax < 1e-8, vmax);
    }
  }
  if (r.has_w) {
    double wmin = INFINITY, lin = 0.0, scale = 0.0;
    const FourVector z = zeta(r.spinor);
    for (std::size_t s = 0; s < r.schedule.size(); ++s)
      for (std::size_t i = 0; i < es.grid.size(); ++i) {
        const double ws = r.W_scalar.Wt[0].values[s][i];
        wmin = std::min(wmin, ws);
        FourVector wv{};
        for (std::size_t c = 0; c < 4; ++c) wv[c] = r.W.components.Wt[c].values[s][i];
        lin = std::max(lin, std::abs(lorentz_dot(wv, z) - ws));
        scale = std::max(scale, std::abs(ws));
      }
    add("W_nonnegative", wmin >= 0.0, wmin);
    add("W_linearity", lin <= 1e-8 * std::max(1.0, scale), lin);
  }
  if (r.has_mass) {
    const auto mono = monotonicity_check(r.mass.m, r.config.tol_mono);
    add("mass_monotone", mono.pass, mono.worst_increment,
        "worst at leaf " + std::to_string(mono.worst_index));
    bool below = true, equal = true;
    const FoliationFrame f0 = frame_at_q(es, 1.0);
    for (std::size_t i = 0; i < r.calH.size(); ++i) {
      below = below && r.calH[i] <= f0.H0[i] * (1.0 + 1e-12);
      equal = equal && std::abs(r.calH[i] - f0.H0[i]) <= 1e-12 * f0.H0[i];
    }
    if (equal) {
      add("P_zero", component_norm(r.P.P) <= 1e-8 * std::max(1.0, std::abs(r.mass.m.front())),
          component_norm(r.P.P));
    } else if (below) {
      const bool causal = r.P.cls == CausalClass::future_timelike || r.P.cls == CausalClass::future_null;
      add("P_future_causal", causal, r.P.P.t, std::string(to_string(r.P.cls)));
      add("P_zeta_uniform_sign", r.P.uniform_sign, r.P.max_pz);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

inline KeyValueReport build_report(const RunResult& r) {
  KeyValueReport rep;
  const auto& c = r.config;
  rep.set("config_hash", r.config_hash);
  rep.set("command", c.command);
  rep.set("input", c.input);
  rep.set("kappa", c.kappa);
  rep.set("ntheta", r.spec.grid.ntheta());
  rep.set("npsi", r.spec.grid.npsi());
  rep.set("r_max", c.effective_r_max());
  rep.set("steps", c.steps);
  rep.set("seed", static_cast<std::size_t>(c.seed));
  rep.set("laplacian_order", c.laplacian_order);
  rep.set("sff_order", c.sff_order);
  rep.set("decisions_applied", applied_decisions());
  rep.set("surface.preset", r.spec.preset_name.empty() ? std::string("grid") : r.spec.preset_name);
  rep.set("admissibility.min_K", r.admissibility.minK);
  rep.set("admissibility.kappa_floor", r.admissibility.kappa_floor);
  rep.set("admissibility.min_H_gap", r.admissibility.min_H_gap);
  rep.set("embedding.strategy", r.es.strategy);
  rep.set("embedding.defect", r.es.defect);
  rep.set("embedding.certified", r.es.certified);
  rep.set("embedding.convex", r.es.convex);
  rep.set("embedding.iterations", r.es.iterations);
  if (!r.es.lam2.empty()) {
    rep.set("embedding.min_lambda", *std::min_element(r.es.lam2.begin(), r.es.lam2.end()));
    rep.set("embedding.max_lambda", *std::max_element(r.es.lam1.begin(), r.es.lam1.end()));
  }
  if (r.has_u) {
    const auto [vmin, vmax] = std::minmax_element(r.u.v_inf.begin(), r.u.v_inf.end());
    const auto [umin, umax] = std::minmax_element(r.u.u0.begin(), r.u.u0.end());
    rep.set("u.u0_min", *umin);
    rep.set("u.u0_max", *umax);
    rep.set("u.v_inf_min", *vmin);
    rep.set("u.v_inf_max", *vmax);
    rep.set("u.decay_exponent", r.decay_exponent);
    rep.set("u.gauge_exponent", r.gauge_exponent);
    rep.set("u.barrier_lower_margin", r.barrier.lower_margin);
    rep.set("u.barrier_upper_margin", r.barrier.upper_margin);
    rep.set("u.barrier_ode_residual", r.barrier_residual);
  }
  if (r.has_w) {
    rep.set("w.spinor", std::vector<double>{r.spinor.a1.real(), r.spinor.a1.imag(), r.spinor.a2.real(),
                                            r.spinor.a2.imag()});
    rep.set("w.zeta", zeta(r.spinor));
    rep.set("w.max_reaction_step", r.W.components.max_reaction_step);
  }
  if (r.has_mass) {
    rep.set("mass.m_W0", r.mass.m.front());
    rep.set("mass.m_W_inf", r.mass.m.back());
    rep.set("mass.limit_lhs", r.limit.lhs);
    rep.set("mass.limit_rhs", r.limit.rhs);
    rep.set("mass.limit_constant", r.limit.constant);
    const auto mono = monotonicity_check(r.mass.m, c.tol_mono);
    rep.set("mass.monotone", mono.pass);
    rep.set("mass.worst_increment", mono.worst_increment);
    rep.set("P", r.P.P);
    rep.set("P.class", std::string(to_string(r.P.cls)));
    rep.set("P_raw", r.P.P_raw);
    rep.set("P_raw.class", std::string(to_string(r.P.cls_raw)));
    rep.set("P.zeta_min", r.P.min_pz);
    rep.set("P.zeta_max", r.P.max_pz);
    rep.set("P.zeta_uniform_sign", r.P.uniform_sign);
  }
  return rep;
}

/// Writes the artifacts for the command into cfg.out.
inline void write_artifacts(const RunResult& r) {
  namespace fs = std::filesystem;
  const fs::path out(r.config.out);
  const int depth = command_depth(r.config.command);
  write_embedding_tsv((out / "embedding.tsv").string(), r.es);
  const std::size_t stride = std::max<std::size_t>(1, r.config.steps / 40);
  if (depth >= 1 && r.config.command != "verify") {
    std::ofstream f((out / "foliation.tsv").string());
    if (!f) throw InputError("cannot write foliation.tsv");
    f.precision(15);
    f << "r\ttheta\tpsi\tx1\tx2\tx3\tt\tlam1\tlam2\tH0\tRr\n";
    const auto& s = r.schedule;
    for (std::size_t k = 0; k < s.size(); k += stride) {
      if (!(s.q[k] > 0.0) || s.r(k) > s.r_max) continue;
      const FoliationFrame fr = frame_at_q(r.es, s.q[k]);
      const auto& g = r.es.grid;
      for (std::size_t i = 0; i < g.ntheta(); ++i)
        for (std::size_t j = 0; j < g.npsi(); ++j) {
          const std::size_t id = g.index(i, j);
          const FourVector x = fr.X_r(id);
          f << s.r(k) << '\t' << g.theta(i) << '\t' << g.psi(j) << '\t' << x.x1 << '\t' << x.x2 << '\t'
            << x.x3 << '\t' << x.t << '\t' << fr.lam1[id] << '\t' << fr.lam2[id] << '\t' << fr.H0[id]
            << '\t' << fr.Rr(id) << '\n';
        }
    }
  }
  if (r.has_u && r.config.command != "verify")
    write_flow_csv((out / "u.csv").string(), r.es.grid, {&r.u.v}, {"u"}, false, stride, true);
  if (r.has_w && r.config.command != "verify") {
    std::vector<const FlowField*> f;
    for (const auto& c : r.W.components.Wt) f.push_back(&c);
    f.push_back(&r.W_scalar.Wt[0]);
    write_flow_csv((out / "w.csv").string(), r.es.grid, f, {"Wt_x1", "Wt_x2", "Wt_x3", "Wt_t", "Wt_scalar"},
                   true, stride);
  }
  if (r.has_mass) write_mass_csv((out / "mass.csv").string(), r.mass, r.mass_components);
}

}  // namespace qlm
