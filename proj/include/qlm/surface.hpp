#pragma once

// Input 2-surfaces: intrinsic metric on the latitude-longitude grid, the
// mean-curvature data that will be prescribed on the inner boundary, and the
// admissibility gate K > -kappa^2, H > |tr p|.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlm/errors.hpp"
#include "qlm/grid.hpp"

namespace qlm {

enum class HSourceKind {
  riemannian,  // H field
  spacetime,   // H and tr_Sigma p fields
  h0_scaled,   // factor * H_0 of the embedding (resolved after embedding)
};

struct HSource {
  HSourceKind kind = HSourceKind::riemannian;
  Field H;
  Field trp;
  double factor = 1.0;
};

struct SurfaceSpec {
  SphereGrid grid;
  MetricField metric;
  HSource hsource;
  std::string preset_name;  // empty for grid input
  std::map<std::string, double> preset_params;
};

// ---------------------------------------------------------------------------
// Presets

inline MetricField metric_round_sphere(const SphereGrid& g, double R) {
  MetricField m(g.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    const double s = std::sin(g.theta(i));
    for (std::size_t j = 0; j < g.npsi(); ++j) m[g.index(i, j)] = {R * R, 0.0, R * R * s * s};
  }
  return m;
}

/// Spheroid (a sin t cos p, a sin t sin p, c cos t): a equatorial, c polar semi-axis.
inline MetricField metric_spheroid(const SphereGrid& g, double a, double c) {
  MetricField m(g.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    const double s = std::sin(g.theta(i));
    const double co = std::cos(g.theta(i));
    for (std::size_t j = 0; j < g.npsi(); ++j)
      m[g.index(i, j)] = {a * a * co * co + c * c * s * s, 0.0, a * a * s * s};
  }
  return m;
}

/// Rotationally symmetric band metric dt^2 + (sin t + beta sin^3 t)^2 dp^2;
/// its curvature dips to 1 - 6 beta at the poles (negative for beta > 1/6).
inline MetricField metric_band(const SphereGrid& g, double beta) {
  MetricField m(g.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    const double s = std::sin(g.theta(i));
    const double phi = s + beta * s * s * s;
    for (std::size_t j = 0; j < g.npsi(); ++j) m[g.index(i, j)] = {1.0, 0.0, phi * phi};
  }
  return m;
}

/// Round sphere of radius R with conformal factor exp(2 eps f), f a random
/// polynomial of degree <= 3 in the unit normal, normalised to max |f| = 1.
inline MetricField metric_perturbed_sphere(const SphereGrid& g, double R, double eps,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  // Monomials n1^a n2^b n3^c with 1 <= a+b+c <= 3.
  std::vector<std::array<int, 3>> mono;
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b + a <= 3; ++b)
      for (int c = 0; a + b + c <= 3; ++c)
        if (a + b + c >= 1) mono.push_back({a, b, c});
  std::vector<double> w(mono.size());
  for (auto& x : w) x = coef(rng);
  Field f(g.size());
  double fmax = 0.0;
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const double th = g.theta(i);
      const double ps = g.psi(j);
      const double n[3] = {std::cos(th), std::sin(th) * std::cos(ps), std::sin(th) * std::sin(ps)};
      double v = 0.0;
      for (std::size_t k = 0; k < mono.size(); ++k)
        v += w[k] * std::pow(n[0], mono[k][0]) * std::pow(n[1], mono[k][1]) *
             std::pow(n[2], mono[k][2]);
      f[g.index(i, j)] = v;
      fmax = std::max(fmax, std::abs(v));
    }
  }
  MetricField m = metric_round_sphere(g, R);
  for (std::size_t k = 0; k < g.size(); ++k) m[k] = std::exp(2.0 * eps * f[k] / fmax) * m[k];
  return m;
}

/// Mean curvature of the preset's standard embedding in Euclidean R^3
/// (sphere and spheroid only).
inline Field euclidean_mean_curvature(const SurfaceSpec& spec) {
  const SphereGrid& g = spec.grid;
  Field H(g.size());
  const auto param = [&](const char* k) { return spec.preset_params.at(k); };
  if (spec.preset_name == "round_sphere") {
    std::fill(H.begin(), H.end(), 2.0 / param("R"));
  } else if (spec.preset_name == "spheroid") {
    const double a = param("a");
    const double c = param("c");
    for (std::size_t i = 0; i < g.ntheta(); ++i) {
      const double s = std::sin(g.theta(i));
      const double co = std::cos(g.theta(i));
      const double q = a * a * co * co + c * c * s * s;
      const double k_meridian = a * c / std::pow(q, 1.5);
      const double k_parallel = c / (a * std::sqrt(q));
      for (std::size_t j = 0; j < g.npsi(); ++j) H[g.index(i, j)] = k_meridian + k_parallel;
    }
  } else {
    throw InputError("euclidean mean curvature is only available for round_sphere and spheroid");
  }
  return H;
}

inline SurfaceSpec make_preset(const std::string& name, const std::map<std::string, double>& params,
                               const SphereGrid& grid) {
  const auto get = [&](const char* k, double dflt) {
    auto it = params.find(k);
    return it == params.end() ? dflt : it->second;
  };
  SurfaceSpec s;
  s.grid = grid;
  s.preset_name = name;
  if (name == "round_sphere") {
    s.preset_params = {{"R", get("R", 1.0)}};
    s.metric = metric_round_sphere(grid, s.preset_params["R"]);
  } else if (name == "spheroid") {
    s.preset_params = {{"a", get("a", 1.0)}, {"c", get("c", 0.8)}};
    s.metric = metric_spheroid(grid, s.preset_params["a"], s.preset_params["c"]);
  } else if (name == "band") {
    s.preset_params = {{"beta", get("beta", 1.0 / 3.0)}};
    s.metric = metric_band(grid, s.preset_params["beta"]);
  } else if (name == "perturbed_sphere") {
    s.preset_params = {{"R", get("R", 1.0)}, {"eps", get("eps", 0.01)}, {"seed", get("seed", 1)}};
    s.metric = metric_perturbed_sphere(grid, s.preset_params["R"], s.preset_params["eps"],
                                       static_cast<std::uint64_t>(s.preset_params["seed"]));
  } else {
    throw InputError("unknown preset '" + name + "'");
  }
  s.hsource.kind = HSourceKind::h0_scaled;
  s.hsource.factor = 1.0;
  return s;
}

/// Constant Riemannian mean-curvature data.
inline HSource constant_H(const SphereGrid& g, double H) {
  HSource h;
  h.kind = HSourceKind::riemannian;
  h.H.assign(g.size(), H);
  return h;
}

// ---------------------------------------------------------------------------
// Intrinsic curvature

inline void validate_metric(const SurfaceSpec& spec) {
  if (spec.metric.size() != spec.grid.size())
    throw InputError("metric array size does not match grid");
  for (std::size_t k = 0; k < spec.metric.size(); ++k) {
    const Sym2& m = spec.metric[k];
    if (!(m.tt > 0.0) || !(m.det() > 0.0) || !std::isfinite(m.det()))
      throw InputError("metric not positive definite at node " + std::to_string(k));
  }
}

/// Gaussian curvature of the input metric, second-order centred differences,
/// via K = (1/sqrt D) [ d_psi(sqrt D G^2_11 / E) - d_theta(sqrt D G^2_12 / E) ].
inline Field gaussian_curvature(const SurfaceSpec& spec, int order = 2) {
  validate_metric(spec);
  const SphereGrid& g = spec.grid;
  const std::size_t n = g.size();
  Field E(n), F(n), G(n);
  for (std::size_t k = 0; k < n; ++k) {
    E[k] = spec.metric[k].tt;
    F[k] = spec.metric[k].tp;
    G[k] = spec.metric[k].pp;
  }
  const Field Et = diff_theta(g, E, 1, order, 1.0);
  const Field Ft = diff_theta(g, F, 1, order, -1.0);
  const Field Gt = diff_theta(g, G, 1, order, 1.0);
  const Field Ep = diff_psi(g, E, 1, order);
  Field q1(n), q2(n), sd(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double D = E[k] * G[k] - F[k] * F[k];
    sd[k] = std::sqrt(D);
    const double g211 = (2.0 * E[k] * Ft[k] - E[k] * Ep[k] - F[k] * Et[k]) / (2.0 * D);
    const double g212 = (E[k] * Gt[k] - F[k] * Ep[k]) / (2.0 * D);
    q1[k] = sd[k] * g211 / E[k];
    q2[k] = sd[k] * g212 / E[k];
  }
  const Field q1p = diff_psi(g, q1, 1, order);
  const Field q2t = diff_theta(g, q2, 1, order, 1.0);
  Field K(n);
  for (std::size_t k = 0; k < n; ++k) K[k] = (q1p[k] - q2t[k]) / sd[k];
  return K;
}

/// True when E, G do not depend on psi and F vanishes (relative tolerance).
inline bool is_axisymmetric(const SurfaceSpec& spec, double tol = 1e-10) {
  const SphereGrid& g = spec.grid;
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    const Sym2& m0 = spec.metric[g.index(i, 0)];
    const double scale = m0.frobenius();
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const Sym2& m = spec.metric[g.index(i, j)];
      if (std::abs(m.tp) > tol * scale || std::abs(m.tt - m0.tt) > tol * scale ||
          std::abs(m.pp - m0.pp) > tol * scale)
        return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Mean-curvature data and admissibility

/// H for Riemannian data, sqrt(H^2 - trp^2) for space-time data. Not defined
/// for h0_scaled sources (use resolve_mean_curvature after embedding).
inline Field effective_H(const SurfaceSpec& spec) {
  const HSource& hs = spec.hsource;
  const std::size_t n = spec.grid.size();
  if (hs.kind == HSourceKind::h0_scaled)
    throw InputError("effective_H: h0_scaled source needs the embedding's H_0");
  if (hs.H.size() != n) throw InputError("H array size does not match grid");
  Field out(n);
  if (hs.kind == HSourceKind::riemannian) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!(hs.H[k] > 0.0))
        throw AdmissibilityError("H must be positive; fails at node " + std::to_string(k));
      out[k] = hs.H[k];
    }
    return out;
  }
  if (hs.trp.size() != n) throw InputError("trp array size does not match grid");
  std::size_t worst = 0;
  double worst_gap = INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    const double gap = hs.H[k] - std::abs(hs.trp[k]);
    if (gap < worst_gap) {
      worst_gap = gap;
      worst = k;
    }
    out[k] = std::sqrt(std::max(0.0, hs.H[k] * hs.H[k] - hs.trp[k] * hs.trp[k]));
  }
  if (!(worst_gap > 0.0))
    throw AdmissibilityError("H > |tr p| fails; worst node " + std::to_string(worst) +
                             " (H - |trp| = " + std::to_string(worst_gap) + ")");
  return out;
}

/// The mean curvature prescribed on the inner boundary: effective_H, or
/// factor * H_0 for h0_scaled sources.
inline Field resolve_mean_curvature(const SurfaceSpec& spec, const Field& H0) {
  if (spec.hsource.kind == HSourceKind::h0_scaled) {
    if (!(spec.hsource.factor > 0.0)) throw InputError("h0_scaled factor must be positive");
    Field out(H0.size());
    for (std::size_t k = 0; k < H0.size(); ++k) out[k] = spec.hsource.factor * H0[k];
    return out;
  }
  return effective_H(spec);
}

struct AdmissibilityReport {
  Field K;
  double minK = 0.0;
  double min_H_gap = 0.0;  // min(H - |tr p|); +inf when the source is h0_scaled
  double kappa_floor = 0.0;
  bool pass = false;
};

inline AdmissibilityReport check_admissibility(const SurfaceSpec& spec, double kappa) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  AdmissibilityReport r;
  r.K = gaussian_curvature(spec);
  r.minK = *std::min_element(r.K.begin(), r.K.end());
  r.kappa_floor = std::sqrt(std::max(0.0, -r.minK));
  const HSource& hs = spec.hsource;
  r.min_H_gap = INFINITY;
  if (hs.kind != HSourceKind::h0_scaled) {
    for (std::size_t k = 0; k < hs.H.size(); ++k) {
      const double trp = hs.kind == HSourceKind::spacetime ? std::abs(hs.trp.at(k)) : 0.0;
      r.min_H_gap = std::min(r.min_H_gap, hs.H[k] - trp);
    }
  }
  r.pass = r.minK > -kappa * kappa && r.min_H_gap > 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Surface spec documents (JSON)

inline Field read_array(const nlohmann::json& j, const char* key, std::size_t n) {
  if (!j.contains(key)) throw InputError(std::string("missing array '") + key + "'");
  Field f = j.at(key).get<Field>();
  if (f.size() != n)
    throw InputError(std::string("array '") + key + "' has " + std::to_string(f.size()) +
                     " entries, expected " + std::to_string(n));
  return f;
}

/// Parse a surface document. `default_grid` sizes presets that do not name
/// their own ntheta/npsi.
inline SurfaceSpec parse_surface_spec(const nlohmann::json& doc, const SphereGrid& default_grid) {
  try {
    SurfaceSpec spec;
    const std::string kind = doc.value("kind", doc.contains("preset") ? "preset" : "grid");
    if (kind == "preset") {
      const auto& p = doc.at("preset");
      std::map<std::string, double> params;
      if (p.contains("params")) params = p.at("params").get<std::map<std::string, double>>();
      SphereGrid g = default_grid;
      if (p.contains("ntheta") || p.contains("npsi"))
        g = SphereGrid(p.value("ntheta", default_grid.ntheta()), p.value("npsi", default_grid.npsi()));
      spec = make_preset(p.at("name").get<std::string>(), params, g);
    } else if (kind == "grid") {
      const auto& gj = doc.at("grid");
      spec.grid = SphereGrid(gj.at("ntheta").get<std::size_t>(), gj.at("npsi").get<std::size_t>());
      const std::size_t n = spec.grid.size();
      const Field tt = read_array(gj, "g_tt", n);
      const Field pp = read_array(gj, "g_pp", n);
      const Field tp = gj.contains("g_tp") ? read_array(gj, "g_tp", n) : Field(n, 0.0);
      spec.metric.resize(n);
      for (std::size_t k = 0; k < n; ++k) spec.metric[k] = {tt[k], tp[k], pp[k]};
      spec.hsource.kind = HSourceKind::h0_scaled;
    } else {
      throw InputError("unknown kind '" + kind + "'");
    }
    validate_metric(spec);

    if (doc.contains("hsource")) {
      const auto& h = doc.at("hsource");
      const std::string type = h.at("type").get<std::string>();
      const std::size_t n = spec.grid.size();
      const auto field_or_const = [&](const char* arr, const char* cst) {
        if (h.contains(arr)) return read_array(h, arr, n);
        if (h.contains(cst)) return Field(n, h.at(cst).get<double>());
        throw InputError(std::string("hsource needs '") + arr + "' or '" + cst + "'");
      };
      if (type == "riemannian") {
        spec.hsource.kind = HSourceKind::riemannian;
        spec.hsource.H = field_or_const("H", "value");
      } else if (type == "spacetime") {
        spec.hsource.kind = HSourceKind::spacetime;
        spec.hsource.H = field_or_const("H", "H_value");
        spec.hsource.trp = field_or_const("trp", "trp_value");
      } else if (type == "h0_scaled") {
        spec.hsource.kind = HSourceKind::h0_scaled;
        spec.hsource.factor = h.value("factor", 1.0);
      } else if (type == "euclidean") {
        spec.hsource.kind = HSourceKind::riemannian;
        spec.hsource.H = euclidean_mean_curvature(spec);
      } else {
        throw InputError("unknown hsource type '" + type + "'");
      }
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("surface document: ") + e.what());
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace qlm
