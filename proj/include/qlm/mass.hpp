#pragma once

// m_W(r) = int_{Sigma_r} (H0 - calH) W dA_r, its checks, and the
// energy-momentum vector P.
//
// In the rescaled variables the integrand is H0 v W~ / u sqrt(det g~), which
// is finite on every leaf including q = 0.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "qlm/errors.hpp"
#include "qlm/flows.hpp"
#include "qlm/minkowski.hpp"
#include "qlm/spinor.hpp"

namespace qlm {

struct MassProfile {
  FoliationSchedule schedule;
  std::vector<double> m;  // per leaf, schedule order (r increasing)
};

inline void require_same_schedule(const FoliationSchedule& a, const FoliationSchedule& b) {
  if (a.kappa != b.kappa || a.q != b.q) throw InputError("mass_profile: schedule mismatch");
}

/// m_W on every leaf for each W~ trajectory (all on the schedule of v).
inline std::vector<MassProfile> mass_profiles(const EmbeddedSurface& es, const FlowField& v,
                                              const std::vector<const FlowField*>& Wt) {
  const auto& s = v.schedule;
  for (const auto* w : Wt) require_same_schedule(s, w->schedule);
  std::vector<MassProfile> out(Wt.size());
  for (auto& p : out) {
    p.schedule = s;
    p.m.resize(s.size());
  }
  const SphereGrid& g = es.grid;
  const double cell = g.h_theta() * g.h_psi();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const FoliationFrame f = frame_at_q(es, s.q[k]);
    const double q32 = std::pow(s.q[k], 1.5);
    for (std::size_t c = 0; c < Wt.size(); ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double vi = v.values[k][i];
        const double u = 1.0 + q32 * vi;
        acc += f.H0[i] * vi * Wt[c]->values[k][i] / u * f.sqrt_det_tilde[i];
      }
      out[c].m[k] = acc * cell;
    }
  }
  return out;
}

inline MassProfile mass_profile(const EmbeddedSurface& es, const FlowField& v, const FlowField& Wt) {
  return mass_profiles(es, v, {&Wt}).front();
}

struct MonotonicityVerdict {
  bool pass = true;
  double worst_increment = -INFINITY;  // max forward difference, scaled by 1 + |m|
  std::size_t worst_index = 0;         // leaf index k of the difference m[k+1] - m[k]
};

/// Every forward difference must satisfy m[k+1] - m[k] <= tol (1 + |m[k]|).
inline MonotonicityVerdict monotonicity_check(const std::vector<double>& m, double tol) {
  if (m.size() < 3) throw InputError("monotonicity_check needs at least 3 samples");
  MonotonicityVerdict v;
  for (std::size_t k = 0; k + 1 < m.size(); ++k) {
    const double inc = (m[k + 1] - m[k]) / (1.0 + std::abs(m[k]));
    if (inc > v.worst_increment) {
      v.worst_increment = inc;
      v.worst_index = k;
    }
  }
  v.pass = v.worst_increment <= tol;
  return v;
}

/// Extrapolates m to t = 0 from the last three leaves at finite r
/// (quadratic in t).
inline double extrapolate_tail(const MassProfile& p) {
  const auto& s = p.schedule;
  std::vector<std::size_t> ks;
  for (std::size_t k = s.size(); k-- > 0 && ks.size() < 3;)
    if (s.q[k] > 0.0) ks.push_back(k);
  if (ks.size() < 3) throw InputError("extrapolate_tail needs three finite leaves");
  double acc = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    double w = 1.0;
    for (std::size_t b = 0; b < 3; ++b)
      if (b != a) w *= (0.0 - s.t(ks[b])) / (s.t(ks[a]) - s.t(ks[b]));
    acc += w * p.m[ks[a]];
  }
  return acc;
}

/// -2 kappa int v_inf gamma0 . zeta(a) over the limit metric.
inline double limit_rhs(const EmbeddedSurface& es, const Field& v_inf, const FourVector& zeta_a) {
  const MetricField gl = limit_metric(es);
  const auto gm = gamma0(es);
  const SphereGrid& g = es.grid;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    acc += v_inf[i] * lorentz_dot(gm[i], zeta_a) * std::sqrt(gl[i].det());
  return -2.0 * es.kappa * acc * g.h_theta() * g.h_psi();
}

struct LimitCheck {
  double lhs = 0.0;       // tail-extrapolated lim m_W
  double rhs = 0.0;       // v_inf-gamma0 integral
  double constant = 1.0;  // lhs / rhs
};

inline LimitCheck limit_check(const EmbeddedSurface& es, const Field& v_inf, const FourVector& zeta_a,
                              const MassProfile& p) {
  LimitCheck c;
  c.lhs = extrapolate_tail(p);
  c.rhs = limit_rhs(es, v_inf, zeta_a);
  c.constant = c.rhs != 0.0 ? c.lhs / c.rhs : 1.0;
  return c;
}

/// One constant for a set of cases (least squares) and the worst relative
/// residual |lhs - C rhs| / |lhs| after fitting it.
struct ConstantFit {
  double constant = 1.0;
  double max_residual = 0.0;
  double spread = 0.0;  // max relative deviation of per-case constants from the fit
};

inline ConstantFit fit_global_constant(const std::vector<LimitCheck>& cases) {
  double num = 0.0, den = 0.0;
  for (const auto& c : cases) {
    num += c.lhs * c.rhs;
    den += c.rhs * c.rhs;
  }
  ConstantFit f;
  f.constant = den > 0.0 ? num / den : 1.0;
  for (const auto& c : cases) {
    if (c.lhs == 0.0 && c.rhs == 0.0) continue;
    f.max_residual = std::max(f.max_residual, std::abs(c.lhs - f.constant * c.rhs) / std::abs(c.lhs));
    if (c.rhs != 0.0) f.spread = std::max(f.spread, std::abs(c.constant / f.constant - 1.0));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Energy-momentum

struct EnergyMomentum {
  FourVector P;      // with the exported future-directed W0 = -W(., 0)
  FourVector P_raw;  // with W(., 0) as solved (past-directed)
  CausalClass cls = CausalClass::zero;
  CausalClass cls_raw = CausalClass::zero;
  double min_pz = 0.0, max_pz = 0.0;  // range of P . z over sampled future null z
  bool uniform_sign = true;
};

inline EnergyMomentum energy_momentum(const EmbeddedSurface& es, const Field& u0,
                                      const std::vector<FourVector>& W0_raw,
                                      std::size_t n_null = 64, double causal_tol = kDefaultCausalTol) {
  const SphereGrid& g = es.grid;
  const FoliationFrame f = frame_at_q(es, 1.0);
  FourVector acc{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = (f.H0[i] - f.H0[i] / u0[i]) * f.sqrt_det_tilde[i];
    acc += w * W0_raw[i];
  }
  EnergyMomentum em;
  em.P_raw = (g.h_theta() * g.h_psi()) * acc;
  em.P = -em.P_raw;
  const double scale = std::max(1.0, component_norm(em.P));
  em.cls = causal_class(em.P, causal_tol * scale);
  em.cls_raw = causal_class(em.P_raw, causal_tol * scale);
  em.min_pz = INFINITY;
  em.max_pz = -INFINITY;
  for (const auto& z : null_directions(n_null)) {
    const double pz = lorentz_dot(em.P, z);
    em.min_pz = std::min(em.min_pz, pz);
    em.max_pz = std::max(em.max_pz, pz);
  }
  em.uniform_sign = em.max_pz <= 0.0 || em.min_pz >= 0.0;
  return em;
}

// ---------------------------------------------------------------------------
// Identities

/// (R+4k^2)(1-1/u) + (1/2)(1/u-u)(R+6k^2) + (1/2)(u-1)^2(R+2k^2)/u + 2k^2(u-1); zero identically.
inline double identity_check(double u, double Rr, double kappa) {
  if (!(u > 0.0)) throw InputError("identity_check needs u > 0");
  const double k2 = kappa * kappa;
  const double terms[4] = {(Rr + 4.0 * k2) * (1.0 - 1.0 / u), 0.5 * (1.0 / u - u) * (Rr + 6.0 * k2),
                           0.5 * (u - 1.0) * (u - 1.0) * (Rr + 2.0 * k2) / u, 2.0 * k2 * (u - 1.0)};
  double s = 0.0, mag = 0.0;
  for (double t : terms) {
    s += t;
    mag = std::max(mag, std::abs(t));
  }
  return std::abs(s) / std::max(1.0, mag);
}

/// max over nodes of |dH0/dr + H0^2 - R^r - 4 kappa^2| with a central difference in r.
inline double gauss_evolution_check(const EmbeddedSurface& es, double r, double dr) {
  if (!(r - dr >= 0.0)) throw InputError("gauss_evolution_check needs r >= dr");
  const FoliationFrame a = frame_at(es, r - dr), b = frame_at(es, r), c = frame_at(es, r + dr);
  const double k2 = es.kappa * es.kappa;
  double worst = 0.0;
  for (std::size_t i = 0; i < es.grid.size(); ++i) {
    const double dH = (c.H0[i] - a.H0[i]) / (2.0 * dr);
    worst = std::max(worst, std::abs(dH + b.H0[i] * b.H0[i] - b.Rr(i) - 4.0 * k2));
  }
  return worst;
}

/// CSV: r, t, m_W and the four component profiles of the vector solve.
inline void write_mass_csv(const std::string& path, const MassProfile& scalar,
                           const std::vector<MassProfile>& components) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(15);
  out << "r,t,m_W,m_x1,m_x2,m_x3,m_t\n";
  const auto& s = scalar.schedule;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const bool inf = s.q[k] == 0.0;
    if (!inf && s.r(k) > s.r_max) continue;
    if (inf) out << "inf";
    else out << s.r(k);
    out << ',' << s.t(k) << ',' << scalar.m[k];
    for (const auto& c : components) out << ',' << c.m[k];
    out << '\n';
  }
}

}  // namespace qlm
