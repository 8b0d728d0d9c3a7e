#pragma once

// Isometric embedding of the input surface into H^3_{-kappa^2} inside R^{3,1},
// its second fundamental form, principal data and the hyperbolic Gauss map.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qlm/errors.hpp"
#include "qlm/grid.hpp"
#include "qlm/minkowski.hpp"
#include "qlm/surface.hpp"

namespace qlm {

struct EmbeddedSurface {
  SphereGrid grid;
  double kappa = 1.0;
  std::vector<FourVector> X;  // position on the hyperboloid
  std::vector<FourVector> N;  // outward unit normal tangent to H^3
  MetricField metric;         // intrinsic metric realised by X
  MetricField h;              // second fundamental form, h_ab = -N . d_a d_b X
  Field lam1, lam2;           // principal curvatures, lam1 >= lam2
  Field mu1, mu2;             // lam_a = kappa coth(kappa mu_a)
  std::vector<std::array<double, 4>> frame;  // (e1^theta, e1^psi, e2^theta, e2^psi)
  double defect = 0.0;        // relative isometry defect
  bool certified = false;
  bool convex = false;
  int iterations = 0;
  std::string strategy;

  /// s_a = exp(-2 kappa mu_a) = (lam_a - kappa)/(lam_a + kappa), in (0, 1).
  double s1(std::size_t k) const { return (lam1[k] - kappa) / (lam1[k] + kappa); }
  double s2(std::size_t k) const { return (lam2[k] - kappa) / (lam2[k] + kappa); }
  /// Shape operator S = g^{-1} h as a 2x2 matrix acting on coordinate vectors.
  std::array<double, 4> shape_operator(std::size_t k) const {
    const Sym2 gi = metric[k].inverse();
    const Sym2& hh = h[k];
    return {gi.tt * hh.tt + gi.tp * hh.tp, gi.tt * hh.tp + gi.tp * hh.pp,
            gi.tp * hh.tt + gi.pp * hh.tp, gi.tp * hh.tp + gi.pp * hh.pp};
  }
};

enum class EmbeddingStrategy { geodesic_sphere, axisymmetric, general };

struct EmbeddingOptions {
  EmbeddingStrategy strategy = EmbeddingStrategy::axisymmetric;
  int max_iter = 60;
  double tol_defect = 1e-6;
  double regularization = 1e-10;
  double oscillation_weight = 0.1;  // general strategy: weight of the odd-even penalty rows
  int fd_order = 6;        // stencil order of the general solver's isometry residual
  int sff_order = 4;       // stencil order for the second fundamental form
};

// ---------------------------------------------------------------------------
// Shared geometry helpers

/// Induced metric of X from finite differences of the given order.
inline MetricField induced_metric(const SphereGrid& g, const std::vector<FourVector>& X,
                                  int order) {
  const auto Xt = diff_theta(g, X, 1, order);
  const auto Xp = diff_psi(g, X, 1, order);
  MetricField m(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    m[k] = {lorentz_dot(Xt[k], Xt[k]), lorentz_dot(Xt[k], Xp[k]), lorentz_dot(Xp[k], Xp[k])};
  return m;
}

/// max over nodes of |g_induced - g| / |g| (Frobenius).
inline double metric_defect(const MetricField& induced, const MetricField& target) {
  double worst = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k)
    worst = std::max(worst, (induced[k] - target[k]).frobenius() / target[k].frobenius());
  return worst;
}

inline double isometry_defect(const SphereGrid& g, const std::vector<FourVector>& X,
                              const MetricField& target, int order = 8) {
  return metric_defect(induced_metric(g, X, order), target);
}

/// Vector w with w . a = w . b = w . c = 0 in the Lorentz product.
inline FourVector lorentz_orthogonal(const FourVector& a, const FourVector& b,
                                     const FourVector& c) {
  // Euclidean generalised cross product, then flip the time sign.
  const auto det3 = [](double a0, double a1, double a2, double b0, double b1, double b2,
                       double c0, double c1, double c2) {
    return a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0);
  };
  const double w0 = det3(a.x2, a.x3, a.t, b.x2, b.x3, b.t, c.x2, c.x3, c.t);
  const double w1 = -det3(a.x1, a.x3, a.t, b.x1, b.x3, b.t, c.x1, c.x3, c.t);
  const double w2 = det3(a.x1, a.x2, a.t, b.x1, b.x2, b.t, c.x1, c.x2, c.t);
  const double w3 = -det3(a.x1, a.x2, a.x3, b.x1, b.x2, b.x3, c.x1, c.x2, c.x3);
  return {w0, w1, w2, -w3};
}

/// Normalised Lorentz centroid of the points, projected to the hyperboloid.
inline FourVector hyperbolic_centroid(const std::vector<FourVector>& X, double kappa) {
  FourVector c{};
  for (const auto& x : X) c += x;
  const double sq = -lorentz_dot(c, c);
  return (1.0 / (kappa * std::sqrt(sq))) * c;
}

/// Unit normals from tangent vectors, oriented away from the centroid.
inline std::vector<FourVector> outward_normals(const std::vector<FourVector>& X,
                                               const std::vector<FourVector>& Xt,
                                               const std::vector<FourVector>& Xp,
                                               double kappa) {
  const FourVector C = hyperbolic_centroid(X, kappa);
  std::vector<FourVector> N(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) {
    FourVector n = lorentz_orthogonal(X[k], Xt[k], Xp[k]);
    const double nn = lorentz_dot(n, n);
    if (!(nn > 0.0)) throw SolverError("degenerate tangent plane at node " + std::to_string(k));
    n *= 1.0 / std::sqrt(nn);
    if (lorentz_dot(n, C) > 0.0) n = -n;
    N[k] = n;
  }
  return N;
}

/// Generalised eigen-decomposition h v = lam g v of a 2x2 pair.
struct Principal2 {
  double lam1, lam2;
  std::array<double, 4> frame;
};

inline Principal2 principal_curvatures(const Sym2& g, const Sym2& h) {
  const double dg = g.det();
  const double b = h.tt * g.pp + h.pp * g.tt - 2.0 * h.tp * g.tp;
  const double disc = std::max(0.0, b * b - 4.0 * dg * h.det());
  const double mean = b / (2.0 * dg);
  const double half = std::sqrt(disc) / (2.0 * dg);
  Principal2 p{mean + half, mean - half, {}};
  const auto gnorm = [&](double v0, double v1) {
    return std::sqrt(g.tt * v0 * v0 + 2.0 * g.tp * v0 * v1 + g.pp * v1 * v1);
  };
  // Eigenvector of lam1 from whichever row of (h - lam g) is better conditioned.
  double r0 = h.tp - p.lam1 * g.tp, r1 = -(h.tt - p.lam1 * g.tt);
  double s0 = h.pp - p.lam1 * g.pp, s1 = -(h.tp - p.lam1 * g.tp);
  double v0 = r0, v1 = r1;
  if (std::hypot(r0, r1) < std::hypot(s0, s1)) {
    v0 = s0;
    v1 = s1;
  }
  if (half <= 1e-12 * std::abs(mean) || std::hypot(v0, v1) == 0.0) {
    v0 = 1.0; v1 = 0.0;  // umbilic: any orthonormal frame
  }
  double n = gnorm(v0, v1);
  v0 /= n; v1 /= n;
  // Second direction: g-orthogonal complement of the first.
  double w0 = -(g.tp * v0 + g.pp * v1);
  double w1 = g.tt * v0 + g.tp * v1;
  n = gnorm(w0, w1);
  p.frame = {v0, v1, w0 / n, w1 / n};
  return p;
}

/// Second fundamental form from second differences of X projected on N, and
/// the principal data. Throws when a principal curvature is <= kappa.
inline void second_fundamental_form(EmbeddedSurface& es, int order = 2) {
  const SphereGrid& g = es.grid;
  const auto Xtt = diff_theta(g, es.X, 2, order);
  const auto Xpp = diff_psi(g, es.X, 2, order);
  const auto Xp = diff_psi(g, es.X, 1, order);
  const auto Xtp = diff_theta(g, Xp, 1, order);
  const std::size_t n = g.size();
  es.h.resize(n);
  es.lam1.resize(n);
  es.lam2.resize(n);
  es.mu1.resize(n);
  es.mu2.resize(n);
  es.frame.resize(n);
  es.convex = true;
  std::size_t bad = n;
  for (std::size_t k = 0; k < n; ++k) {
    es.h[k] = {-lorentz_dot(Xtt[k], es.N[k]), -lorentz_dot(Xtp[k], es.N[k]),
               -lorentz_dot(Xpp[k], es.N[k])};
    const Principal2 p = principal_curvatures(es.metric[k], es.h[k]);
    es.lam1[k] = p.lam1;
    es.lam2[k] = p.lam2;
    es.frame[k] = p.frame;
    if (!(p.lam2 > 0.0)) es.convex = false;
    if (p.lam2 > es.kappa) {
      es.mu1[k] = std::atanh(es.kappa / p.lam1) / es.kappa;
      es.mu2[k] = std::atanh(es.kappa / p.lam2) / es.kappa;
    } else if (bad == n) {
      bad = k;
    }
  }
  if (bad != n)
    throw AdmissibilityError("principal curvature at or below horospherical bound (lam = " +
                             std::to_string(es.lam2[bad]) + " <= kappa) at node " +
                             std::to_string(bad));
}

/// Hyperbolic Gauss map kappa X + N; future-directed null at every node.
inline std::vector<FourVector> gauss_map(const EmbeddedSurface& es) {
  std::vector<FourVector> out(es.X.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = es.kappa * es.X[k] + es.N[k];
  return out;
}

// ---------------------------------------------------------------------------
// Tier 1: closed-form geodesic sphere

/// Geodesic sphere of intrinsic radius R: hyperbolic radius rho with
/// sinh(kappa rho) = kappa R, centred at (0,0,0,1/kappa).
inline EmbeddedSurface embed_geodesic_sphere(double R, double kappa, const SphereGrid& g,
                                             int sff_order = 2) {
  if (!(R > 0.0) || !(kappa > 0.0)) throw InputError("embed_geodesic_sphere: R, kappa > 0");
  EmbeddedSurface es;
  es.grid = g;
  es.kappa = kappa;
  es.strategy = "geodesic_sphere";
  const double rho = std::asinh(kappa * R) / kappa;
  const double ch = std::cosh(kappa * rho);
  const double sh = std::sinh(kappa * rho);
  es.X.resize(g.size());
  es.N.resize(g.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const double th = g.theta(i), ps = g.psi(j);
      const std::size_t k = g.index(i, j);
      es.X[k] = polar_param(rho, th, ps, kappa).p;
      const double n1 = std::cos(th), n2 = std::sin(th) * std::cos(ps),
                   n3 = std::sin(th) * std::sin(ps);
      es.N[k] = {ch * n1, ch * n2, ch * n3, sh};
    }
  }
  es.metric = metric_round_sphere(g, R);
  es.defect = isometry_defect(g, es.X, es.metric);
  es.certified = true;
  second_fundamental_form(es, sff_order);
  return es;
}

// ---------------------------------------------------------------------------
// Tier 2: surfaces of revolution

namespace detail {

/// Sine coefficients b_1..b_N of an odd function sampled at cell centres.
inline std::vector<double> sine_coefficients(const SphereGrid& g, const std::vector<double>& f) {
  const std::size_t n = g.ntheta();
  std::vector<double> b(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f[i] * std::sin(static_cast<double>(k) * g.theta(i));
    b[k] = (k == n ? 1.0 : 2.0) * s / static_cast<double>(n);
  }
  return b;
}

}  // namespace detail

/// Embedding of E(theta) dtheta^2 + Phi(theta)^2 dpsi^2 as a surface of
/// revolution about the x1 axis:
///   X = (-P sinh w, Phi cos psi, Phi sin psi, P cosh w), P = sqrt(Phi^2 + 1/kappa^2),
/// with w' = sqrt(E - Phi'^2/(1 + kappa^2 Phi^2)) / P integrated spectrally.
inline EmbeddedSurface embed_axisymmetric(const SurfaceSpec& spec, double kappa,
                                          int sff_order = 2, double tol_defect = 1e-6) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  const SphereGrid& g = spec.grid;
  if (!is_axisymmetric(spec))
    throw AdmissibilityError("axisymmetric strategy needs a metric of revolution (F = 0, E and G "
                             "independent of psi)");
  const AdmissibilityReport adm = check_admissibility(spec, kappa);
  if (!(adm.minK > -kappa * kappa))
    throw AdmissibilityError("K > -kappa^2 fails: min K = " + std::to_string(adm.minK) +
                             ", kappa floor = " + std::to_string(adm.kappa_floor));

  const std::size_t nt = g.ntheta();
  std::vector<double> E(nt), Phi(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    E[i] = spec.metric[g.index(i, 0)].tt;
    Phi[i] = std::sqrt(spec.metric[g.index(i, 0)].pp);
  }
  const auto bphi = detail::sine_coefficients(g, Phi);
  std::vector<double> dPhi(nt, 0.0), wprime(nt), P(nt);
  double worst_rad = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t k = 1; k <= nt; ++k)
      dPhi[i] += static_cast<double>(k) * bphi[k] * std::cos(static_cast<double>(k) * g.theta(i));
    P[i] = std::sqrt(Phi[i] * Phi[i] + 1.0 / (kappa * kappa));
    const double rad = E[i] - dPhi[i] * dPhi[i] / (1.0 + kappa * kappa * Phi[i] * Phi[i]);
    if (rad < -1e-10 * E[i]) worst_rad = std::min(worst_rad, rad / E[i]);
    wprime[i] = std::sqrt(std::max(0.0, rad)) / P[i];
  }
  if (worst_rad < 0.0)
    throw SolverError("profile closure failure: meridian speed equation has relative residual " +
                      std::to_string(worst_rad));
  const auto cw = detail::sine_coefficients(g, wprime);
  std::vector<double> w(nt, 0.0);
  double wpi = 0.0;
  for (std::size_t k = 1; k <= nt; ++k) {
    const double kk = static_cast<double>(k);
    if (k % 2 == 1) wpi += 2.0 * cw[k] / kk;
    for (std::size_t i = 0; i < nt; ++i) w[i] += cw[k] * (1.0 - std::cos(kk * g.theta(i))) / kk;
  }
  const double wmid = 0.5 * wpi;

  EmbeddedSurface es;
  es.grid = g;
  es.kappa = kappa;
  es.strategy = "axisymmetric";
  es.metric = spec.metric;
  es.X.resize(g.size());
  std::vector<FourVector> Xt(g.size()), Xp(g.size());
  for (std::size_t i = 0; i < nt; ++i) {
    const double sw = std::sinh(w[i] - wmid), cw_ = std::cosh(w[i] - wmid);
    const double dP = Phi[i] * dPhi[i] / P[i];
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const double cp = std::cos(g.psi(j)), sp = std::sin(g.psi(j));
      const std::size_t k = g.index(i, j);
      es.X[k] = {-P[i] * sw, Phi[i] * cp, Phi[i] * sp, P[i] * cw_};
      Xt[k] = {-dP * sw - P[i] * cw_ * wprime[i], dPhi[i] * cp, dPhi[i] * sp,
               dP * cw_ + P[i] * sw * wprime[i]};
      Xp[k] = {0.0, -Phi[i] * sp, Phi[i] * cp, 0.0};
    }
  }
  es.N = outward_normals(es.X, Xt, Xp, kappa);
  es.defect = isometry_defect(g, es.X, es.metric);
  es.certified = es.defect < tol_defect;
  second_fundamental_form(es, sff_order);
  return es;
}

// ---------------------------------------------------------------------------
// Tier 3: general Levenberg-Marquardt solve

namespace detail {

struct IsometryResidual {
  std::vector<double> r;          // 3 per node, scaled
  std::vector<FourVector> Xt, Xp;
};

inline IsometryResidual isometry_residual(const SphereGrid& g, const std::vector<FourVector>& X,
                                          const MetricField& target, int order) {
  IsometryResidual out;
  out.Xt = diff_theta(g, X, 1, order);
  out.Xp = diff_psi(g, X, 1, order);
  out.r.resize(3 * g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Sym2& m = target[k];
    out.r[3 * k] = (lorentz_dot(out.Xt[k], out.Xt[k]) - m.tt) / m.tt;
    out.r[3 * k + 1] = (lorentz_dot(out.Xt[k], out.Xp[k]) - m.tp) / std::sqrt(m.tt * m.pp);
    out.r[3 * k + 2] = (lorentz_dot(out.Xp[k], out.Xp[k]) - m.pp) / m.pp;
  }
  return out;
}

inline double sum_sq(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

/// Undivided eighth differences in theta and psi of each spatial coordinate,
/// scaled to 1 on the odd-even mode.
/// Central first-derivative stencils annihilate the odd-even mode (-1)^k, so
/// without these rows the solve can park truncation error in that mode.
inline Eigen::SparseMatrix<double> oscillation_penalty(const SphereGrid& g, double weight) {
  static constexpr double d8[9] = {1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0};
  const std::size_t n = g.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * 3 * 9 * n);
  for (std::size_t i = 0; i < g.ntheta(); ++i)
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const std::size_t k = g.index(i, j);
      for (long o = -4; o <= 4; ++o) {
        const std::size_t kt = g.ref(static_cast<long>(i) + o, static_cast<long>(j)).idx;
        const std::size_t kp = g.ref(static_cast<long>(i), static_cast<long>(j) + o).idx;
        const double w = weight * d8[o + 4] / 256.0;
        for (int c = 0; c < 3; ++c) {
          t.emplace_back(static_cast<int>(6 * k) + c, static_cast<int>(3 * kt) + c, w);
          t.emplace_back(static_cast<int>(6 * k + 3) + c, static_cast<int>(3 * kp) + c, w);
        }
      }
    }
  Eigen::SparseMatrix<double> P(static_cast<int>(6 * n), static_cast<int>(3 * n));
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

inline Eigen::VectorXd spatial_coordinates(const std::vector<FourVector>& X) {
  Eigen::VectorXd y(static_cast<long>(3 * X.size()));
  for (std::size_t k = 0; k < X.size(); ++k)
    for (int c = 0; c < 3; ++c) y[static_cast<long>(3 * k) + c] = X[k][static_cast<std::size_t>(c)];
  return y;
}

}  // namespace detail

/// Gauss-Newton / Levenberg-Marquardt minimisation of the isometry residual
/// over spatial coordinates y of X = (y, sqrt(|y|^2 + 1/kappa^2)). The six
/// directions of SO(3,1) are removed by pinning the centroid of y and
/// penalising infinitesimal rotations of each update.
inline EmbeddedSurface embed_general(const SurfaceSpec& spec, double kappa,
                                     const EmbeddingOptions& opts,
                                     const std::vector<FourVector>* initial = nullptr) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  if (!(opts.tol_defect > 0.0)) throw InputError("tol_defect must be positive");
  const SphereGrid& g = spec.grid;
  const AdmissibilityReport adm = check_admissibility(spec, kappa);
  if (!(adm.minK > -kappa * kappa))
    throw AdmissibilityError("K > -kappa^2 fails: min K = " + std::to_string(adm.minK));
  const std::size_t n = g.size();
  const int order = opts.fd_order;

  std::vector<FourVector> X;
  if (initial != nullptr) {
    if (initial->size() != n) throw InputError("initial guess has wrong size");
    X = *initial;
  } else {
    const double R = std::sqrt(area(g, sqrt_det(spec.metric)) / (4.0 * std::numbers::pi));
    X = embed_geodesic_sphere(R, kappa, g).X;
  }

  const auto w1 = central_weights(1, order);
  const long m = static_cast<long>(w1.size() / 2);
  const double ht = g.h_theta(), hp = g.h_psi();

  auto res = detail::isometry_residual(g, X, spec.metric, order);
  const Eigen::SparseMatrix<double> P = detail::oscillation_penalty(g, opts.oscillation_weight);
  const Eigen::SparseMatrix<double> PtP = Eigen::SparseMatrix<double>(P.transpose()) * P;
  const auto total_cost = [&](const detail::IsometryResidual& rr, const std::vector<FourVector>& XX) {
    return detail::sum_sq(rr.r) + (P * detail::spatial_coordinates(XX)).squaredNorm();
  };
  double cost = total_cost(res, X);
  double lambda = 1e-3;
  int it = 0;
  std::vector<double> c0(3, 0.0);
  for (const auto& x : X) { c0[0] += x.x1; c0[1] += x.x2; c0[2] += x.x3; }

  const auto max_abs = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
  };

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_ready = false;
  while (max_abs(res.r) > 0.25 * opts.tol_defect && it < opts.max_iter) {
    // Jacobian assembly.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * 3 * 3 * 4 * static_cast<std::size_t>(m) * 3);
    for (std::size_t i = 0; i < g.ntheta(); ++i) {
      for (std::size_t j = 0; j < g.npsi(); ++j) {
        const std::size_t k = g.index(i, j);
        const Sym2& mt = spec.metric[k];
        const double s_tt = 1.0 / mt.tt, s_tp = 1.0 / std::sqrt(mt.tt * mt.pp), s_pp = 1.0 / mt.pp;
        const FourVector& a = res.Xt[k];
        const FourVector& b = res.Xp[k];
        for (long o = -m; o <= m; ++o) {
          const double w = w1[static_cast<std::size_t>(o + m)];
          if (w == 0.0) continue;
          // theta-neighbour contributes to X_theta
          const std::size_t kt = g.ref(static_cast<long>(i) + o, static_cast<long>(j)).idx;
          const std::size_t kp = g.ref(static_cast<long>(i), static_cast<long>(j) + o).idx;
          for (int c = 0; c < 3; ++c) {
            const auto dX = [&](std::size_t node) {
              FourVector e{};
              e[static_cast<std::size_t>(c)] = 1.0;
              e.t = X[node][static_cast<std::size_t>(c)] / X[node].t;
              return e;
            };
            const FourVector et = dX(kt);
            const FourVector ep = dX(kp);
            const double dt = w / ht, dp = w / hp;
            const int col_t = static_cast<int>(3 * kt) + c;
            const int col_p = static_cast<int>(3 * kp) + c;
            const int row = static_cast<int>(3 * k);
            trip.emplace_back(row, col_t, 2.0 * dt * lorentz_dot(a, et) * s_tt);
            trip.emplace_back(row + 1, col_t, dt * lorentz_dot(et, b) * s_tp);
            trip.emplace_back(row + 1, col_p, dp * lorentz_dot(a, ep) * s_tp);
            trip.emplace_back(row + 2, col_p, 2.0 * dp * lorentz_dot(b, ep) * s_pp);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> J(static_cast<int>(3 * n), static_cast<int>(3 * n));
    J.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(res.r.data(), static_cast<int>(3 * n));

    // Gauge rows: centroid of y and infinitesimal rotation of the update.
    std::vector<Eigen::Triplet<double>> gt;
    const double wg = 1.0;
    Eigen::VectorXd rg = Eigen::VectorXd::Zero(6);
    std::vector<double> cen(3, 0.0);
    for (const auto& x : X) { cen[0] += x.x1; cen[1] += x.x2; cen[2] += x.x3; }
    for (int c = 0; c < 3; ++c) rg[c] = wg * (cen[static_cast<std::size_t>(c)] - c0[static_cast<std::size_t>(c)]) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double y[3] = {X[k].x1, X[k].x2, X[k].x3};
      for (int c = 0; c < 3; ++c)
        gt.emplace_back(c, static_cast<int>(3 * k) + c, wg / static_cast<double>(n));
      // (y x d)_0 = y1 d2 - y2 d1, etc.
      const double sc = wg / static_cast<double>(n);
      gt.emplace_back(3, static_cast<int>(3 * k) + 2, sc * y[1]);
      gt.emplace_back(3, static_cast<int>(3 * k) + 1, -sc * y[2]);
      gt.emplace_back(4, static_cast<int>(3 * k) + 0, sc * y[2]);
      gt.emplace_back(4, static_cast<int>(3 * k) + 2, -sc * y[0]);
      gt.emplace_back(5, static_cast<int>(3 * k) + 1, sc * y[0]);
      gt.emplace_back(5, static_cast<int>(3 * k) + 0, -sc * y[1]);
    }
    Eigen::SparseMatrix<double> Gm(6, static_cast<int>(3 * n));
    Gm.setFromTriplets(gt.begin(), gt.end());

    // The penalty system (J'J + G'G) d = -J'r - G'rg is solved in bordered
    // form [J'J G'; G -I] so the six dense gauge rows do not fill the matrix.
    const int nn = static_cast<int>(3 * n);
    const Eigen::SparseMatrix<double> JtJ = Eigen::SparseMatrix<double>(Eigen::SparseMatrix<double>(J.transpose()) * J) + PtP;
    Eigen::VectorXd diag = JtJ.diagonal();
    for (int col = 0; col < Gm.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator itg(Gm, col); itg; ++itg)
        diag[itg.col()] += itg.value() * itg.value();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn + 6);
    rhs.head(nn) = -(J.transpose() * r) - PtP * detail::spatial_coordinates(X);
    rhs.tail(6) = -rg;

    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      std::vector<Eigen::Triplet<double>> kt;
      kt.reserve(static_cast<std::size_t>(JtJ.nonZeros()) + 2 * static_cast<std::size_t>(Gm.nonZeros()) + 3 * n + 6);
      for (int col = 0; col < JtJ.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator itj(JtJ, col); itj; ++itj)
          kt.emplace_back(static_cast<int>(itj.row()), static_cast<int>(itj.col()), itj.value());
      for (int d = 0; d < nn; ++d) kt.emplace_back(d, d, lambda * diag[d] + opts.regularization);
      for (int col = 0; col < Gm.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator itg(Gm, col); itg; ++itg) {
          kt.emplace_back(nn + static_cast<int>(itg.row()), static_cast<int>(itg.col()), itg.value());
          kt.emplace_back(static_cast<int>(itg.col()), nn + static_cast<int>(itg.row()), itg.value());
        }
      for (int d = 0; d < 6; ++d) kt.emplace_back(nn + d, nn + d, -1.0);
      Eigen::SparseMatrix<double> A(nn + 6, nn + 6);
      A.setFromTriplets(kt.begin(), kt.end());
      if (!pattern_ready) {
        solver.analyzePattern(A);
        pattern_ready = true;
      }
      solver.factorize(A);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(rhs);
      std::vector<FourVector> Xn(n);
      for (std::size_t k = 0; k < n; ++k)
        Xn[k] = lift_to_hyperboloid(X[k].x1 + delta[static_cast<int>(3 * k)],
                                    X[k].x2 + delta[static_cast<int>(3 * k + 1)],
                                    X[k].x3 + delta[static_cast<int>(3 * k + 2)], kappa);
      auto resn = detail::isometry_residual(g, Xn, spec.metric, order);
      const double cn = total_cost(resn, Xn);
      if (cn < cost) {
        X = std::move(Xn);
        res = std::move(resn);
        cost = cn;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    ++it;
    if (!accepted) break;
  }

  EmbeddedSurface es;
  es.grid = g;
  es.kappa = kappa;
  es.strategy = "general";
  es.metric = spec.metric;
  es.X = std::move(X);
  es.iterations = it;
  es.N = outward_normals(es.X, res.Xt, res.Xp, kappa);
  es.defect = metric_defect(induced_metric(g, es.X, order), spec.metric);
  es.certified = es.defect < opts.tol_defect;
  try {
    second_fundamental_form(es, opts.sff_order);
  } catch (const AdmissibilityError&) {
    es.convex = false;
    es.certified = false;
  }
  if (!es.convex) es.certified = false;
  return es;
}

/// Dispatch on the requested strategy.
inline EmbeddedSurface embed(const SurfaceSpec& spec, double kappa, const EmbeddingOptions& opts) {
  switch (opts.strategy) {
    case EmbeddingStrategy::geodesic_sphere: {
      if (spec.preset_name != "round_sphere")
        throw AdmissibilityError("geodesic_sphere strategy needs the round_sphere preset");
      return embed_geodesic_sphere(spec.preset_params.at("R"), kappa, spec.grid, opts.sff_order);
    }
    case EmbeddingStrategy::axisymmetric:
      return embed_axisymmetric(spec, kappa, opts.sff_order, opts.tol_defect);
    case EmbeddingStrategy::general:
      return embed_general(spec, kappa, opts);
  }
  throw InputError("unknown embedding strategy");
}

/// One row per node: theta psi x1 x2 x3 t N1 N2 N3 Nt lam1 lam2.
inline void write_embedding_tsv(const std::string& path, const EmbeddedSurface& es) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(17);
  out << "theta\tpsi\tx1\tx2\tx3\tt\tN1\tN2\tN3\tNt\tlam1\tlam2\n";
  const SphereGrid& g = es.grid;
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      const std::size_t k = g.index(i, j);
      const auto& x = es.X[k];
      const auto& nn = es.N[k];
      out << g.theta(i) << '\t' << g.psi(j) << '\t' << x.x1 << '\t' << x.x2 << '\t' << x.x3
          << '\t' << x.t << '\t' << nn.x1 << '\t' << nn.x2 << '\t' << nn.x3 << '\t' << nn.t
          << '\t' << es.lam1[k] << '\t' << es.lam2[k] << '\n';
    }
  }
}

/// Read X and N back from an embedding table written by write_embedding_tsv.
inline void read_embedding_tsv(const std::string& path, EmbeddedSurface& es) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string header;
  std::getline(in, header);
  const std::size_t n = es.grid.size();
  es.X.resize(n);
  es.N.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double th, ps, l1, l2;
    auto& x = es.X[k];
    auto& nn = es.N[k];
    if (!(in >> th >> ps >> x.x1 >> x.x2 >> x.x3 >> x.t >> nn.x1 >> nn.x2 >> nn.x3 >> nn.t >> l1 >> l2))
      throw InputError(path + ": truncated embedding table");
  }
}

}  // namespace qlm
