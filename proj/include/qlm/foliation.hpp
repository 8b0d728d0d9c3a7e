#pragma once

// Leaves of the geodesic normal foliation outside the embedded surface.
//
// Leaves are addressed by q = exp(-2 kappa r) in [0, 1]: q = 1 is the surface
// itself and q = 0 the sphere at infinity. All stored geometry is rescaled
// (metric by exp(-2 kappa r), scalar curvature by exp(2 kappa r)) so that it
// stays finite at q = 0.

#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "qlm/embedding.hpp"
#include "qlm/errors.hpp"
#include "qlm/grid.hpp"
#include "qlm/minkowski.hpp"

namespace qlm {

inline double q_of_r(double r, double kappa) { return std::exp(-2.0 * kappa * r); }
inline double r_of_q(double q, double kappa) {
  return q > 0.0 ? -std::log(q) / (2.0 * kappa) : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Closed forms, any dimension n (n - 1 principal curvatures)

inline double lambda_closed(double mu, double kappa, double r) {
  return kappa / std::tanh(kappa * (mu + r));
}

inline double mean_curvature_closed(const std::vector<double>& mu, double kappa, double r) {
  double h = 0.0;
  for (double m : mu) h += lambda_closed(m, kappa, r);
  return h;
}

inline double scalar_curvature_closed(const std::vector<double>& mu, double kappa, double r) {
  const double n = static_cast<double>(mu.size()) + 1.0;
  double s = 0.0;
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (std::size_t b = a + 1; b < mu.size(); ++b)
      s += 1.0 / (std::tanh(kappa * (mu[a] + r)) * std::tanh(kappa * (mu[b] + r)));
  return -(n - 1.0) * (n - 2.0) * kappa * kappa + 2.0 * kappa * kappa * s;
}

/// Stretch of the principal direction a: sinh(kappa(mu + r)) / sinh(kappa mu).
inline double stretch_closed(double mu, double kappa, double r) {
  return std::sinh(kappa * (mu + r)) / std::sinh(kappa * mu);
}

// ---------------------------------------------------------------------------

/// Uniform in t = -q/(4 kappa) from the surface (q = 1) to infinity (q = 0).
/// r_max only bounds finite-r diagnostics and tabulated output.
struct FoliationSchedule {
  double kappa = 1.0;
  double r_max = 8.0;
  std::vector<double> q;  // strictly decreasing, q.front() = 1, q.back() = 0

  std::size_t size() const { return q.size(); }
  double r(std::size_t k) const { return r_of_q(q[k], kappa); }
  double t(std::size_t k) const { return -q[k] / (4.0 * kappa); }
  double tau(std::size_t k) const { return q[k] / (4.0 * kappa); }
};

inline FoliationSchedule make_schedule(double kappa, std::size_t steps, double r_max) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  if (steps < 2) throw InputError("schedule needs at least 2 steps");
  if (!(r_max > 0.0)) throw InputError("r_max must be positive");
  FoliationSchedule s;
  s.kappa = kappa;
  s.r_max = r_max;
  s.q.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    s.q[k] = 1.0 - static_cast<double>(k) / static_cast<double>(steps);
  s.q.back() = 0.0;
  return s;
}

struct FoliationFrame {
  double q = 1.0;
  double r = 0.0;
  double kappa = 1.0;
  MetricField g_tilde;     // exp(-2 kappa r) g(r)
  Field sqrt_det_tilde;
  Field lam1, lam2;        // principal curvatures of the leaf
  Field H0;                // lam1 + lam2
  Field Rr_tilde;          // exp(2 kappa r) R^r
  Field e1, e2;            // (lam_a - kappa) / (kappa q) = 2 s_a / (1 - q s_a)
  std::vector<FourVector> X_tilde;  // exp(-kappa r) X_r

  double Rr(std::size_t k) const { return q * Rr_tilde[k]; }
  /// Unscaled metric; infinite at q = 0.
  Sym2 g(std::size_t k) const { return (1.0 / q) * g_tilde[k]; }
  FourVector X_r(std::size_t k) const { return (1.0 / std::sqrt(q)) * X_tilde[k]; }
};

/// Leaf at compactified distance q from the closed forms.
inline FoliationFrame frame_at_q(const EmbeddedSurface& es, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("leaf parameter q must lie in [0, 1]");
  const double kappa = es.kappa;
  const std::size_t n = es.grid.size();
  FoliationFrame f;
  f.q = q;
  f.r = r_of_q(q, kappa);
  f.kappa = kappa;
  f.g_tilde.resize(n);
  f.sqrt_det_tilde.resize(n);
  f.lam1.resize(n);
  f.lam2.resize(n);
  f.H0.resize(n);
  f.Rr_tilde.resize(n);
  f.e1.resize(n);
  f.e2.resize(n);
  f.X_tilde.resize(n);
  const double al = 0.5 * (1.0 + q);
  const double be = 0.5 * (1.0 - q) / kappa;
  for (std::size_t k = 0; k < n; ++k) {
    const double s1 = es.s1(k), s2 = es.s2(k);
    const double d1 = 1.0 - q * s1, d2 = 1.0 - q * s2;
    f.e1[k] = 2.0 * s1 / d1;
    f.e2[k] = 2.0 * s2 / d2;
    f.lam1[k] = kappa * (1.0 + q * s1) / d1;
    f.lam2[k] = kappa * (1.0 + q * s2) / d2;
    f.H0[k] = f.lam1[k] + f.lam2[k];
    f.Rr_tilde[k] = 4.0 * kappa * kappa * (s1 + s2) / (d1 * d2);
    // B^T g B with B = al I + be g^{-1} h
    const Sym2& g0 = es.metric[k];
    const Sym2& h = es.h[k];
    const Sym2 gi = g0.inverse();
    const Sym2 hgh{h.tt * (gi.tt * h.tt + gi.tp * h.tp) + h.tp * (gi.tp * h.tt + gi.pp * h.tp),
                   h.tt * (gi.tt * h.tp + gi.tp * h.pp) + h.tp * (gi.tp * h.tp + gi.pp * h.pp),
                   h.tp * (gi.tt * h.tp + gi.tp * h.pp) + h.pp * (gi.tp * h.tp + gi.pp * h.pp)};
    f.g_tilde[k] = al * al * g0 + (2.0 * al * be) * h + (be * be) * hgh;
    f.sqrt_det_tilde[k] = std::sqrt(f.g_tilde[k].det());
    f.X_tilde[k] = al * es.X[k] + be * es.N[k];
  }
  return f;
}

inline FoliationFrame frame_at(const EmbeddedSurface& es, double r) {
  if (!(r >= 0.0)) throw InputError("frame_at: r must be >= 0");
  return frame_at_q(es, q_of_r(r, es.kappa));
}

/// lim exp(-2 kappa r) g(r); equals the pull-back by the Gauss map divided by 4 kappa^2.
inline MetricField limit_metric(const EmbeddedSurface& es) { return frame_at_q(es, 0.0).g_tilde; }

// ---------------------------------------------------------------------------
// Finite-volume Laplace-Beltrami on the lat-long grid

/// Sparse L with (L f)_k = (Delta f)(node k) for the metric field m. Fluxes
/// are assembled per face, so sum_k sqrtg_k (L f)_k = 0 up to rounding and
/// constants are annihilated exactly. Pole faces carry zero flux.
///
/// order = 4 selects a pointwise fourth-order form instead (see
/// build_laplacian_pointwise4): higher accuracy, but neither exactly
/// conservative nor an M-matrix.
struct LaplaceOperator {
  Eigen::SparseMatrix<double> L;
  Field sqrtg;

  Field apply(const Field& f) const {
    const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<long>(f.size()));
    const Eigen::VectorXd y = L * x;
    return Field(y.data(), y.data() + y.size());
  }
};

inline LaplaceOperator build_laplacian_pointwise4(const SphereGrid& g, const MetricField& m);

inline LaplaceOperator build_laplacian(const SphereGrid& g, const MetricField& m, int order = 2) {
  if (order != 2 && order != 4) throw InputError("laplacian order must be 2 or 4");
  if (order == 4) return build_laplacian_pointwise4(g, m);
  const std::size_t n = g.size();
  if (m.size() != n) throw InputError("metric field does not match grid");
  const long nt = static_cast<long>(g.ntheta()), np = static_cast<long>(g.npsi());
  const double ht = g.h_theta(), hp = g.h_psi();
  Field A(n), B(n), C(n), sg(n);
  for (std::size_t k = 0; k < n; ++k) {
    sg[k] = std::sqrt(m[k].det());
    const Sym2 gi = m[k].inverse();
    A[k] = sg[k] * gi.tt;
    B[k] = sg[k] * gi.tp;
    C[k] = sg[k] * gi.pp;
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 20);
  // coef * f[col] is a term of (face flux)/h through the face from a to b:
  // it enters the divergence of a with + and of b with -.
  const auto face = [&](std::size_t a, std::size_t b, std::size_t col, double coef) {
    trip.emplace_back(static_cast<int>(a), static_cast<int>(col), coef);
    trip.emplace_back(static_cast<int>(b), static_cast<int>(col), -coef);
  };
  const auto at = [&](long i, long j) { return g.ref(i, j).idx; };
  for (long i = 0; i < nt; ++i) {
    for (long j = 0; j < np; ++j) {
      const std::size_t k = at(i, j);
      // theta face i + 1/2 (interior only): flux A f_theta + B f_psi, outward from k.
      if (i + 1 < nt) {
        const std::size_t kn = at(i + 1, j);
        const double Bf = 0.5 * (B[k] + B[kn]);
        const double Af = 0.5 * (A[k] + A[kn]);
        const double c = 1.0 / (ht * ht);
        face(k, kn, kn, Af * c);
        face(k, kn, k, -Af * c);
        const double cb = Bf / (ht * 4.0 * hp);
        face(k, kn, at(i, j + 1), cb);
        face(k, kn, at(i, j - 1), -cb);
        face(k, kn, at(i + 1, j + 1), cb);
        face(k, kn, at(i + 1, j - 1), -cb);
      }
      // psi face j + 1/2: flux B f_theta + C f_psi.
      {
        const std::size_t kn = at(i, j + 1);
        const double Bf = 0.5 * (B[k] + B[kn]);
        const double Cf = 0.5 * (C[k] + C[kn]);
        const double c = 1.0 / (hp * hp);
        face(k, kn, kn, Cf * c);
        face(k, kn, k, -Cf * c);
        const double cb = Bf / (hp * 4.0 * ht);
        face(k, kn, at(i + 1, j), cb);
        face(k, kn, at(i - 1, j), -cb);
        face(k, kn, at(i + 1, j + 1), cb);
        face(k, kn, at(i - 1, j + 1), -cb);
      }
    }
  }
  Eigen::SparseMatrix<double> D(static_cast<int>(n), static_cast<int>(n));
  D.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd inv(static_cast<long>(n));
  for (std::size_t k = 0; k < n; ++k) inv[static_cast<long>(k)] = 1.0 / sg[k];
  LaplaceOperator op;
  op.L = inv.asDiagonal() * D;
  op.sqrtg = std::move(sg);
  return op;
}

/// Expanded Laplace-Beltrami with fourth-order central differences:
///   sqrtg Delta f = A f_tt + (A_t + B_p) f_t + 2 B f_tp + C f_pp + (B_t + C_p) f_p
/// with A, B, C = sqrtg g^{ab}. Across a pole sqrtg continues with a sign
/// change, so A and C are odd and B even under the reflection; every factor
/// is smooth in that continuation and the stencil stays fourth order up to
/// the pole rows. Constants are still annihilated exactly.
inline LaplaceOperator build_laplacian_pointwise4(const SphereGrid& g, const MetricField& m) {
  const std::size_t n = g.size();
  if (m.size() != n) throw InputError("metric field does not match grid");
  Field A(n), B(n), C(n), sg(n);
  for (std::size_t k = 0; k < n; ++k) {
    sg[k] = std::sqrt(m[k].det());
    const Sym2 gi = m[k].inverse();
    A[k] = sg[k] * gi.tt;
    B[k] = sg[k] * gi.tp;
    C[k] = sg[k] * gi.pp;
  }
  const Field At = diff_theta(g, A, 1, 4, -1.0), Bt = diff_theta(g, B, 1, 4, 1.0);
  const Field Bp = diff_psi(g, B, 1, 4), Cp = diff_psi(g, C, 1, 4);
  const auto d1 = central_weights(1, 4), d2 = central_weights(2, 4);
  const long m2 = static_cast<long>(d1.size() / 2);
  const double ht = g.h_theta(), hp = g.h_psi();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 25);
  for (long i = 0; i < static_cast<long>(g.ntheta()); ++i) {
    for (long j = 0; j < static_cast<long>(g.npsi()); ++j) {
      const std::size_t k = g.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      const int row = static_cast<int>(k);
      const double inv = 1.0 / sg[k];
      const double ct = (At[k] + Bp[k]) * inv, cp = (Bt[k] + Cp[k]) * inv;
      for (long o = -m2; o <= m2; ++o) {
        const std::size_t w = static_cast<std::size_t>(o + m2);
        const int colt = static_cast<int>(g.ref(i + o, j).idx);
        const int colp = static_cast<int>(g.ref(i, j + o).idx);
        trip.emplace_back(row, colt, A[k] * inv * d2[w] / (ht * ht) + ct * d1[w] / ht);
        trip.emplace_back(row, colp, C[k] * inv * d2[w] / (hp * hp) + cp * d1[w] / hp);
        if (std::abs(B[k]) <= 1e-13 * std::sqrt(A[k] * C[k]) || d1[w] == 0.0) continue;
        for (long o2 = -m2; o2 <= m2; ++o2) {
          const std::size_t w2 = static_cast<std::size_t>(o2 + m2);
          if (d1[w2] == 0.0) continue;
          trip.emplace_back(row, static_cast<int>(g.ref(i + o, j + o2).idx),
                            2.0 * B[k] * inv * d1[w] * d1[w2] / (ht * hp));
        }
      }
    }
  }
  LaplaceOperator op;
  op.L.resize(static_cast<int>(n), static_cast<int>(n));
  op.L.setFromTriplets(trip.begin(), trip.end());
  op.sqrtg = std::move(sg);
  return op;
}

/// Delta~ on the leaf (rescaled metric); Delta_r = q Delta~.
inline LaplaceOperator laplacian(const FoliationFrame& f, const SphereGrid& g, int order = 2) {
  return build_laplacian(g, f.g_tilde, order);
}

// ---------------------------------------------------------------------------
// Independent ODE oracle

struct RiccatiTrajectory {
  std::vector<double> r;
  std::vector<Field> lam1, lam2;  // per r sample, per node
  std::vector<Field> excess1, excess2;  // lam_a - kappa, integrated directly
  std::vector<MetricField> g;     // metric from integrated principal stretches
};

/// Integrates lam' = kappa^2 - lam^2, in the form y' = -y (y + 2 kappa) for
/// y = lam - kappa so that lam - kappa keeps full relative accuracy, and
/// (log sigma)' = lam per principal direction with an adaptive Dormand-Prince stepper; sigma_a rescales the
/// orthonormal principal frame to give g(r).
inline RiccatiTrajectory riccati_oracle(const EmbeddedSurface& es, const std::vector<double>& r_samples,
                                        double abs_tol = 1e-13, double rel_tol = 1e-13) {
  using namespace boost::numeric::odeint;
  using State = std::array<double, 4>;
  const double kappa = es.kappa;
  RiccatiTrajectory out;
  out.r = r_samples;
  const std::size_t n = es.grid.size(), ns = r_samples.size();
  out.lam1.assign(ns, Field(n));
  out.lam2.assign(ns, Field(n));
  out.excess1.assign(ns, Field(n));
  out.excess2.assign(ns, Field(n));
  out.g.assign(ns, MetricField(n));
  auto rhs = [kappa](const State& x, State& dx, double) {
    dx[0] = -x[0] * (x[0] + 2.0 * kappa);
    dx[1] = -x[1] * (x[1] + 2.0 * kappa);
    dx[2] = x[0] + kappa;
    dx[3] = x[1] + kappa;
  };
  for (std::size_t k = 0; k < n; ++k) {
    State x{es.lam1[k] - kappa, es.lam2[k] - kappa, 0.0, 0.0};
    const Sym2& g0 = es.metric[k];
    const auto& fr = es.frame[k];
    // co-frame: covectors g0 e_a
    const double c1t = g0.tt * fr[0] + g0.tp * fr[1], c1p = g0.tp * fr[0] + g0.pp * fr[1];
    const double c2t = g0.tt * fr[2] + g0.tp * fr[3], c2p = g0.tp * fr[2] + g0.pp * fr[3];
    double r_now = 0.0;
    auto stepper = make_controlled(abs_tol, rel_tol, runge_kutta_dopri5<State>());
    for (std::size_t s = 0; s < ns; ++s) {
      if (r_samples[s] < r_now) throw InputError("riccati_oracle: r samples must be increasing");
      if (r_samples[s] > r_now) {
        try {
          integrate_adaptive(stepper, rhs, x, r_now, r_samples[s], 1e-3);
        } catch (const std::exception& e) {
          throw SolverError("riccati_oracle failed at node " + std::to_string(k) + ", r = " +
                            std::to_string(r_now) + ": " + e.what());
        }
        r_now = r_samples[s];
      }
      out.excess1[s][k] = x[0];
      out.excess2[s][k] = x[1];
      out.lam1[s][k] = kappa + x[0];
      out.lam2[s][k] = kappa + x[1];
      const double a1 = std::exp(2.0 * x[2]), a2 = std::exp(2.0 * x[3]);
      out.g[s][k] = {a1 * c1t * c1t + a2 * c2t * c2t, a1 * c1t * c1p + a2 * c2t * c2p,
                     a1 * c1p * c1p + a2 * c2p * c2p};
    }
  }
  return out;
}

}  // namespace qlm
