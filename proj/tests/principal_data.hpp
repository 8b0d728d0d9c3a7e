#pragma once

// Test-only: random pointwise principal data (metric, frame, curvatures > kappa)
// packaged as an EmbeddedSurface without a realising embedding.

#include <cmath>
#include <numbers>
#include <random>

#include "qlm/foliation.hpp"

namespace qlm::testing {

inline EmbeddedSurface random_principal_data(const SphereGrid& g, double kappa, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  EmbeddedSurface es;
  es.grid = g;
  es.kappa = kappa;
  const std::size_t n = g.size();
  es.X.assign(n, FourVector{});
  es.N.assign(n, FourVector{});
  es.metric.resize(n);
  es.h.resize(n);
  es.lam1.resize(n);
  es.lam2.resize(n);
  es.mu1.resize(n);
  es.mu2.resize(n);
  es.frame.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double tt = 0.5 + 1.5 * U(rng), pp = 0.5 + 1.5 * U(rng);
    const Sym2 m{tt, (0.6 * U(rng) - 0.3) * std::sqrt(tt * pp), pp};
    // g-orthonormal pair from a random direction
    const double ang = 2.0 * std::numbers::pi * U(rng);
    double v0 = std::cos(ang), v1 = std::sin(ang);
    const auto gn = [&](double a, double b) { return std::sqrt(m.tt * a * a + 2 * m.tp * a * b + m.pp * b * b); };
    double s = gn(v0, v1);
    v0 /= s;
    v1 /= s;
    double w0 = -(m.tp * v0 + m.pp * v1), w1 = m.tt * v0 + m.tp * v1;
    s = gn(w0, w1);
    w0 /= s;
    w1 /= s;
    const double l2 = kappa * (1.05 + 3.0 * U(rng));
    const double l1 = l2 + 2.0 * kappa * U(rng);
    const double c1t = m.tt * v0 + m.tp * v1, c1p = m.tp * v0 + m.pp * v1;
    const double c2t = m.tt * w0 + m.tp * w1, c2p = m.tp * w0 + m.pp * w1;
    es.metric[k] = m;
    es.h[k] = {l1 * c1t * c1t + l2 * c2t * c2t, l1 * c1t * c1p + l2 * c2t * c2p, l1 * c1p * c1p + l2 * c2p * c2p};
    es.lam1[k] = l1;
    es.lam2[k] = l2;
    es.mu1[k] = std::atanh(kappa / l1) / kappa;
    es.mu2[k] = std::atanh(kappa / l2) / kappa;
    es.frame[k] = {v0, v1, w0, w1};
  }
  es.certified = true;
  es.convex = true;
  es.strategy = "synthetic";
  return es;
}

/// Max relative errors of the closed-form leaf geometry against the ODE oracle.
struct OracleErrors {
  double lambda = 0, metric = 0, H0 = 0, Rr = 0;
};

inline OracleErrors closed_form_vs_oracle(const EmbeddedSurface& es, const std::vector<double>& rs) {
  const RiccatiTrajectory tr = riccati_oracle(es, rs, 1e-30, 1e-13);  // relative control only
  OracleErrors e;
  for (std::size_t s = 0; s < rs.size(); ++s) {
    const FoliationFrame f = frame_at(es, rs[s]);
    for (std::size_t k = 0; k < es.grid.size(); ++k) {
      const double l1 = tr.lam1[s][k], l2 = tr.lam2[s][k];
      e.lambda = std::max({e.lambda, std::abs(f.lam1[k] - l1) / l1, std::abs(f.lam2[k] - l2) / l2});
      const Sym2 g = f.g(k);
      e.metric = std::max(e.metric, (g - tr.g[s][k]).frobenius() / tr.g[s][k].frobenius());
      e.H0 = std::max(e.H0, std::abs(f.H0[k] - (l1 + l2)) / (l1 + l2));
      const double y1 = tr.excess1[s][k], y2 = tr.excess2[s][k];
      const double R = 2.0 * (y1 * y2 + es.kappa * (y1 + y2));
      e.Rr = std::max(e.Rr, std::abs(f.Rr(k) - R) / std::abs(R));
    }
  }
  return e;
}

}  // namespace qlm::testing
