#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "principal_data.hpp"
#include "qlm/foliation.hpp"

using namespace qlm;

namespace {

std::vector<double> radii(double r_end, int count) {
  std::vector<double> r;
  for (int i = 0; i <= count; ++i) r.push_back(r_end * i / count);
  return r;
}

}  // namespace

TEST(Schedule, UniformInTAndEndsAtInfinity) {
  const auto s = make_schedule(2.0, 40, 4.0);
  EXPECT_EQ(s.size(), 41u);
  EXPECT_EQ(s.q.front(), 1.0);
  EXPECT_EQ(s.q.back(), 0.0);
  EXPECT_EQ(s.r(0), 0.0);
  EXPECT_TRUE(std::isinf(s.r(40)));
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_NEAR(s.t(k) - s.t(k - 1), 1.0 / (8.0 * 40), 1e-15);
  EXPECT_NEAR(q_of_r(s.r(7), 2.0), s.q[7], 1e-15);
  EXPECT_THROW(make_schedule(0.0, 40, 4.0), InputError);
}

TEST(ClosedForms, AgreeWithRiccatiOracle) {
  for (double kappa : {0.5, 1.0, 3.0}) {
    const auto es = qlm::testing::random_principal_data(SphereGrid(8, 8), kappa, 17);
    const auto e = qlm::testing::closed_form_vs_oracle(es, radii(5.0 / kappa, 25));
    EXPECT_LT(e.lambda, 1e-11);
    EXPECT_LT(e.metric, 1e-11);
    EXPECT_LT(e.H0, 1e-11);
    EXPECT_LT(e.Rr, 1e-11);
  }
}

TEST(ClosedForms, GeneralDimensionScalarCurvature) {
  // a round sphere in H^n: all mu equal, R = (n-1)(n-2)(lambda^2 - kappa^2)
  const double kappa = 0.7, mu = 0.9, r = 0.4;
  for (std::size_t dim : {2u, 3u, 5u}) {
    const std::vector<double> m(dim, mu);
    const double lam = lambda_closed(mu, kappa, r);
    const double n = static_cast<double>(dim) + 1.0;
    EXPECT_NEAR(scalar_curvature_closed(m, kappa, r), (n - 1) * (n - 2) * (lam * lam - kappa * kappa), 1e-12);
    EXPECT_NEAR(mean_curvature_closed(m, kappa, r), static_cast<double>(dim) * lam, 1e-12);
  }
  EXPECT_NEAR(stretch_closed(mu, kappa, 0.0), 1.0, 1e-15);
}

TEST(Leaves, LimitsAtLargeDistance) {
  const double kappa = 1.3;
  const auto es = embed_geodesic_sphere(1.0, kappa, SphereGrid(16, 16), 6);
  const FoliationFrame f = frame_at(es, 10.0 / kappa);
  for (std::size_t k = 0; k < es.grid.size(); ++k) {
    EXPECT_LT(std::abs(f.H0[k] - 2.0 * kappa), 1e-6);
    EXPECT_LT(std::abs(f.Rr(k)), 1e-6);
  }
  const FoliationFrame inf = frame_at_q(es, 0.0);
  for (std::size_t k = 0; k < es.grid.size(); ++k) EXPECT_DOUBLE_EQ(inf.H0[k], 2.0 * kappa);
}

TEST(Leaves, LimitMetricIsGaussMapPullback) {
  const double kappa = 1.0;
  const SphereGrid g(64, 64);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, kappa, 6);
  const MetricField lim = limit_metric(es);
  const MetricField far = frame_at(es, 12.0 / kappa).g_tilde;
  const MetricField pull = induced_metric(g, gauss_map(es), 6);
  double d_far = 0.0, d_pull = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    d_far = std::max(d_far, (far[k] - lim[k]).frobenius() / lim[k].frobenius());
    d_pull = std::max(d_pull, (0.25 / (kappa * kappa) * pull[k] - lim[k]).frobenius() / lim[k].frobenius());
  }
  EXPECT_LT(d_far, 1e-9);
  EXPECT_LT(d_pull, 1e-5);
}

TEST(Leaves, NormalizedEmbeddingApproachesHalfGaussMap) {
  const double kappa = 0.8;
  const auto es = embed_geodesic_sphere(1.5, kappa, SphereGrid(16, 16), 6);
  const auto gm = gauss_map(es);
  std::vector<double> ratio;
  for (double r : {2.0, 4.0, 6.0, 8.0}) {
    const FoliationFrame f = frame_at(es, r / kappa);
    double d = 0.0;
    for (std::size_t k = 0; k < gm.size(); ++k) d = std::max(d, component_norm(kappa * f.X_tilde[k] - 0.5 * gm[k]));
    ratio.push_back(d / std::exp(-2.0 * r));
  }
  for (double c : ratio) EXPECT_LT(c, 2.0 * ratio.front() + 1e-12);
  EXPECT_NEAR(ratio.back() / ratio.front(), 1.0, 0.05);
}

TEST(Leaves, LeavesStayOnTheHyperboloid) {
  const double kappa = 1.0;
  const auto es = embed_geodesic_sphere(1.0, kappa, SphereGrid(16, 16), 6);
  for (double r : {0.0, 0.5, 3.0}) {
    const FoliationFrame f = frame_at(es, r);
    for (std::size_t k = 0; k < es.grid.size(); ++k) {
      const FourVector x = f.X_r(k);
      EXPECT_NEAR(kappa * kappa * lorentz_dot(x, x), -1.0, 1e-9 * std::cosh(2 * r));
    }
  }
}

TEST(Laplacian, SecondOrderIsConservativeMMatrix) {
  const SphereGrid g(24, 24);
  const auto spec = make_preset("perturbed_sphere", {{"eps", 0.1}, {"seed", 2}}, g);
  const auto op = build_laplacian(g, spec.metric, 2);
  Field f(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = std::sin(0.37 * static_cast<double>(k));
  const Field lf = op.apply(f);
  double flux = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    flux += op.sqrtg[k] * lf[k];
    scale += std::abs(op.sqrtg[k] * lf[k]);
  }
  EXPECT_LT(std::abs(flux), 1e-13 * scale);
  for (double v : op.apply(Field(g.size(), 3.0))) EXPECT_NEAR(v, 0.0, 1e-9);
  // conformal metric: no cross terms, so off-diagonals are nonnegative
  for (int c = 0; c < op.L.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.L, c); it; ++it)
      if (it.row() != it.col()) EXPECT_GE(it.value(), 0.0);
      else EXPECT_LT(it.value(), 0.0);
}

// Delta_S z = -H nu_z for the spheroid (sin t cos p, sin t sin p, c cos t), with H = k1 + k2.
TEST(Laplacian, ConvergesOnSpheroidCoordinate) {
  const double a = 1.0, c = 0.8;
  for (int order : {2, 4}) {
    std::vector<double> err;
    for (std::size_t n : {32u, 64u}) {
      const SphereGrid g(n, n);
      const auto spec = make_preset("spheroid", {{"a", a}, {"c", c}}, g);
      const Field H = euclidean_mean_curvature(spec);
      Field z(g.size());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) z[g.index(i, j)] = c * std::cos(g.theta(i));
      const Field lz = build_laplacian(g, spec.metric, order).apply(z);
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double st = std::sin(g.theta(i)), ct = std::cos(g.theta(i));
        const double nu_z = a * ct / std::sqrt(c * c * st * st + a * a * ct * ct);
        for (std::size_t j = 0; j < n; ++j) e = std::max(e, std::abs(lz[g.index(i, j)] + H[g.index(i, j)] * nu_z));
      }
      err.push_back(e);
    }
    EXPECT_GT(std::log2(err[0] / err[1]), order - 0.3) << "order " << order;
  }
}

TEST(Laplacian, SphereEigenfunction) {
  const SphereGrid g(64, 64);
  const double R = 1.7;
  const auto op = build_laplacian(g, metric_round_sphere(g, R), 4);
  Field y(g.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i)
    for (std::size_t j = 0; j < g.npsi(); ++j) y[g.index(i, j)] = std::sin(g.theta(i)) * std::sin(g.psi(j));
  const Field ly = op.apply(y);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(ly[k], -2.0 / (R * R) * y[k], 1e-5);
}
