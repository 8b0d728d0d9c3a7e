#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "qlm/flows.hpp"
#include "qlm/spinor.hpp"

using namespace qlm;

namespace {

// Radial oracle for a geodesic sphere of geodesic radius R0: the leaf at
// distance r is the geodesic sphere of radius R0 + r, so H0 = 2 kappa coth(kappa (R0 + r))
// and R^r = 2 kappa^2 / sinh^2(kappa (R0 + r)); u is constant on each leaf.
struct SphereOracle {
  double R0, kappa;

  double u_at(double u0, double r) const {
    namespace odeint = boost::numeric::odeint;
    std::vector<double> y{u0};
    auto rhs = [this](const std::vector<double>& x, std::vector<double>& dx, double s) {
      const double sh = std::sinh(kappa * (R0 + s));
      const double H0 = 2.0 * kappa * std::cosh(kappa * (R0 + s)) / sh;
      const double Rr = 2.0 * kappa * kappa / (sh * sh);
      dx[0] = (x[0] - x[0] * x[0] * x[0]) * (Rr + 6.0 * kappa * kappa) / (2.0 * H0);
    };
    odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-14, 1e-14),
                               rhs, y, 0.0, r, 1e-3 / kappa);
    return y[0];
  }

  // v = exp(3 kappa r)(u - 1) solves v' = v (3 kappa - u (u + 1) F), F = (R^r + 6 kappa^2)/(2 H0).
  double v_inf(double u0, double r_end) const {
    namespace odeint = boost::numeric::odeint;
    std::vector<double> y{u0 - 1.0};
    auto rhs = [this](const std::vector<double>& x, std::vector<double>& dx, double s) {
      const double sh = std::sinh(kappa * (R0 + s));
      const double H0 = 2.0 * kappa * std::cosh(kappa * (R0 + s)) / sh;
      const double F = (2.0 * kappa * kappa / (sh * sh) + 6.0 * kappa * kappa) / (2.0 * H0);
      const double u = 1.0 + std::exp(-3.0 * kappa * s) * x[0];
      dx[0] = x[0] * (3.0 * kappa - u * (u + 1.0) * F);
    };
    odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::vector<double>>>(1e-14, 1e-14),
                               rhs, y, 0.0, r_end, 1e-3 / kappa);
    return y[0];
  }
};

double max_u_error(const EmbeddedSurface& es, const USolution& sol, const SphereOracle& o, double u0) {
  double e = 0.0;
  const auto& s = sol.v.schedule;
  for (std::size_t k = 1; k + 1 < s.size(); k += 5) {
    const double ref = o.u_at(u0, s.r(k));
    for (double u : u_on_leaf(sol.v, k)) e = std::max(e, std::abs(u - ref));
  }
  (void)es;
  return e;
}

}  // namespace

TEST(UFlow, SphereMatchesRadialOdeAndConvergesInTime) {
  const double kappa = 1.0, R0 = 1.0, c = 0.8;
  const auto es = embed_geodesic_sphere(R0, kappa, SphereGrid(16, 16), 6);
  const SphereOracle o{std::asinh(kappa * R0) / kappa, kappa};  // R0 is the intrinsic radius
  std::vector<double> err;
  for (std::size_t steps : {100u, 200u, 400u}) {
    Field calH(es.grid.size());
    for (std::size_t i = 0; i < calH.size(); ++i) calH[i] = c * (es.lam1[i] + es.lam2[i]);
    const auto sol = solve_u(es, calH, make_schedule(kappa, steps, 8.0));
    err.push_back(max_u_error(es, sol, o, 1.0 / c));
  }
  EXPECT_LT(err.back(), 2e-6);
  EXPECT_GT(std::log2(err[1] / err[2]), 1.7);
}

TEST(UFlow, SphereAsymptoticCoefficient) {
  const double kappa = 0.5, R0 = 2.0, c = 1.1;
  const auto es = embed_geodesic_sphere(R0, kappa, SphereGrid(16, 16), 6);
  const SphereOracle o{std::asinh(kappa * R0) / kappa, kappa};
  Field calH(es.grid.size());
  for (std::size_t i = 0; i < calH.size(); ++i) calH[i] = c * (es.lam1[i] + es.lam2[i]);
  const auto sol = solve_u(es, calH, make_schedule(kappa, 400, 8.0 / kappa));
  const double ref = o.v_inf(1.0 / c, 40.0 / kappa);
  for (double v : sol.v_inf) EXPECT_NEAR(v, ref, 1e-4 * std::abs(ref));
  EXPECT_LT(ref, 0.0);
}

TEST(UFlow, MatchingMeanCurvatureIsAFixedPoint) {
  const SphereGrid g(24, 24);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, 1.0, 4);
  Field H0(g.size());
  for (std::size_t i = 0; i < H0.size(); ++i) H0[i] = es.lam1[i] + es.lam2[i];
  const auto sol = solve_u(es, H0, make_schedule(1.0, 50, 8.0));
  for (const auto& leaf : sol.v.values)
    for (double v : leaf) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(UFlow, RejectsNonPositiveMeanCurvature) {
  const auto es = embed_geodesic_sphere(1.0, 1.0, SphereGrid(8, 8), 4);
  Field calH(es.grid.size(), 1.0);
  calH[3] = 0.0;
  EXPECT_THROW(solve_u(es, calH, make_schedule(1.0, 10, 8.0)), AdmissibilityError);
}

TEST(Barrier, ClosedFormSolvesItsOde) {
  const SphereGrid g(24, 24);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, 1.0, 4);
  std::vector<double> rs;
  for (int k = 0; k <= 80; ++k) rs.push_back(0.1 * k);
  for (double f0 : {0.6, 1.0, 1.4}) {
    const Barrier b = barrier_ode(es, f0, rs);
    EXPECT_LT(barrier_residual(b), 1e-10);
    EXPECT_NEAR(b.f.front(), f0, 1e-14);
    EXPECT_NEAR(b.f.back(), 1.0, 1e-3);
  }
}

TEST(Barrier, BoundsHoldForVaryingMeanCurvature) {
  const SphereGrid g(24, 24);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, 1.0, 4);
  Field calH(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    calH[i] = (es.lam1[i] + es.lam2[i]) * (1.0 + 0.3 * std::cos(3.0 * g.theta(i / g.npsi())));
  const auto sol = solve_u(es, calH, make_schedule(1.0, 200, 8.0));
  const auto c = check_barriers(es, sol.v);
  EXPECT_TRUE(c.lower_applicable);
  EXPECT_TRUE(c.upper_applicable);
  EXPECT_TRUE(c.lower_ok) << c.lower_margin;
  EXPECT_TRUE(c.upper_ok) << c.upper_margin;
}

TEST(Decay, FitRecoversExponent) {
  std::vector<double> r, y;
  for (int k = 0; k <= 50; ++k) {
    r.push_back(0.2 * k);
    y.push_back(3.0 * std::exp(-2.5 * r.back()));
  }
  EXPECT_NEAR(fit_decay_exponent(r, y, 2.0, 10.0), 2.5, 1e-12);
}

// With u = 1, W = -kappa X_r . zeta(a) exp(-kappa r) solves the flow exactly; its
// limit is -gamma0 . zeta(a) / 2.
TEST(WFlow, KillingNormIsExactForUnitU) {
  const double kappa = 1.0;
  const SphereGrid g(32, 32);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, kappa, 6);
  const auto sched = make_schedule(kappa, 100, 8.0);
  const FlowField one = unit_u(sched, g.size());
  const FourVector z = zeta(Spinor{{0.6, 0.2}, {-0.3, 0.7}});
  const auto gm = gamma0(es);
  Field term(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) term[i] = -0.5 * lorentz_dot(gm[i], z);
  const auto sol = solve_W_scalar(es, one, term);
  double e = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < sched.size(); k += 10) {
    const FoliationFrame f = frame_at_q(es, sched.q[k]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double exact = -kappa * lorentz_dot(f.X_tilde[i], z);
      e = std::max(e, std::abs(sol.Wt[0].values[k][i] - exact));
      scale = std::max(scale, std::abs(exact));
    }
  }
  EXPECT_LT(e / scale, 1e-5);
  for (const auto& leaf : sol.Wt[0].values)
    for (double w : leaf) EXPECT_GE(w, 0.0);
}

TEST(WFlow, LinearInTerminalData) {
  const SphereGrid g(16, 16);
  const auto spec = make_preset("spheroid", {{"a", 1.0}, {"c", 0.8}}, g);
  const auto es = embed_axisymmetric(spec, 1.0, 4);
  Field calH(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) calH[i] = 0.9 * (es.lam1[i] + es.lam2[i]);
  const auto u = solve_u(es, calH, make_schedule(1.0, 60, 8.0));
  Field a(g.size()), b(g.size()), ab(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    a[i] = std::sin(0.1 * static_cast<double>(i));
    b[i] = std::cos(0.05 * static_cast<double>(i)) + 2.0;
    ab[i] = 2.0 * a[i] - 3.0 * b[i];
  }
  const auto sol = solve_W(es, u.v, {a, b, ab});
  for (std::size_t k = 0; k < u.v.schedule.size(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double lin = 2.0 * sol.Wt[0].values[k][i] - 3.0 * sol.Wt[1].values[k][i];
      EXPECT_NEAR(sol.Wt[2].values[k][i], lin, 1e-9 * (1.0 + std::abs(lin)));
    }
}
