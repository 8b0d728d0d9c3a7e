#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qlm/minkowski.hpp"

using namespace qlm;

TEST(Lorentz, DotSignature) {
  const FourVector e1{1, 0, 0, 0}, e0{0, 0, 0, 1};
  EXPECT_EQ(lorentz_dot(e1, e1), 1.0);
  EXPECT_EQ(lorentz_dot(e0, e0), -1.0);
  EXPECT_EQ(lorentz_dot(e1, e0), 0.0);
  const FourVector a{1, 2, 3, 4}, b{-2, 0.5, 1, 3};
  EXPECT_DOUBLE_EQ(lorentz_dot(a, b), -2 + 1 + 3 - 12);
  EXPECT_DOUBLE_EQ(lorentz_dot(a, b), lorentz_dot(b, a));
}

TEST(Lorentz, CausalClassBasics) {
  EXPECT_EQ(causal_class({0, 0, 0, 1}), CausalClass::future_timelike);
  EXPECT_EQ(causal_class({0, 0, 0, -1}), CausalClass::past_timelike);
  EXPECT_EQ(causal_class({1, 0, 0, 1}), CausalClass::future_null);
  EXPECT_EQ(causal_class({0, -1, 0, -1}), CausalClass::past_null);
  EXPECT_EQ(causal_class({2, 0, 0, 1}), CausalClass::spacelike);
  EXPECT_EQ(causal_class({0, 0, 0, 0}), CausalClass::zero);
  EXPECT_EQ(causal_class({1e-12, 0, 0, 0}), CausalClass::zero);
  EXPECT_EQ(to_string(CausalClass::future_null), "future_null");
}

TEST(Lorentz, CausalClassRespectsTolerance) {
  // v.v = -1e-9: null within 1e-8, timelike within 1e-10.
  const double t = std::sqrt(1.0 + 1e-9);
  const FourVector v{1, 0, 0, t};
  EXPECT_EQ(causal_class(v, 1e-8), CausalClass::future_null);
  EXPECT_EQ(causal_class(v, 1e-10), CausalClass::future_timelike);
}

TEST(Lorentz, WitnessAgreesWithClassOnRandomVectors) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int agree = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const FourVector v{U(rng), U(rng), U(rng), 2.0 * U(rng)};
    const double sq = lorentz_dot(v, v);
    // keep away from the cone, where a finite sample cannot decide
    if (std::abs(sq) < 0.05) continue;
    ++total;
    const bool fc = is_future_causal(causal_class(v));
    agree += fc == causal_witness_check(v, 4096);
  }
  EXPECT_GT(total, 1000);
  EXPECT_EQ(agree, total);
}

TEST(Lorentz, FibonacciPointsAreUnit) {
  for (const auto& p : fibonacci_sphere(64))
    EXPECT_NEAR(p[0] * p[0] + p[1] * p[1] + p[2] * p[2], 1.0, 1e-14);
  for (const auto& z : null_directions(64)) EXPECT_NEAR(lorentz_dot(z, z), 0.0, 1e-14);
}

TEST(Hyperboloid, PolarParamAndLift) {
  for (double kappa : {0.3, 1.0, 2.5})
    for (double r : {0.0, 0.7, 3.0}) {
      const auto h = polar_param(r, 0.4, 2.1, kappa);
      EXPECT_TRUE(h.valid());
      // p.p cancels two terms of size cosh^2
      EXPECT_LT(h.residual(), 1e-14 * std::cosh(2.0 * kappa * r) + 1e-15);
      // hyperbolic distance from the base point
      const FourVector o{0, 0, 0, 1.0 / kappa};
      EXPECT_NEAR(std::acosh(-kappa * kappa * lorentz_dot(h.p, o)) / kappa, r, 1e-7);
    }
  const FourVector p = lift_to_hyperboloid(0.3, -1.2, 0.5, 0.8);
  EXPECT_NEAR(lorentz_dot(p, p), -1.0 / 0.64, 1e-12);
}

TEST(Hyperboloid, RejectsOffShellPoints) {
  EXPECT_THROW(make_hyperboloid_point({0, 0, 0, 2.0}, 1.0), InputError);
  EXPECT_THROW(make_hyperboloid_point({0, 0, 0, -1.0}, 1.0), InputError);
  EXPECT_THROW(make_hyperboloid_point({0, 0, 0, 1.0}, 0.0), InputError);
  EXPECT_NO_THROW(make_hyperboloid_point({0, 0, 0, 1.0}, 1.0));
}
