#include <gtest/gtest.h>

#include <random>

#include "qlm/spinor.hpp"

using namespace qlm;

namespace {

Spinor random_spinor(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  return {{nd(rng), nd(rng)}, {nd(rng), nd(rng)}};
}

}  // namespace

TEST(Clifford, Relations) {
  const auto& c = clifford();
  EXPECT_LT(c.anticommutator_defect(), 1e-15);
  // c0 commutes with the spatial generators and squares to -1
  const Mat2c sq = matmul(c.c_E0, c.c_E0);
  EXPECT_NEAR(std::abs(sq[0][0] + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sq[1][1] + 1.0), 0.0, 1e-15);
}

TEST(Zeta, TwoCodePathsAgree) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Spinor a = random_spinor(rng);
    const FourVector z = zeta(a), zc = zeta_clifford(a);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(z[c], zc[c], 1e-12 * (1.0 + std::abs(z[c])));
  }
}

TEST(Zeta, IsFutureNull) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const FourVector z = zeta(random_spinor(rng));
    EXPECT_NEAR(lorentz_dot(z, z), 0.0, 1e-12 * z.t * z.t);
    EXPECT_GT(z.t, 0.0);
  }
  // zeta(1, 0) points along -E1
  const FourVector z = zeta(Spinor{{1, 0}, {0, 0}});
  EXPECT_EQ(z, (FourVector{-1, 0, 0, 1}));
}

TEST(Zeta, QuadraticInTheSpinor) {
  std::mt19937_64 rng(7);
  const Spinor a = random_spinor(rng);
  const FourVector z = zeta(a), z3 = zeta(cplx{0.0, 3.0} * a);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(z3[c], 9.0 * z[c], 1e-12 * (1.0 + std::abs(z3[c])));
}

TEST(KillingNorm, ThreeFormsAgree) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Spinor a = random_spinor(rng);
    const double kappa = 0.2 + 2.0 * U(rng), r = 3.0 * U(rng) / kappa;
    const double th = std::numbers::pi * U(rng), ps = 2.0 * std::numbers::pi * U(rng);
    const double direct = killing_spinor(a, r, th, ps, kappa).norm_sq();
    const double expanded = killing_norm_sq_expanded(a, r, th, ps, kappa);
    const double lorentz = killing_norm_sq(a, polar_param(r, th, ps, kappa));
    EXPECT_NEAR(direct, expanded, 1e-10 * direct);
    EXPECT_NEAR(direct, lorentz, 1e-10 * direct);
  }
}

TEST(KillingNorm, RejectsOffShellPoint) {
  EXPECT_THROW(killing_norm_sq(Spinor{{1, 0}, {0, 0}}, HyperboloidPoint{{0, 0, 0, 3.0}, 1.0}), InputError);
}
