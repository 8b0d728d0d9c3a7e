#pragma once

// Constant spinors on H^3_{-kappa^2} in a fixed global trivialization, the
// Killing spinor family, its square norm, and the quadratic map onto the
// future light cone.

#include <array>
#include <cmath>
#include <complex>

#include "qlm/errors.hpp"
#include "qlm/minkowski.hpp"

namespace qlm {

using cplx = std::complex<double>;

struct Spinor {
  cplx a1{0.0, 0.0};
  cplx a2{0.0, 0.0};

  double norm_sq() const { return std::norm(a1) + std::norm(a2); }
};

inline Spinor operator*(cplx s, const Spinor& a) { return {s * a.a1, s * a.a2}; }

/// Hermitian product <x, y> = x1 conj(y1) + x2 conj(y2).
inline cplx hermitian(const Spinor& x, const Spinor& y) {
  return x.a1 * std::conj(y.a1) + x.a2 * std::conj(y.a2);
}

using Mat2c = std::array<std::array<cplx, 2>, 2>;

inline Spinor apply(const Mat2c& m, const Spinor& a) {
  return {m[0][0] * a.a1 + m[0][1] * a.a2, m[1][0] * a.a1 + m[1][1] * a.a2};
}

inline Mat2c matmul(const Mat2c& a, const Mat2c& b) {
  Mat2c c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

/// Clifford matrices for the orthonormal basis E1, E2, E3, E0 of R^{3,1}.
struct CliffordRep {
  Mat2c c_E1;
  Mat2c c_E2;
  Mat2c c_E3;
  Mat2c c_E0;

  const Mat2c& spatial(int i) const { return i == 0 ? c_E1 : i == 1 ? c_E2 : c_E3; }

  /// Largest entry of c_i c_j + c_j c_i + 2 delta_ij I over i, j in {1,2,3}.
  double anticommutator_defect() const {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const Mat2c ab = matmul(spatial(i), spatial(j));
        const Mat2c ba = matmul(spatial(j), spatial(i));
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < 2; ++c) {
            cplx v = ab[r][c] + ba[r][c];
            if (i == j && r == c) v += 2.0;
            worst = std::max(worst, std::abs(v));
          }
        }
      }
    }
    return worst;
  }
};

inline const CliffordRep& clifford() {
  static const CliffordRep rep = [] {
    const cplx i{0.0, 1.0};
    CliffordRep c{
        {{{i, 0.0}, {0.0, -i}}},
        {{{0.0, i}, {i, 0.0}}},
        {{{0.0, 1.0}, {-1.0, 0.0}}},
        {{{i, 0.0}, {0.0, i}}},
    };
    if (c.anticommutator_defect() > 1e-14) throw SolverError("Clifford relations violated");
    return c;
  }();
  return rep;
}

/// Killing spinor phi'_{0,a} evaluated at geodesic polar coordinates (r', theta, psi).
inline Spinor killing_spinor(const Spinor& a, double r_prime, double theta, double psi,
                             double kappa) {
  const double half = 0.5 * kappa * r_prime;
  const cplx ep = std::exp(cplx{half, 0.5 * psi});
  const cplx em = std::exp(cplx{half, -0.5 * psi});
  const cplx fp = std::exp(cplx{-half, 0.5 * psi});
  const cplx fm = std::exp(cplx{-half, -0.5 * psi});
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  return {ep * c * a.a1 + em * s * a.a2, -fp * s * a.a1 + fm * c * a.a2};
}

/// Light-cone image of a constant spinor, written out componentwise.
inline FourVector zeta(const Spinor& a) {
  const double n1 = std::norm(a.a1);
  const double n2 = std::norm(a.a2);
  const cplx m = a.a1 * std::conj(a.a2);
  // a1 conj(a2) + conj(a1) a2 = 2 Re m ; sqrt(-1) (a1 conj(a2) - conj(a1) a2) = -2 Im m
  return {-(n1 - n2), -2.0 * m.real(), 2.0 * m.imag(), n1 + n2};
}

/// The same map through the Clifford representation:
/// zeta = i ( <c1 a,a> E1 + <c2 a,a> E2 + <c3 a,a> E3 - <c0 a,a> E0 ).
inline FourVector zeta_clifford(const Spinor& a) {
  const CliffordRep& c = clifford();
  const cplx i{0.0, 1.0};
  const auto coeff = [&](const Mat2c& m) { return i * hermitian(apply(m, a), a); };
  return {coeff(c.c_E1).real(), coeff(c.c_E2).real(), coeff(c.c_E3).real(),
          -coeff(c.c_E0).real()};
}

/// Square norm of the Killing spinor at X: -kappa X . zeta(a).
inline double killing_norm_sq(const Spinor& a, const HyperboloidPoint& x, double tol = 1e-8) {
  if (!x.valid(tol)) throw InputError("killing_norm_sq: point is off the hyperboloid");
  return -x.kappa * lorentz_dot(x.p, zeta(a));
}

/// Expanded trigonometric form of |phi'_{0,a}|^2 in (r', theta, psi).
inline double killing_norm_sq_expanded(const Spinor& a, double r_prime, double theta,
                                       double psi, double kappa) {
  const double n1 = std::norm(a.a1);
  const double n2 = std::norm(a.a2);
  const cplx m = a.a1 * std::conj(a.a2);
  const double sh = std::sinh(kappa * r_prime);
  const double ch = std::cosh(kappa * r_prime);
  const double st = std::sin(theta);
  return (n1 + n2) * ch + (n1 - n2) * sh * std::cos(theta) +
         2.0 * m.real() * sh * st * std::cos(psi) - 2.0 * m.imag() * sh * std::sin(psi) * st;
}

}  // namespace qlm
