#pragma once

// Minkowski space R^{3,1} with signature (+,+,+,-), time coordinate last,
// and the hyperboloid model of hyperbolic 3-space inside it.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string_view>
#include <vector>

#include "qlm/errors.hpp"

namespace qlm {

struct FourVector {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;
  double t = 0.0;

  constexpr FourVector& operator+=(const FourVector& o) {
    x1 += o.x1; x2 += o.x2; x3 += o.x3; t += o.t;
    return *this;
  }
  constexpr FourVector& operator-=(const FourVector& o) {
    x1 -= o.x1; x2 -= o.x2; x3 -= o.x3; t -= o.t;
    return *this;
  }
  constexpr FourVector& operator*=(double s) {
    x1 *= s; x2 *= s; x3 *= s; t *= s;
    return *this;
  }
  constexpr double operator[](std::size_t i) const {
    return i == 0 ? x1 : i == 1 ? x2 : i == 2 ? x3 : t;
  }
  constexpr double& operator[](std::size_t i) {
    return i == 0 ? x1 : i == 1 ? x2 : i == 2 ? x3 : t;
  }
  friend constexpr bool operator==(const FourVector&, const FourVector&) = default;
};

constexpr FourVector operator+(FourVector a, const FourVector& b) { return a += b; }
constexpr FourVector operator-(FourVector a, const FourVector& b) { return a -= b; }
constexpr FourVector operator-(const FourVector& a) { return {-a.x1, -a.x2, -a.x3, -a.t}; }
constexpr FourVector operator*(double s, FourVector a) { return a *= s; }
constexpr FourVector operator*(FourVector a, double s) { return a *= s; }

/// Lorentz product x1 y1 + x2 y2 + x3 y3 - t s.
constexpr double lorentz_dot(const FourVector& u, const FourVector& v) {
  return u.x1 * v.x1 + u.x2 * v.x2 + u.x3 * v.x3 - u.t * v.t;
}

inline double spatial_norm(const FourVector& v) {
  return std::sqrt(v.x1 * v.x1 + v.x2 * v.x2 + v.x3 * v.x3);
}

/// Euclidean norm of the four components; used for convergence diagnostics only.
inline double component_norm(const FourVector& v) {
  return std::sqrt(v.x1 * v.x1 + v.x2 * v.x2 + v.x3 * v.x3 + v.t * v.t);
}

enum class CausalClass {
  future_timelike,
  future_null,
  past_timelike,
  past_null,
  spacelike,
  zero,
};

constexpr std::string_view to_string(CausalClass c) {
  switch (c) {
    case CausalClass::future_timelike: return "future_timelike";
    case CausalClass::future_null: return "future_null";
    case CausalClass::past_timelike: return "past_timelike";
    case CausalClass::past_null: return "past_null";
    case CausalClass::spacelike: return "spacelike";
    case CausalClass::zero: return "zero";
  }
  return "unknown";
}

inline constexpr double kDefaultCausalTol = 1e-10;

/// Classify by the sign of v.v within an absolute tolerance and the sign of v.t.
inline CausalClass causal_class(const FourVector& v, double tol = kDefaultCausalTol) {
  if (std::abs(v.x1) <= tol && std::abs(v.x2) <= tol && std::abs(v.x3) <= tol &&
      std::abs(v.t) <= tol) {
    return CausalClass::zero;
  }
  const double sq = lorentz_dot(v, v);
  if (sq > tol) return CausalClass::spacelike;
  const bool null = sq >= -tol;
  if (v.t > 0.0) return null ? CausalClass::future_null : CausalClass::future_timelike;
  return null ? CausalClass::past_null : CausalClass::past_timelike;
}

/// True for future-directed time-like or null vectors.
inline bool is_future_causal(CausalClass c) {
  return c == CausalClass::future_timelike || c == CausalClass::future_null;
}

/// Deterministic quasi-uniform points on the unit 2-sphere (Fibonacci lattice).
inline std::vector<std::array<double, 3>> fibonacci_sphere(std::size_t n) {
  std::vector<std::array<double, 3>> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    pts.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
  }
  return pts;
}

/// Future null directions (y, 1) with |y| = 1 on a Fibonacci lattice.
inline std::vector<FourVector> null_directions(std::size_t n) {
  std::vector<FourVector> out;
  out.reserve(n);
  for (const auto& y : fibonacci_sphere(n)) out.push_back({y[0], y[1], y[2], 1.0});
  return out;
}

/// Sampled form of the characterization: v is future non-space-like iff
/// v . zeta <= 0 for every zeta = (y, 1), |y| = 1.
inline bool causal_witness_check(const FourVector& v, std::size_t n_samples) {
  if (n_samples < 4) n_samples = 4;
  for (const auto& z : null_directions(n_samples)) {
    if (lorentz_dot(v, z) > 0.0) return false;
  }
  return true;
}

/// A point of H^3_{-kappa^2} = { p : p.p = -1/kappa^2, p.t > 0 }.
struct HyperboloidPoint {
  FourVector p;
  double kappa = 1.0;

  /// |p.p + 1/kappa^2| scaled by kappa^2.
  double residual() const { return std::abs(lorentz_dot(p, p) * kappa * kappa + 1.0); }
  bool valid(double tol = 1e-8) const { return p.t > 0.0 && residual() <= tol; }
};

/// Validating constructor; throws InputError when p is off the hyperboloid.
inline HyperboloidPoint make_hyperboloid_point(const FourVector& p, double kappa,
                                               double tol = 1e-8) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  HyperboloidPoint h{p, kappa};
  if (!h.valid(tol)) throw InputError("point is not on the hyperboloid p.p = -1/kappa^2, t > 0");
  return h;
}

/// Geodesic polar coordinates about (0,0,0,1/kappa): r_prime is the hyperbolic
/// distance, (theta, psi) the direction with theta measured from the x1 axis.
inline HyperboloidPoint polar_param(double r_prime, double theta, double psi, double kappa) {
  const double sh = std::sinh(kappa * r_prime) / kappa;
  const double ch = std::cosh(kappa * r_prime) / kappa;
  const double st = std::sin(theta);
  return {{sh * std::cos(theta), sh * st * std::cos(psi), sh * st * std::sin(psi), ch}, kappa};
}

/// Lift of a spatial point y to the hyperboloid: (y, sqrt(|y|^2 + 1/kappa^2)).
inline FourVector lift_to_hyperboloid(double y1, double y2, double y3, double kappa) {
  return {y1, y2, y3, std::sqrt(y1 * y1 + y2 * y2 + y3 * y3 + 1.0 / (kappa * kappa))};
}

}  // namespace qlm
