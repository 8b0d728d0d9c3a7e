#pragma once

// Latitude-longitude grid on a sphere-topology surface.
//
// Nodes sit at cell centres theta_i = (i + 1/2) pi / Ntheta (poles excluded)
// and psi_j = 2 pi j / Npsi. Stencils that reach past a pole use the
// reflection (-theta, psi) ~ (theta, psi + pi), which requires Npsi even.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlm/errors.hpp"

namespace qlm {

using Field = std::vector<double>;

class SphereGrid {
 public:
  SphereGrid() = default;
  SphereGrid(std::size_t ntheta, std::size_t npsi) : ntheta_(ntheta), npsi_(npsi) {
    if (ntheta < 8 || npsi < 8) throw InputError("grid needs ntheta >= 8 and npsi >= 8");
    if (npsi % 2 != 0) throw InputError("npsi must be even (pole reflection)");
  }

  std::size_t ntheta() const { return ntheta_; }
  std::size_t npsi() const { return npsi_; }
  std::size_t size() const { return ntheta_ * npsi_; }
  double h_theta() const { return std::numbers::pi / static_cast<double>(ntheta_); }
  double h_psi() const { return 2.0 * std::numbers::pi / static_cast<double>(npsi_); }
  double theta(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h_theta(); }
  double psi(std::size_t j) const { return static_cast<double>(j) * h_psi(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * npsi_ + j; }

  /// Node index and sign for a possibly out-of-range (i, j): theta rows past
  /// a pole are reflected with a half-turn in psi.
  struct Ref {
    std::size_t idx;
    bool reflected;
  };
  Ref ref(long i, long j) const {
    const long nt = static_cast<long>(ntheta_);
    const long np = static_cast<long>(npsi_);
    bool reflected = false;
    if (i < 0) {
      i = -1 - i;
      j += np / 2;
      reflected = true;
    } else if (i >= nt) {
      i = 2 * nt - 1 - i;
      j += np / 2;
      reflected = true;
    }
    j = ((j % np) + np) % np;
    return {static_cast<std::size_t>(i) * npsi_ + static_cast<std::size_t>(j), reflected};
  }

  friend bool operator==(const SphereGrid&, const SphereGrid&) = default;

 private:
  std::size_t ntheta_ = 0;
  std::size_t npsi_ = 0;
};

/// Central finite-difference weights (offsets -m..m) for derivative `deriv`
/// (1 or 2) at accuracy `order` (2, 4, 6 or 8).
inline std::vector<double> central_weights(int deriv, int order) {
  if (deriv == 1) {
    switch (order) {
      case 2: return {-0.5, 0.0, 0.5};
      case 4: return {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
      case 6: return {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
      case 8:
        return {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0,
                4.0 / 5,   -1.0 / 5,   4.0 / 105, -1.0 / 280};
      default: break;
    }
  } else if (deriv == 2) {
    switch (order) {
      case 2: return {1.0, -2.0, 1.0};
      case 4: return {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12};
      case 6: return {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90};
      case 8:
        return {-1.0 / 560, 8.0 / 315, -1.0 / 5,  8.0 / 5, -205.0 / 72,
                8.0 / 5,    -1.0 / 5,  8.0 / 315, -1.0 / 560};
      default: break;
    }
  }
  throw std::invalid_argument("central_weights: unsupported derivative/order");
}

/// d/dtheta (deriv = 1) or d^2/dtheta^2 (deriv = 2) of a grid field. `parity`
/// is the sign the quantity picks up under the pole reflection.
template <class T>
std::vector<T> diff_theta(const SphereGrid& g, std::span<const T> f, int deriv, int order,
                          double parity = 1.0) {
  const auto w = central_weights(deriv, order);
  const long m = static_cast<long>(w.size() / 2);
  const double scale = deriv == 1 ? 1.0 / g.h_theta() : 1.0 / (g.h_theta() * g.h_theta());
  std::vector<T> out(f.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      T acc{};
      for (long k = -m; k <= m; ++k) {
        const double wk = w[static_cast<std::size_t>(k + m)];
        if (wk == 0.0) continue;
        const auto r = g.ref(static_cast<long>(i) + k, static_cast<long>(j));
        acc = acc + (r.reflected ? parity * wk : wk) * f[r.idx];
      }
      out[g.index(i, j)] = scale * acc;
    }
  }
  return out;
}

template <class T>
std::vector<T> diff_psi(const SphereGrid& g, std::span<const T> f, int deriv, int order) {
  const auto w = central_weights(deriv, order);
  const long m = static_cast<long>(w.size() / 2);
  const double scale = deriv == 1 ? 1.0 / g.h_psi() : 1.0 / (g.h_psi() * g.h_psi());
  std::vector<T> out(f.size());
  for (std::size_t i = 0; i < g.ntheta(); ++i) {
    for (std::size_t j = 0; j < g.npsi(); ++j) {
      T acc{};
      for (long k = -m; k <= m; ++k) {
        const double wk = w[static_cast<std::size_t>(k + m)];
        if (wk == 0.0) continue;
        acc = acc + wk * f[g.ref(static_cast<long>(i), static_cast<long>(j) + k).idx];
      }
      out[g.index(i, j)] = scale * acc;
    }
  }
  return out;
}

template <class T>
std::vector<T> diff_theta(const SphereGrid& g, const std::vector<T>& f, int deriv, int order,
                          double parity = 1.0) {
  return diff_theta<T>(g, std::span<const T>(f), deriv, order, parity);
}
template <class T>
std::vector<T> diff_psi(const SphereGrid& g, const std::vector<T>& f, int deriv, int order) {
  return diff_psi<T>(g, std::span<const T>(f), deriv, order);
}

/// Symmetric 2x2 tensor in (theta, psi) coordinates.
struct Sym2 {
  double tt = 0.0;
  double tp = 0.0;
  double pp = 0.0;

  double det() const { return tt * pp - tp * tp; }
  Sym2 inverse() const {
    const double d = det();
    return {pp / d, -tp / d, tt / d};
  }
  double frobenius() const { return std::sqrt(tt * tt + 2.0 * tp * tp + pp * pp); }
};

inline Sym2 operator-(const Sym2& a, const Sym2& b) {
  return {a.tt - b.tt, a.tp - b.tp, a.pp - b.pp};
}
inline Sym2 operator+(const Sym2& a, const Sym2& b) {
  return {a.tt + b.tt, a.tp + b.tp, a.pp + b.pp};
}
inline Sym2 operator*(double s, const Sym2& a) { return {s * a.tt, s * a.tp, s * a.pp}; }

using MetricField = std::vector<Sym2>;

inline Field sqrt_det(const MetricField& g) {
  Field out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = std::sqrt(g[k].det());
  return out;
}

/// Midpoint rule in theta, trapezoid (periodic) in psi, with area density sqrtg.
inline double integrate(const SphereGrid& g, std::span<const double> f,
                        std::span<const double> sqrtg) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += f[k] * sqrtg[k];
  return s * g.h_theta() * g.h_psi();
}

inline double area(const SphereGrid& g, std::span<const double> sqrtg) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += sqrtg[k];
  return s * g.h_theta() * g.h_psi();
}

}  // namespace qlm
