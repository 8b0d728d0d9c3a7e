#pragma once

// The prescribed scalar curvature flow for u and the backward equation for W.
//
// u is integrated as v = exp(3 kappa r)(u - 1) = q^{-3/2}(u - 1) in the time
// t = -q/(4 kappa), so that v stays O(1) and the final node q = 0 gives v_inf.
// W is integrated as W~ = exp(-kappa r) W = q^{1/2} W forward in
// tau = q/(4 kappa), starting from its prescribed value at infinity.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "qlm/errors.hpp"
#include "qlm/foliation.hpp"

namespace qlm {

enum class FlowKind { u, v, W_scalar, W_vector };

/// Values on every leaf of the schedule; values[k] belongs to schedule.q[k].
struct FlowField {
  FlowKind kind = FlowKind::v;
  FoliationSchedule schedule;
  std::vector<Field> values;

  std::size_t steps() const { return values.size(); }
};

/// u on leaf k from the stored v.
inline Field u_on_leaf(const FlowField& v, std::size_t k) {
  const double q32 = std::pow(v.schedule.q[k], 1.5);
  Field u(v.values[k].size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0 + q32 * v.values[k][i];
  return u;
}

/// u at arbitrary r, interpolating v linearly in q between leaves.
inline Field u_at_r(const FlowField& v, double r) {
  const auto& s = v.schedule;
  const double q = q_of_r(r, s.kappa);
  std::size_t k = 0;
  while (k + 1 < s.size() && s.q[k + 1] > q) ++k;
  const std::size_t k1 = std::min(k + 1, s.size() - 1);
  const double w = k1 == k ? 0.0 : (s.q[k] - q) / (s.q[k] - s.q[k1]);
  Field u(v.values[k].size());
  const double q32 = std::pow(q, 1.5);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = 1.0 + q32 * ((1.0 - w) * v.values[k][i] + w * v.values[k1][i]);
  return u;
}

struct USolution {
  FlowField v;
  Field v_inf;
  Field u0;
};

namespace detail {

/// Reaction term of the v equation, already multiplied by v.
inline Field v_reaction(const FoliationFrame& f, const Field& v) {
  const double kappa = f.kappa, q = f.q, sq = std::sqrt(q);
  Field out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = 1.0 + q * sq * v[i];
    const double R6 = f.Rr(i) + 6.0 * kappa * kappa;
    const double c = kappa * kappa * (f.e1[i] + f.e2[i] - 2.0 * q * f.e1[i] * f.e2[i]) / f.H0[i] -
                     R6 * (u + 2.0) * sq * v[i] / (2.0 * f.H0[i]);
    out[i] = 2.0 * c * v[i];
  }
  return out;
}

inline Eigen::VectorXd as_vec(const Field& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<long>(f.size()));
}
inline Field as_field(const Eigen::VectorXd& x) { return Field(x.data(), x.data() + x.size()); }

/// Step solver: Jacobi-preconditioned BiCGSTAB warm-started from the previous
/// leaf, with a sparse LU fallback when it stalls.
class StepSolver {
 public:
  void set(const Eigen::SparseMatrix<double>& A) {
    A_ = &A;
    it_.compute(A);
    lu_ready_ = false;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b, const Eigen::VectorXd& guess, const char* what,
                        std::size_t step) {
    it_.setTolerance(1e-14);
    it_.setMaxIterations(400);
    Eigen::VectorXd x = it_.solveWithGuess(b, guess);
    if (it_.info() == Eigen::Success && x.allFinite()) return x;
    if (!lu_ready_) {
      lu_.compute(*A_);
      if (lu_.info() != Eigen::Success)
        throw SolverError(std::string(what) + ": linear solve failed at step " + std::to_string(step));
      lu_ready_ = true;
    }
    return lu_.solve(b);
  }

 private:
  const Eigen::SparseMatrix<double>* A_ = nullptr;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> it_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool lu_ready_ = false;
};

}  // namespace detail

/// Solves 2 H0 u_r = 2 u^2 Delta_r u + (u - u^3)(R^r + 6 kappa^2), u(.,0) = H0/calH.
/// IMEX: second-order backward differences with the diffusion implicit (its
/// coefficient from extrapolated u) and the reaction extrapolated; the first
/// step is backward Euler.
inline USolution solve_u(const EmbeddedSurface& es, const Field& calH0,
                         const FoliationSchedule& sched, int lap_order = 4) {
  const SphereGrid& g = es.grid;
  const std::size_t n = g.size();
  if (calH0.size() != n) throw InputError("calH size does not match grid");
  if (sched.q.front() != 1.0 || sched.q.back() != 0.0)
    throw InputError("schedule must run from q = 1 to q = 0");
  const double kappa = es.kappa;

  USolution sol;
  sol.v.kind = FlowKind::v;
  sol.v.schedule = sched;
  sol.v.values.resize(sched.size());
  const FoliationFrame f0 = frame_at_q(es, 1.0);
  sol.u0.resize(n);
  Field v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(calH0[i] > 0.0)) throw AdmissibilityError("calH must be positive at node " + std::to_string(i));
    sol.u0[i] = f0.H0[i] / calH0[i];
    v[i] = sol.u0[i] - 1.0;
  }
  sol.v.values[0] = v;

  Field v_prev, F_prev;
  Field F = detail::v_reaction(f0, v);
  Field u_prev_leaf, u_leaf = sol.u0;
  detail::StepSolver solver;
  for (std::size_t k = 1; k < sched.size(); ++k) {
    const double dt = (sched.q[k - 1] - sched.q[k]) / (4.0 * kappa);
    const FoliationFrame fk = frame_at_q(es, sched.q[k]);
    const LaplaceOperator lap = laplacian(fk, g, lap_order);
    const bool bdf2 = k >= 2;
    Eigen::VectorXd a(static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double us = bdf2 ? 2.0 * u_leaf[i] - u_prev_leaf[i] : u_leaf[i];
      a[static_cast<long>(i)] = 2.0 * us * us / fk.H0[i];
    }
    Eigen::SparseMatrix<double> A = a.asDiagonal() * lap.L;
    A *= -dt;
    const double c0 = bdf2 ? 1.5 : 1.0;
    for (long d = 0; d < A.rows(); ++d) A.coeffRef(d, d) += c0;
    Eigen::VectorXd rhs(static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const long l = static_cast<long>(i);
      rhs[l] = bdf2 ? 2.0 * v[i] - 0.5 * v_prev[i] + dt * (2.0 * F[i] - F_prev[i]) : v[i] + dt * F[i];
    }
    solver.set(A);
    Field vn = detail::as_field(solver.solve(rhs, detail::as_vec(v), "u flow", k));
    const double q32 = std::pow(sched.q[k], 1.5);
    Field un(n);
    for (std::size_t i = 0; i < n; ++i) {
      un[i] = 1.0 + q32 * vn[i];
      if (!std::isfinite(vn[i]) || !(un[i] > 0.0))
        throw SolverError("u flow: u <= 0 at step " + std::to_string(k) + ", node " +
                          std::to_string(i) + " (r = " + std::to_string(sched.r(k)) + ")");
    }
    v_prev = std::move(v);
    v = std::move(vn);
    u_prev_leaf = std::move(u_leaf);
    u_leaf = std::move(un);
    F_prev = std::move(F);
    F = detail::v_reaction(fk, v);
    sol.v.values[k] = v;
  }
  sol.v_inf = v;
  return sol;
}

/// v field for u identically 1.
inline FlowField unit_u(const FoliationSchedule& sched, std::size_t n) {
  FlowField f;
  f.kind = FlowKind::v;
  f.schedule = sched;
  f.values.assign(sched.size(), Field(n, 0.0));
  return f;
}

// ---------------------------------------------------------------------------
// Barriers

struct Barrier {
  std::vector<double> r;
  std::vector<double> f;
  std::vector<double> h;         // min over the leaf of (R^r + 6 kappa^2)/(2 H0)
  std::vector<double> integral;  // int_0^r h
  double C = 0.0;
  double f0 = 1.0;
};

/// Distinct (mu1, mu2) pairs of the surface, merged at 1e-12 relative; the
/// barrier coefficient only depends on these.
inline std::vector<std::pair<double, double>> distinct_radii(const EmbeddedSurface& es) {
  std::vector<std::pair<double, double>> m;
  m.reserve(es.grid.size());
  for (std::size_t k = 0; k < es.grid.size(); ++k) m.emplace_back(es.mu1[k], es.mu2[k]);
  std::sort(m.begin(), m.end());
  const auto close = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
    return std::abs(a.first - b.first) <= 1e-12 * std::abs(a.first) &&
           std::abs(a.second - b.second) <= 1e-12 * std::abs(a.second);
  };
  m.erase(std::unique(m.begin(), m.end(), close), m.end());
  return m;
}

inline double barrier_coefficient(const std::vector<std::pair<double, double>>& mu, double kappa, double r) {
  double m = INFINITY;
  for (const auto& [m1, m2] : mu) {
    const double l1 = lambda_closed(m1, kappa, r), l2 = lambda_closed(m2, kappa, r);
    m = std::min(m, (2.0 * l1 * l2 + 4.0 * kappa * kappa) / (2.0 * (l1 + l2)));
  }
  return m;
}

/// min over nodes of (R^r + 6 kappa^2)/(2 H0) at distance r.
inline double barrier_coefficient(const EmbeddedSurface& es, double r) {
  return barrier_coefficient(distinct_radii(es), es.kappa, r);
}

/// h and int_0^r h at the sample radii; shared by every barrier on one surface.
struct BarrierProfile {
  std::vector<double> r, h, integral;
};

inline BarrierProfile barrier_profile(const EmbeddedSurface& es, const std::vector<double>& r_samples) {
  const auto mu = distinct_radii(es);
  const auto hfun = [&](double r) { return barrier_coefficient(mu, es.kappa, r); };
  BarrierProfile p;
  p.r = r_samples;
  double acc = 0.0, r_prev = 0.0;
  for (double r : r_samples) {
    if (r < r_prev) throw InputError("barrier samples must be increasing");
    if (r > r_prev)
      acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(hfun, r_prev, r, 5, 1e-12);
    r_prev = r;
    p.h.push_back(hfun(r));
    p.integral.push_back(acc);
  }
  return p;
}

/// f = (1 + C exp(-2 int_0^r h))^{-1/2} with f(0) = f0.
inline Barrier barrier_ode(const BarrierProfile& p, double f0) {
  if (!(f0 > 0.0)) throw InputError("barrier initial value must be positive");
  Barrier b;
  b.f0 = f0;
  b.C = 1.0 / (f0 * f0) - 1.0;
  b.r = p.r;
  b.h = p.h;
  b.integral = p.integral;
  for (double acc : p.integral) b.f.push_back(1.0 / std::sqrt(1.0 + b.C * std::exp(-2.0 * acc)));
  return b;
}

inline Barrier barrier_ode(const EmbeddedSurface& es, double f0, const std::vector<double>& r_samples) {
  return barrier_ode(barrier_profile(es, r_samples), f0);
}

/// max over samples of |f' - h (f - f^3)| with f' from the chain rule.
inline double barrier_residual(const Barrier& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < b.r.size(); ++k) {
    const double e = b.C * std::exp(-2.0 * b.integral[k]);
    const double fp = b.h[k] * e * std::pow(1.0 + e, -1.5);
    const double f = b.f[k];
    worst = std::max(worst, std::abs(fp - b.h[k] * (f - f * f * f)));
  }
  return worst;
}

struct BarrierCheck {
  bool lower_applicable = false, upper_applicable = false;
  bool lower_ok = true, upper_ok = true;
  double lower_margin = INFINITY;  // min over r of (min u - f_lower)
  double upper_margin = INFINITY;  // min over r of (f_upper - max u)
};

/// Compares u against the lower barrier (f0 = min(min u0, 1)) and the upper
/// analogue (f0 = max(max u0, 1)) on the finite leaves up to r_max.
inline BarrierCheck check_barriers(const EmbeddedSurface& es, const FlowField& v, double tol = 1e-8) {
  const auto& s = v.schedule;
  std::vector<double> rs;
  std::vector<std::size_t> ks;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (s.q[k] > 0.0 && s.r(k) <= s.r_max) {
      rs.push_back(s.r(k));
      ks.push_back(k);
    }
  const Field u0 = u_on_leaf(v, 0);
  const double umin = *std::min_element(u0.begin(), u0.end());
  const double umax = *std::max_element(u0.begin(), u0.end());
  BarrierCheck c;
  c.lower_applicable = umin <= 1.0;
  c.upper_applicable = umax >= 1.0;
  const BarrierProfile prof = barrier_profile(es, rs);
  const Barrier lo = barrier_ode(prof, std::min(umin, 1.0));
  const Barrier hi = barrier_ode(prof, std::max(umax, 1.0));
  for (std::size_t m = 0; m < ks.size(); ++m) {
    const Field u = u_on_leaf(v, ks[m]);
    const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
    c.lower_margin = std::min(c.lower_margin, *mn - lo.f[m]);
    c.upper_margin = std::min(c.upper_margin, hi.f[m] - *mx);
  }
  c.lower_ok = !c.lower_applicable || c.lower_margin >= -tol;
  c.upper_ok = !c.upper_applicable || c.upper_margin >= -tol;
  return c;
}

// ---------------------------------------------------------------------------
// Decay diagnostics

struct GaugeDeviation {
  std::vector<double> r;
  std::vector<double> a_minus_i;  // sup |1/u - 1|
  std::vector<double> u_minus_1;  // sup |u - 1|
  std::vector<double> grad_a;     // sup |d(1/u)/dr|
};

/// Samples |A - I| = sup |1/u - 1| and sup |d(1/u)/dr| on a uniform r grid
/// over [0, r_max]; u between leaves comes from interpolating v in q.
inline GaugeDeviation gauge_deviation(const FlowField& v, std::size_t samples = 161) {
  const auto& s = v.schedule;
  GaugeDeviation d;
  const double dr = s.r_max / static_cast<double>(samples - 1);
  const double eps = 1e-4 / s.kappa;
  for (std::size_t m = 0; m < samples; ++m) {
    const double r = dr * static_cast<double>(m);
    const Field u = u_at_r(v, r);
    const Field ua = u_at_r(v, std::max(0.0, r - eps)), ub = u_at_r(v, r + eps);
    const double h = r + eps - std::max(0.0, r - eps);
    double am = 0.0, um = 0.0, gr = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      am = std::max(am, std::abs(1.0 / u[i] - 1.0));
      um = std::max(um, std::abs(u[i] - 1.0));
      gr = std::max(gr, std::abs((ub[i] - ua[i]) / h) / (u[i] * u[i]));
    }
    d.r.push_back(r);
    d.a_minus_i.push_back(am);
    d.u_minus_1.push_back(um);
    d.grad_a.push_back(gr);
  }
  return d;
}

/// Least-squares exponent c in y ~ A exp(-c r) over samples with r in [r_lo, r_hi].
inline double fit_decay_exponent(const std::vector<double>& r, const std::vector<double>& y,
                                 double r_lo, double r_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < r_lo || r[k] > r_hi || !(y[k] > 0.0)) continue;
    const double ly = std::log(y[k]);
    sx += r[k];
    sy += ly;
    sxx += r[k] * r[k];
    sxy += r[k] * ly;
    ++m;
  }
  if (m < 2) return std::nan("");
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return -slope;
}

// ---------------------------------------------------------------------------
// W

struct WSolution {
  std::vector<FlowField> Wt;  // W~ per terminal, leaves in schedule order (q = 1 first)
  std::vector<Field> W0;      // W(., r = 0) per terminal
  double max_reaction_step = 0.0;  // max of dtau * rho^+, must stay < 1
};

/// Solves dW~/dtau = (2u/H0) Delta~ W~ + rho W~ from tau = 0 (q = 0) to
/// q = 1 with backward Euler, for several terminal fields at once. With
/// lap_order = 2 the implicit matrix is an M-matrix (checked) and W~ >= 0
/// follows whenever the terminal is; with lap_order = 4 the sign is checked
/// on the output. Either way a negative value under a nonnegative terminal aborts.
inline WSolution solve_W(const EmbeddedSurface& es, const FlowField& v,
                         const std::vector<Field>& terminals, int lap_order = 4) {
  const SphereGrid& g = es.grid;
  const std::size_t n = g.size();
  const auto& s = v.schedule;
  const double kappa = es.kappa;
  for (const auto& t : terminals)
    if (t.size() != n) throw InputError("terminal size does not match grid");
  const std::size_t last = s.size() - 1;
  WSolution sol;
  sol.Wt.resize(terminals.size());
  for (std::size_t c = 0; c < terminals.size(); ++c) {
    sol.Wt[c].kind = FlowKind::W_scalar;
    sol.Wt[c].schedule = s;
    sol.Wt[c].values.resize(s.size());
    sol.Wt[c].values[last] = terminals[c];
  }
  detail::StepSolver solver;
  for (std::size_t k = last; k-- > 0;) {
    const double q = s.q[k], sq = std::sqrt(q);
    const double dtau = (s.q[k] - s.q[k + 1]) / (4.0 * kappa);
    const FoliationFrame fk = frame_at_q(es, q);
    const LaplaceOperator lap = laplacian(fk, g, lap_order);
    Eigen::VectorXd a(static_cast<long>(n));
    Eigen::SparseMatrix<double> A = lap.L;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = 1.0 + q * sq * v.values[k][i];
      a[static_cast<long>(i)] = 2.0 * u / fk.H0[i];
    }
    A = a.asDiagonal() * A;
    A *= -dtau;
    for (std::size_t i = 0; i < n; ++i) {
      const double coef = (2.0 * sq * v.values[k][i] - fk.e1[i] - fk.e2[i]) / fk.H0[i];
      const double rho = -2.0 * kappa * kappa * coef;
      sol.max_reaction_step = std::max(sol.max_reaction_step, dtau * rho);
      A.coeffRef(static_cast<long>(i), static_cast<long>(i)) += 1.0 - dtau * rho;
    }
    if (!(sol.max_reaction_step < 1.0))
      throw SolverError("W flow: step too large for positivity (dtau * rho = " +
                        std::to_string(sol.max_reaction_step) + " at step " + std::to_string(k) + ")");
    if (lap_order == 2) {
      for (int col = 0; col < A.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, col); it; ++it)
          if (it.row() != it.col() && it.value() > 1e-10 * std::abs(A.coeff(it.row(), it.row())))
            throw SolverError("W flow: implicit operator is not an M-matrix (metric cross terms at node " +
                              std::to_string(it.row()) + ")");
    }
    solver.set(A);
    for (std::size_t c = 0; c < terminals.size(); ++c) {
      const Eigen::VectorXd prev = detail::as_vec(sol.Wt[c].values[k + 1]);
      sol.Wt[c].values[k] = detail::as_field(solver.solve(prev, prev, "W flow", k));
    }
  }
  for (std::size_t c = 0; c < terminals.size(); ++c) {
    bool nonneg = true;
    for (double x : terminals[c]) nonneg = nonneg && x >= 0.0;
    if (nonneg)
      for (std::size_t k = 0; k < s.size(); ++k)
        for (std::size_t i = 0; i < n; ++i)
          if (sol.Wt[c].values[k][i] < 0.0)
            throw SolverError("W flow: negative value under nonnegative terminal at step " +
                              std::to_string(k) + ", node " + std::to_string(i));
    sol.W0.push_back(sol.Wt[c].values[0]);  // q = 1: W~ = W
  }
  return sol;
}

inline WSolution solve_W_scalar(const EmbeddedSurface& es, const FlowField& v, const Field& terminal,
                                int lap_order = 4) {
  return solve_W(es, v, {terminal}, lap_order);
}

/// Gauss map gamma_0 = kappa X + N (future null) per node.
inline std::vector<FourVector> gamma0(const EmbeddedSurface& es) { return gauss_map(es); }

/// Four-vector W with W~ -> -gamma_0 at infinity. Returns the component
/// solutions and W0 per node.
struct WVectorSolution {
  WSolution components;
  std::vector<FourVector> W0;
};

inline WVectorSolution solve_W_vector(const EmbeddedSurface& es, const FlowField& v, int lap_order = 4) {
  const auto gm = gamma0(es);
  std::vector<Field> term(4, Field(gm.size()));
  for (std::size_t i = 0; i < gm.size(); ++i)
    for (std::size_t c = 0; c < 4; ++c) term[c][i] = -gm[i][c];
  WVectorSolution out;
  out.components = solve_W(es, v, term, lap_order);
  out.W0.resize(gm.size());
  for (std::size_t i = 0; i < gm.size(); ++i)
    for (std::size_t c = 0; c < 4; ++c) out.W0[i][c] = out.components.W0[c][i];
  return out;
}

/// CSV: r, t_or_tau, node_theta, node_psi, value columns; leaves with r in
/// [0, r_max] every `stride` steps, plus the leaf at infinity (r = inf).
inline void write_flow_csv(const std::string& path, const SphereGrid& g,
                           const std::vector<const FlowField*>& fields,
                           const std::vector<std::string>& names, bool tau_time,
                           std::size_t stride = 1, bool as_u = false) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(12);
  out << "r," << (tau_time ? "tau" : "t") << ",node_theta,node_psi";
  for (const auto& nm : names) out << ',' << nm;
  out << '\n';
  const auto& s = fields.front()->schedule;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const bool at_inf = s.q[k] == 0.0;
    if (!at_inf && (k % stride != 0 || s.r(k) > s.r_max)) continue;
    std::vector<Field> vals;
    for (const auto* f : fields) vals.push_back(as_u ? u_on_leaf(*f, k) : f->values[k]);
    const double r = s.r(k);
    for (std::size_t i = 0; i < g.ntheta(); ++i)
      for (std::size_t j = 0; j < g.npsi(); ++j) {
        const std::size_t idx = g.index(i, j);
        if (at_inf) out << "inf";
        else out << r;
        out << ',' << (tau_time ? s.tau(k) : s.t(k)) << ',' << g.theta(i) << ',' << g.psi(j);
        for (const auto& vv : vals) out << ',' << vv[idx];
        out << '\n';
      }
  }
}

}  // namespace qlm
