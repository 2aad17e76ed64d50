#pragma once

// Closed forms of the Brownian fluid model dQ = (R_u - 1) dt + dW under
// threshold policies, the value function built from them, the optimal
// feedback controls, and a finite-difference check of the fluid HJB equation
//   0 = min_{u, phi} { u + V_Q (R_u - 1) + V_QQ / 2 + V_pp phi^2 / 2 + V_Qp phi }.
//
// The formulas are templates on the floating type so the HJB check can run
// in extended precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <concepts>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "qstream/core.hpp"
#include "qstream/errors.hpp"
#include "qstream/root_finding.hpp"

namespace qstream {

struct FluidState {
  double q;
  double p;
};

/// u* and the martingale volatility phi* of the remaining budget p.
struct FluidControls {
  int u = 0;
  double phi = 0.0;
  double phi_free = 0.0;  // -theta0 p, the u = 0 sub-region formula
  double phi_both = 0.0;  // -theta1 (1 - p) / (e^{theta1 q} - 1), the u = 1 sub-region formula
};

template <std::floating_point Real>
struct FluidModel {
  Real theta0;
  Real theta1;

  static FluidModel from(const Rates& rates) {
    return {static_cast<Real>(rates.exponents().theta0), static_cast<Real>(rates.exponents().theta1)};
  }

  Real ratio() const { return theta0 / theta1; }

  /// p(T) = e^{-theta1 T} / (theta0/theta1 + (1 - theta0/theta1) e^{-theta1 T}).
  Real p_at_threshold(Real t) const {
    const Real e = std::exp(-theta1 * t);
    return e / (ratio() + (1 - ratio()) * e);
  }

  /// p^T(d): interruption probability of the threshold policy from buffer d.
  Real interruption_probability(Real d, Real t) const {
    const Real pt = p_at_threshold(t);
    if (d >= t) return pt * std::exp(-theta0 * (d - t));
    return std::exp(-theta1 * d) + pt * (1 - ratio()) * -std::expm1(-theta1 * d);
  }

  /// T solving p^T(d) = eps; 0 if the free server alone meets eps.
  Real design_threshold(Real d, Real eps) const {
    if (eps >= std::exp(-theta0 * d)) return 0;
    const Real floor_p = std::exp(-theta1 * d);
    if (eps < floor_p) throw InfeasibleTarget("fluid_design_threshold: eps < exp(-theta1 d)");
    if (eps == floor_p) return std::numeric_limits<Real>::infinity();
    auto f = [&](Real t) { return interruption_probability(d, t) - eps; };
    Real hi = std::max<Real>(1, d);
    while (f(hi) >= 0) hi *= 2;
    return root::bisect<Real>(f, Real(0), hi);
  }

  /// J(T): expected usage time started exactly at the threshold.
  Real threshold_cost(Real t) const {
    const Real x = theta1 * t;
    const Real e = std::exp(-x);
    const Real num = -(std::expm1(-x) + x * e);  // 1 - (1 + x) e^{-x}
    return 2 / (theta1 * theta1) * num / (ratio() + (1 - ratio()) * e);
  }

  /// J^T(d).
  Real cost(Real d, Real t) const {
    if (d <= 0 || t <= 0) return 0;
    const Real jt = threshold_cost(t);
    if (d >= t) return std::exp(-theta0 * (d - t)) * jt;
    return (jt + 2 / theta1 * t) * (std::expm1(-theta1 * d) / std::expm1(-theta1 * t)) - 2 / theta1 * d;
  }

  bool below_feasible(Real q, Real p) const { return p <= std::exp(-theta1 * q); }
  bool zero_cost(Real q, Real p) const { return p >= std::exp(-theta0 * q); }

  /// u = 0 sub-region test: p >= p(q).
  bool free_only(Real q, Real p) const { return p >= p_at_threshold(q); }

  /// V(q, p) = J^{T(q,p)}(q).
  Real value(Real q, Real p) const {
    if (below_feasible(q, p)) throw InfeasibleState("fluid_value: p <= exp(-theta1 q)");
    if (zero_cost(q, p)) return 0;
    return cost(q, design_threshold(q, p));
  }
};

inline double fluid_p_at_threshold(double t_thr, const Rates& rates) {
  return FluidModel<double>::from(rates).p_at_threshold(t_thr);
}

inline double fluid_interruption_probability(double d, double t_thr, const Rates& rates) {
  return FluidModel<double>::from(rates).interruption_probability(d, t_thr);
}

inline double fluid_design_threshold(const QoETarget& target, const Rates& rates) {
  return FluidModel<double>::from(rates).design_threshold(target.d, target.eps);
}

inline double fluid_cost(double d, double t_thr, const Rates& rates) {
  return FluidModel<double>::from(rates).cost(d, t_thr);
}

inline double fluid_value(const FluidState& s, const Rates& rates) {
  return FluidModel<double>::from(rates).value(s.q, s.p);
}

/// Point p^{T(D,eps)}(q) of the invariant manifold through the anchor (D, eps).
inline double manifold_p(double q, const QoETarget& anchor, const Rates& rates) {
  const auto m = FluidModel<double>::from(rates);
  return m.interruption_probability(q, m.design_threshold(anchor.d, anchor.eps));
}

inline FluidControls fluid_optimal_controls(const FluidState& s, const Rates& rates) {
  const auto m = FluidModel<double>::from(rates);
  if (m.below_feasible(s.q, s.p)) throw InfeasibleState("fluid_optimal_controls: p <= exp(-theta1 q)");
  FluidControls c;
  c.phi_free = -m.theta0 * s.p;
  c.phi_both = -m.theta1 * (1.0 - s.p) / std::expm1(m.theta1 * s.q);
  c.u = m.free_only(s.q, s.p) ? 0 : 1;
  c.phi = c.u == 0 ? c.phi_free : c.phi_both;
  return c;
}

struct ExitStatistics {
  double p_hit_zero;
  double p_hit_upper;
  double expected_exit_time;
};

/// Exit of dQ = (theta/2) dt + dW from [0, b] started at d. theta == 0 uses
/// the driftless gambler's-ruin limits.
inline ExitStatistics fluid_exit_statistics(double d, double b, double theta) {
  if (!(d >= 0.0 && d <= b && b > 0.0)) throw DomainError("fluid_exit_statistics: need 0 <= d <= b, b > 0");
  if (theta == 0.0) return {(b - d) / b, d / b, d * (b - d)};
  const double reach = std::expm1(-theta * d) / std::expm1(-theta * b);  // (1 - e^{-theta d}) / (1 - e^{-theta b})
  return {1.0 - reach, reach, 2.0 / theta * (b * reach - d)};
}

// ---------------------------------------------------------------------------
// HJB residual

enum class FluidSubregion { FreeOnly, BothServers };

inline std::string_view to_string(FluidSubregion r) {
  return r == FluidSubregion::FreeOnly ? "free-only" : "both-servers";
}

struct FluidHjbReport {
  FluidSubregion subregion = FluidSubregion::FreeOnly;
  /// Residual of the sub-region's own equation: u fixed by the sub-region,
  /// phi minimised in closed form (phi = -V_Qp / V_pp).
  double residual = 0.0;
  /// Residual with the minimum also taken over u.
  double residual_min = 0.0;
  int u_argmin = 0;
  double phi_argmin = 0.0;
  double phi_explicit = 0.0;
  double v = 0.0, v_q = 0.0, v_qq = 0.0, v_p = 0.0, v_pp = 0.0, v_qp = 0.0;
};

/// Central differences with step h in q and h*p in p, evaluated in long double.
inline FluidHjbReport fluid_hjb_residual(const FluidState& s, const Rates& rates, double h = 1e-3) {
  using LD = long double;
  const auto m = FluidModel<LD>::from(rates);
  const LD q = s.q, p = s.p, hq = h, hp = static_cast<LD>(h) * s.p;
  if (m.below_feasible(q, p) || m.zero_cost(q, p)) throw StencilOutOfRegion("fluid_hjb_residual: state outside the region");
  const bool free_only = m.free_only(q, p);

  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      const LD qq = q + i * hq, pp = p + j * hp;
      if (qq <= 0 || m.below_feasible(qq, pp) || m.zero_cost(qq, pp) || m.free_only(qq, pp) != free_only)
        throw StencilOutOfRegion("fluid_hjb_residual: stencil at (" + std::to_string(s.q) + ", " +
                                 std::to_string(s.p) + ") crosses a sub-region boundary");
    }

  auto V = [&](LD qq, LD pp) { return m.value(qq, pp); };
  const LD v = V(q, p);
  const LD vq = (V(q + hq, p) - V(q - hq, p)) / (2 * hq);
  const LD vqq = (V(q + hq, p) - 2 * v + V(q - hq, p)) / (hq * hq);
  const LD vp = (V(q, p + hp) - V(q, p - hp)) / (2 * hp);
  const LD vpp = (V(q, p + hp) - 2 * v + V(q, p - hp)) / (hp * hp);
  const LD vqp = (V(q + hq, p + hp) - V(q + hq, p - hp) - V(q - hq, p + hp) + V(q - hq, p - hp)) / (4 * hq * hp);

  const LD r0 = static_cast<LD>(rates.r0()), r1 = static_cast<LD>(rates.r1());
  // min over phi of V_pp phi^2/2 + V_Qp phi
  const LD phi_star = vpp > 0 ? -vqp / vpp : (vqp > 0 ? -std::numeric_limits<LD>::infinity()
                                                      : std::numeric_limits<LD>::infinity());
  const LD phi_part = vpp > 0 ? -vqp * vqp / (2 * vpp) : -std::numeric_limits<LD>::infinity();
  const LD common = vqq / 2 + phi_part;
  const LD h0 = vq * (r0 - 1) + common;
  const LD h1 = 1 + vq * (r1 - 1) + common;

  FluidHjbReport rep;
  rep.subregion = free_only ? FluidSubregion::FreeOnly : FluidSubregion::BothServers;
  rep.residual = static_cast<double>(free_only ? h0 : h1);
  rep.u_argmin = h1 < h0 ? 1 : 0;
  rep.residual_min = static_cast<double>(std::min(h0, h1));
  rep.phi_argmin = static_cast<double>(phi_star);
  rep.phi_explicit = fluid_optimal_controls(s, rates).phi;
  rep.v = static_cast<double>(v);
  rep.v_q = static_cast<double>(vq);
  rep.v_qq = static_cast<double>(vqq);
  rep.v_p = static_cast<double>(vp);
  rep.v_pp = static_cast<double>(vpp);
  rep.v_qp = static_cast<double>(vqp);
  return rep;
}

/// nq x np states of one sub-region: q uniform on [q_lo, q_hi], log p uniform
/// on the part of the sub-region's log p range that keeps a fraction `margin`
/// clear of each edge.
inline std::vector<FluidState> fluid_interior_grid(const Rates& rates, FluidSubregion region, std::size_t nq,
                                                   std::size_t np, double q_lo, double q_hi, double margin = 0.15) {
  if (nq == 0 || np == 0 || !(q_lo > 0.0 && q_hi >= q_lo) || !(margin > 0.0 && margin < 0.5))
    throw DomainError("fluid_interior_grid: bad grid");
  const auto m = FluidModel<double>::from(rates);
  std::vector<FluidState> out;
  out.reserve(nq * np);
  for (std::size_t i = 0; i < nq; ++i) {
    const double q = nq == 1 ? q_lo : q_lo + (q_hi - q_lo) * static_cast<double>(i) / static_cast<double>(nq - 1);
    const double mid = std::log(m.p_at_threshold(q));
    const double lo = region == FluidSubregion::FreeOnly ? mid : -m.theta1 * q;
    const double hi = region == FluidSubregion::FreeOnly ? -m.theta0 * q : mid;
    for (std::size_t j = 0; j < np; ++j) {
      const double s =
          np == 1 ? 0.5 : margin + (1.0 - 2.0 * margin) * static_cast<double>(j) / static_cast<double>(np - 1);
      out.push_back({q, std::exp(lo + s * (hi - lo))});
    }
  }
  return out;
}

/// Second-difference residual of J'' + theta1 J' + 2 = 0 at d in (0, T).
inline double fluid_cost_ode_residual(double d, double t_thr, const Rates& rates, double h = 1e-3) {
  using LD = long double;
  const auto m = FluidModel<LD>::from(rates);
  if (!(d - h > 0.0 && d + h < t_thr)) throw StencilOutOfRegion("fluid_cost_ode_residual: stencil leaves (0, T)");
  const LD x = d, hh = h, t = t_thr;
  const LD jm = m.cost(x - hh, t), j0 = m.cost(x, t), jp = m.cost(x + hh, t);
  const LD d2 = (jp - 2 * j0 + jm) / (hh * hh);
  const LD d1 = (jp - jm) / (2 * hh);
  return static_cast<double>(d2 + m.theta1 * d1 + 2);
}

}  // namespace qstream
