#pragma once

// Expanded-state (q, p) candidate value function for the Poisson model and a
// numerical residual of its HJB equation
//   dV/dQ = min_{u, phi} { u + dV/dp (p - phi) R_u + R_u (V(Q+1, phi) - V(Q, p)) }.
// Diagnostic only: nothing here feeds back into policy design.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include "qstream/core.hpp"
#include "qstream/errors.hpp"

namespace qstream {

enum class PoissonHjbZone {
  Above,        // q >= (1/alpha1) log(theta/p): candidate built from the above-threshold cost
  Approximate,  // one packet below the switching curve: HJB only approximately met
  Below,        // q <= (1/alpha1) log(theta/p) - 1
};

inline std::string_view to_string(PoissonHjbZone z) {
  switch (z) {
    case PoissonHjbZone::Above: return "above";
    case PoissonHjbZone::Approximate: return "approximate";
    case PoissonHjbZone::Below: return "below";
  }
  return "?";
}

namespace detail {

struct PoissonConstants {
  double a0, a1, theta, beta, r0, r1;

  explicit PoissonConstants(const Rates& rates)
      : a0(rates.exponents().alpha0),
        a1(rates.exponents().alpha1),
        theta(a1 / a0),
        beta(a1 / (a0 * (1.0 - a0 / 2.0))),
        r0(rates.r0()),
        r1(rates.r1()) {}

  double switching_level(double p) const { return std::log(theta / p) / a1; }
};

inline double threshold_state(const PoissonConstants& c, double q, double p) {
  if (!(p > 0.0)) throw DomainError("poisson_threshold_state: p must be positive");
  if (q >= c.switching_level(p)) return (std::log(c.theta / p) - c.a0 * q) / (c.a1 - c.a0);
  const double tail = std::exp(-c.a1 * q);
  const double num = p + c.theta * (1.0 - tail) - 1.0;
  const double den = p - tail;
  if (!(num > 0.0 && den > 0.0))
    throw DomainError("poisson_threshold_state: log argument is not positive at q=" + std::to_string(q) +
                      ", p=" + std::to_string(p));
  return std::log(num / den) / c.a1;
}

inline double candidate_value(const PoissonConstants& c, double q, double p) {
  const double t = threshold_state(c, q, p);
  const double drift = c.r1 - 1.0;
  if (q >= c.switching_level(p)) return std::exp(-c.a0 * (q - t)) / (c.a0 * (1.0 - c.a0 / 2.0) * drift);
  const double num = p + c.theta * (1.0 - std::exp(-c.a1 * q)) - 1.0;
  return num / (drift * (c.theta - 1.0)) * (t + c.beta / c.a1) - q / drift;
}

// Value used inside the HJB minimisation: 0 in the zero-cost region, +inf on
// or below the infeasible boundary, the candidate formula in between.
inline double value_or_boundary(const PoissonConstants& c, double q, double p) {
  if (p >= std::exp(-c.a0 * q)) return 0.0;
  if (p <= std::exp(-c.a1 * q)) return std::numeric_limits<double>::infinity();
  return candidate_value(c, q, p);
}

inline bool non_degenerate(const PoissonConstants& c, double q, double p) {
  return q > 0.0 && p > std::exp(-c.a1 * q) && p < std::exp(-c.a0 * q);
}

}  // namespace detail

/// Raw T(Q, p); may be negative far above the switching curve (callers clamp).
inline double poisson_threshold_state(double q, double p, const Rates& rates) {
  return detail::threshold_state(detail::PoissonConstants(rates), q, p);
}

/// Candidate value V-bar(Q, p) in units of time.
inline double poisson_candidate_value(double q, double p, const Rates& rates) {
  const detail::PoissonConstants c(rates);
  if (!detail::non_degenerate(c, q, p)) throw DomainError("poisson_candidate_value: (q, p) outside the region");
  return detail::candidate_value(c, q, p);
}

inline PoissonHjbZone poisson_hjb_zone(double q, double p, const Rates& rates) {
  const double s = detail::PoissonConstants(rates).switching_level(p);
  if (q >= s) return PoissonHjbZone::Above;
  if (q <= s - 1.0) return PoissonHjbZone::Below;
  return PoissonHjbZone::Approximate;
}

struct PoissonHjbReport {
  double lhs = 0.0;  // dV/dQ
  double rhs = 0.0;  // minimum over (u, phi)
  double residual = 0.0;
  int u = 0;
  double phi = 0.0;
  PoissonHjbZone zone = PoissonHjbZone::Above;
  /// The minimiser sends (Q+1, phi) into the zero-cost region, where V = 0 is
  /// substituted for the candidate.
  bool jump_to_zero_cost = false;
};

/// Central differences with steps h*max(1, q) in q and h*p in p. phi is
/// minimised on a uniform grid over [0, 1] (phi_grid points), then refined by
/// golden-section search around the best grid point. phi_grid == 1 pins phi = p.
inline PoissonHjbReport poisson_hjb_residual(double q, double p, const Rates& rates, double h = 1e-4,
                                             std::size_t phi_grid = 1000) {
  const detail::PoissonConstants c(rates);
  if (phi_grid == 0) throw DomainError("poisson_hjb_residual: phi_grid must be positive");
  const double hq = h * std::max(1.0, q);
  const double hp = h * p;
  for (auto [qq, pp] : {std::pair{q - hq, p}, {q + hq, p}, {q, p - hp}, {q, p + hp}, {q, p}})
    if (!detail::non_degenerate(c, qq, pp)) throw DomainError("poisson_hjb_residual: stencil leaves the region");

  const double v = detail::candidate_value(c, q, p);
  const double dq = (detail::candidate_value(c, q + hq, p) - detail::candidate_value(c, q - hq, p)) / (2 * hq);
  const double dp = (detail::candidate_value(c, q, p + hp) - detail::candidate_value(c, q, p - hp)) / (2 * hp);

  PoissonHjbReport rep;
  rep.lhs = dq;
  rep.zone = poisson_hjb_zone(q, p, rates);
  rep.rhs = std::numeric_limits<double>::infinity();

  for (int u = 0; u <= 1; ++u) {
    const double rate = u ? c.r1 : c.r0;
    auto objective = [&](double phi) {
      return u + dp * (p - phi) * rate + rate * (detail::value_or_boundary(c, q + 1.0, phi) - v);
    };
    double best_phi = p;
    double best = objective(p);
    if (phi_grid > 1) {
      const double step = 1.0 / static_cast<double>(phi_grid - 1);
      std::size_t best_i = 0;
      best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < phi_grid; ++i) {
        const double val = objective(static_cast<double>(i) * step);
        if (val < best) {
          best = val;
          best_i = i;
        }
      }
      best_phi = static_cast<double>(best_i) * step;
      // golden-section refinement on the neighbouring grid cells
      double a = best_i == 0 ? 0.0 : best_phi - step;
      double b = best_i + 1 == phi_grid ? 1.0 : best_phi + step;
      constexpr double kInvPhi = 0.6180339887498949;
      double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
      double f1 = objective(x1), f2 = objective(x2);
      for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        if (f1 <= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - kInvPhi * (b - a);
          f1 = objective(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + kInvPhi * (b - a);
          f2 = objective(x2);
        }
      }
      for (double x : {x1, x2})
        if (const double fx = objective(x); fx < best) {
          best = fx;
          best_phi = x;
        }
    }
    if (best < rep.rhs) {
      rep.rhs = best;
      rep.u = u;
      rep.phi = best_phi;
    }
  }
  rep.residual = rep.lhs - rep.rhs;
  rep.jump_to_zero_cost = rep.phi >= std::exp(-c.a0 * (q + 1.0));
  return rep;
}

}  // namespace qstream
