#pragma once

// Association policies, their design formulas and analytic cost bounds.

#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

#include "qstream/core.hpp"
#include "qstream/errors.hpp"

namespace qstream {

struct AlwaysFree {};
struct AlwaysBoth {};
/// Both servers while t <= switch_time, free server afterwards.
struct Offline {
  double switch_time;
};
/// Both servers until the buffer first reaches `level`, free server forever after.
struct Safe {
  double level;
};
/// Both servers exactly while 0 < q < threshold.
struct Risky {
  double threshold;
};

using PolicySpec = std::variant<AlwaysFree, AlwaysBoth, Offline, Safe, Risky>;

inline std::string describe(const PolicySpec& p) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, AlwaysFree>) return "free";
        else if constexpr (std::is_same_v<V, AlwaysBoth>) return "both";
        else if constexpr (std::is_same_v<V, Offline>) return "offline:" + std::to_string(v.switch_time);
        else if constexpr (std::is_same_v<V, Safe>) return "safe:" + std::to_string(v.level);
        else return "risky:" + std::to_string(v.threshold);
      },
      p);
}

/// Caller-owned history a policy needs beyond (t, q). Only Safe uses it:
/// once the level has been reached the costly server stays off.
struct PolicyState {
  bool latched = false;
};

/// u in {0, 1}. Mutates `state` when a Safe policy first reaches its level.
inline int decide(const PolicySpec& policy, PolicyState& state, double t, double q) {
  return std::visit(
      [&](const auto& v) -> int {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, AlwaysFree>) {
          return 0;
        } else if constexpr (std::is_same_v<V, AlwaysBoth>) {
          return 1;
        } else if constexpr (std::is_same_v<V, Offline>) {
          return t <= v.switch_time ? 1 : 0;
        } else if constexpr (std::is_same_v<V, Safe>) {
          if (!state.latched && q >= v.level) state.latched = true;
          return state.latched ? 0 : 1;
        } else {
          return (q > 0.0 && q < v.threshold) ? 1 : 0;
        }
      },
      policy);
}

// ---------------------------------------------------------------------------
// Design formulas (Poisson model)

/// A designed scalar parameter. Negative formula values are clamped to 0 and
/// flagged; zero_cost marks targets the free server meets on its own.
struct ParameterDesign {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
  bool zero_cost = false;
};

namespace detail {

// eps - exp(-alpha1 d): the interruption budget left after the worst case of
// the initial both-servers phase. Must be positive for any online/offline design.
inline double residual_budget(const QoETarget& target, const Rates& rates) {
  const double slack = target.eps - std::exp(-rates.exponents().alpha1 * target.d);
  if (!(slack > 0.0))
    throw InfeasibleTarget("target (d=" + std::to_string(target.d) + ", eps=" +
                           std::to_string(target.eps) + ") is not reachable even with both servers");
  return slack;
}

inline double safe_level(const QoETarget& target, const Rates& rates) {
  return -std::log(residual_budget(target, rates)) / rates.exponents().alpha0;
}

}  // namespace detail

/// Smallest feasible switch time t_s* of the offline policy.
inline ParameterDesign design_offline(const QoETarget& target, const Rates& rates) {
  ParameterDesign out;
  out.zero_cost = classify_region(target, rates, Model::Poisson) == RegionClass::ZeroCost;
  const double level = detail::safe_level(target, rates);
  out.raw = rates.r0() / rates.rc() * (level - target.d);
  out.clamped = out.raw < 0.0;
  out.value = (out.clamped || out.zero_cost) ? 0.0 : out.raw;
  return out;
}

/// Safe-policy level S* = (1/alpha0) log(1 / (eps - e^{-alpha1 D})).
inline ParameterDesign design_safe(const QoETarget& target, const Rates& rates) {
  ParameterDesign out;
  out.zero_cost = classify_region(target, rates, Model::Poisson) == RegionClass::ZeroCost;
  out.raw = detail::safe_level(target, rates);
  out.clamped = out.raw < 0.0;
  out.value = (out.clamped || out.zero_cost) ? 0.0 : out.raw;
  return out;
}

/// Expected costly-server usage time, as an interval.
struct CostInterval {
  double lo;
  double hi;
};

/// Bounds on E[tau_S*]: the overshoot past S* lies in [0, 1).
inline CostInterval safe_cost_bounds(const QoETarget& target, const Rates& rates) {
  const double level = detail::safe_level(target, rates);
  const double drift = rates.r1() - 1.0;
  const double gap = level - target.d;
  if (gap < 0.0) return {0.0, 0.0};  // level already met at t = 0
  return {gap / drift, (gap + 1.0) / drift};
}

enum class RiskyBranch { Above, Below };

struct RiskyDesign {
  double t_star;
  double beta;   // alpha1 / (alpha0 (1 - alpha0/2))
  double d_bar;  // (1/alpha1) log(beta/eps)
  RiskyBranch branch;
  bool clamped = false;
};

inline RiskyDesign design_risky(const QoETarget& target, const Rates& rates) {
  const auto& e = rates.exponents();
  const double a0 = e.alpha0, a1 = e.alpha1;
  RiskyDesign out{};
  out.beta = a1 / (a0 * (1.0 - a0 / 2.0));
  out.d_bar = std::log(out.beta / target.eps) / a1;
  if (classify_region(target, rates, Model::Poisson) == RegionClass::Infeasible)
    throw InfeasibleTarget("design_risky: target lies in the infeasible region");

  if (target.d >= out.d_bar) {
    out.branch = RiskyBranch::Above;
    const double raw = (std::log(out.beta / target.eps) - a0 * target.d) / (a1 - a0);
    out.clamped = raw < 0.0;
    out.t_star = out.clamped ? 0.0 : raw;
    return out;
  }

  out.branch = RiskyBranch::Below;
  const double tail = std::exp(-a1 * target.d);
  const double den = target.eps - tail;
  if (!(den > 0.0)) throw InfeasibleTarget("design_risky: eps <= exp(-alpha1 d)");
  const double num = target.eps + out.beta * (1.0 - tail) - 1.0;
  const double arg = num / den;
  if (!(num > 0.0) || !(arg > 1.0))
    throw BranchDomainError("design_risky: below-branch log argument " + std::to_string(arg) +
                            " gives no positive threshold");
  out.t_star = std::log(arg) / a1;
  return out;
}

/// Upper bound on the expected usage time of Risky{t_star}.
inline double risky_cost_bound(const QoETarget& target, const Rates& rates, const RiskyDesign& design) {
  const auto& e = rates.exponents();
  const double drift = rates.r1() - 1.0;
  const double t = design.t_star;
  if (design.branch == RiskyBranch::Above)
    return design.beta / (e.alpha1 * drift) * std::exp(-e.alpha0 * (target.d - t));
  const double reach = -std::expm1(-e.alpha1 * target.d);
  const double cycle = -std::expm1(-e.alpha1 * t);
  return reach / (drift * cycle) * (t + 1.0 + design.beta / e.alpha1) - target.d / drift;
}

}  // namespace qstream
