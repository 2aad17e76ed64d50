#pragma once

// Rates, QoE targets, interruption exponents and the (D, eps) region map.

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "qstream/errors.hpp"
#include "qstream/root_finding.hpp"

namespace qstream {

enum class Model { Poisson, Fluid };

inline std::string_view to_string(Model m) { return m == Model::Poisson ? "poisson" : "fluid"; }

/// gamma(r) = r + R (e^{-r} - 1). Evaluated with expm1 so it stays
/// accurate where the two terms nearly cancel.
inline double gamma(double r, double rate) { return r + rate * std::expm1(-r); }

/// Largest root of gamma(., rate): the decay rate of the interruption
/// probability of a single Poisson(rate) server drained at unit rate.
inline double interruption_exponent(double rate) {
  if (!(rate > 1.0)) throw DomainError("interruption_exponent: rate must exceed 1");
  auto f = [rate](double r) { return gamma(r, rate); };
  auto df = [rate](double r) { return 1.0 - rate * std::exp(-r); };

  double lo = 1e-12;
  // gamma is negative just right of 0; for rates within ~1e-12 of 1 the root
  // itself sits near 1e-12, so walk lo down until the sign is right.
  while (f(lo) >= 0.0 && lo > 1e-300) lo *= 0.5;
  double hi = 2.0 * (rate - 1.0);
  while (f(hi) <= 0.0) hi *= 2.0;
  return root::bisect_then_newton(f, df, {lo, hi});
}

/// Fluid-model exponent theta = 2 (rate - 1).
inline double fluid_exponent(double rate) {
  if (!(rate > 1.0)) throw DomainError("fluid_exponent: rate must exceed 1");
  return 2.0 * (rate - 1.0);
}

struct Exponents {
  double alpha0;  // Poisson exponent of r0
  double alpha1;  // Poisson exponent of r1
  double theta0;  // fluid exponent of r0
  double theta1;  // fluid exponent of r1
};

/// Free-server rate r0, costly increment rc and the combined rate r1 = r0 + rc.
/// Immutable; exponents are solved once on construction.
class Rates {
 public:
  Rates(double r0, double rc) : r0_(r0), rc_(rc), r1_(r0 + rc) {
    if (!(r0 > 1.0)) throw DomainError("Rates: r0 must exceed 1");
    if (!(rc > 0.0)) throw DomainError("Rates: rc must be positive");
    exp_ = {interruption_exponent(r0_), interruption_exponent(r1_), fluid_exponent(r0_),
            fluid_exponent(r1_)};
  }

  double r0() const noexcept { return r0_; }
  double rc() const noexcept { return rc_; }
  double r1() const noexcept { return r1_; }
  const Exponents& exponents() const noexcept { return exp_; }

  /// (a0, a1) for the requested model: (alpha0, alpha1) or (theta0, theta1).
  std::pair<double, double> model_exponents(Model m) const noexcept {
    return m == Model::Poisson ? std::pair{exp_.alpha0, exp_.alpha1}
                               : std::pair{exp_.theta0, exp_.theta1};
  }

 private:
  double r0_, rc_, r1_;
  Exponents exp_{};
};

/// Initial buffer d (packets) and interruption tolerance eps.
struct QoETarget {
  double d;
  double eps;

  QoETarget(double d_, double eps_) : d(d_), eps(eps_) {
    if (!(d_ >= 0.0)) throw DomainError("QoETarget: d must be nonnegative");
    if (!(eps_ > 0.0 && eps_ < 1.0)) throw DomainError("QoETarget: eps must lie in (0,1)");
  }
};

enum class RegionClass { ZeroCost, NonDegenerate, Infeasible };

inline std::string_view to_string(RegionClass r) {
  switch (r) {
    case RegionClass::ZeroCost: return "zero-cost";
    case RegionClass::NonDegenerate: return "non-degenerate";
    case RegionClass::Infeasible: return "infeasible";
  }
  return "?";
}

struct RegionBounds {
  double d_min;  // below: infeasible
  double d_max;  // at or above: free server alone suffices
};

inline RegionBounds region_boundaries(double eps, const Rates& rates, Model model) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("region_boundaries: eps must lie in (0,1)");
  auto [a0, a1] = rates.model_exponents(model);
  const double log_inv = -std::log(eps);
  return {log_inv / a1, log_inv / a0};
}

/// Lower edge closed (NonDegenerate), upper edge ZeroCost.
inline RegionClass classify_region(const QoETarget& target, const Rates& rates, Model model) {
  const RegionBounds b = region_boundaries(target.eps, rates, model);
  if (target.d >= b.d_max) return RegionClass::ZeroCost;
  if (target.d < b.d_min) return RegionClass::Infeasible;
  return RegionClass::NonDegenerate;
}

}  // namespace qstream
