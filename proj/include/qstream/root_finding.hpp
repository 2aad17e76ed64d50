#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>

#include "qstream/errors.hpp"

namespace qstream::root {

struct Bracket {
  double lo;
  double hi;
};

/// Plain bisection on a sign-changing bracket. Stops when the bracket width
/// drops below `width_tol` (relative to the larger endpoint) or stops shrinking.
template <std::floating_point Real, std::invocable<Real> F>
Real bisect(F&& f, Real lo, Real hi, Real width_tol = std::numeric_limits<Real>::epsilon(),
            int max_iter = 2000) {
  Real flo = f(lo);
  Real fhi = f(hi);
  if (flo == Real(0)) return lo;
  if (fhi == Real(0)) return hi;
  if ((flo < 0) == (fhi < 0)) throw DomainError("bisect: root not bracketed");
  for (int i = 0; i < max_iter; ++i) {
    Real mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    Real fm = f(mid);
    if (fm == Real(0)) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= width_tol * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return lo + (hi - lo) / 2;
}

struct HybridOptions {
  double bisect_rel_width = 1e-8;  // bisection phase stops here
  double step_rel_tol = 2 * std::numeric_limits<double>::epsilon();  // Newton stops below this |dx| / |x|
  int max_newton = 60;
};

/// Bisection down to a coarse relative width, then Newton polishing that
/// falls back to bisection whenever a step leaves the current bracket.
template <std::invocable<double> F, std::invocable<double> DF>
double bisect_then_newton(F&& f, DF&& df, Bracket b, const HybridOptions& opt = {}) {
  double lo = b.lo, hi = b.hi;
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0) == (fhi < 0)) throw DomainError("bisect_then_newton: root not bracketed");
  const bool increasing = flo < 0;

  auto shrink = [&](double x, double fx) {
    if ((fx < 0) == increasing) {
      lo = x;
    } else {
      hi = x;
    }
  };

  while (hi - lo > opt.bisect_rel_width * hi) {
    double mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    double fm = f(mid);
    if (fm == 0.0) return mid;
    shrink(mid, fm);
  }

  double x = lo + (hi - lo) / 2;
  double fx = f(x);
  for (int i = 0; i < opt.max_newton && fx != 0.0; ++i) {
    shrink(x, fx);
    double d = df(x);
    double next = (d != 0.0) ? x - fx / d : lo + (hi - lo) / 2;
    if (!(next > lo && next < hi)) next = lo + (hi - lo) / 2;
    const double step = std::abs(next - x);
    x = next;
    fx = f(x);
    if (step <= opt.step_rel_tol * std::abs(x)) break;
  }
  return x;
}

}  // namespace qstream::root
