// Designs the three switching policies for one QoE target, prints their
// analytic costs, then checks each design by simulation.
//
//   design_walkthrough [D] [eps]

#include <cstdio>
#include <cstdlib>

#include "qstream/qstream.hpp"

using namespace qstream;

int main(int argc, char** argv) {
  const double d = argc > 1 ? std::atof(argv[1]) : 20.0;
  const double eps = argc > 2 ? std::atof(argv[2]) : 1e-3;
  const Rates rates(1.05, 0.15);
  const QoETarget target(d, eps);

  const auto bounds = region_boundaries(eps, rates, Model::Poisson);
  std::printf("free exponent %.6f, combined exponent %.6f\n", rates.exponents().alpha0, rates.exponents().alpha1);
  std::printf("eps=%g: feasible for D >= %.3f, free for D >= %.3f\n", eps, bounds.d_min, bounds.d_max);

  const RegionClass region = classify_region(target, rates, Model::Poisson);
  std::printf("target (D=%g, eps=%g) is %s\n\n", d, eps, std::string(to_string(region)).c_str());
  if (region == RegionClass::Infeasible) return 2;

  const auto offline = design_offline(target, rates);
  const auto safe = design_safe(target, rates);
  const auto safe_cost = safe_cost_bounds(target, rates);
  const auto risky = design_risky(target, rates);

  std::printf("%-8s %-12s %-26s\n", "policy", "parameter", "analytic cost (packets)");
  std::printf("%-8s t_s=%-8.3f %.3f\n", "offline", offline.value, offline.value * rates.rc());
  std::printf("%-8s S=%-10.3f [%.3f, %.3f]\n", "safe", safe.value, safe_cost.lo * rates.rc(),
              safe_cost.hi * rates.rc());
  if (region == RegionClass::NonDegenerate)
    std::printf("%-8s T=%-10.3f <= %.3f\n", "risky", risky.t_star,
                risky_cost_bound(target, rates, risky) * rates.rc());
  std::printf("\n");

  const SimConfig cfg{.replicas = 20000, .master_seed = 1};
  std::printf("%-8s %-22s %-22s\n", "policy", "P(interruption)", "cost (packets)");
  for (const PolicySpec& p : {PolicySpec{Offline{offline.value}}, PolicySpec{Safe{safe.value}},
                              PolicySpec{Risky{risky.t_star}}}) {
    const auto e = estimate(p, d, rates, cfg);
    std::printf("%-8s %.2e +- %.1e      %.3f +- %.3f\n", describe(p).substr(0, describe(p).find(':')).c_str(),
                e.p_hat.mean, e.p_hat.half_width_95, e.cost_hat.mean * rates.rc(),
                e.cost_hat.half_width_95 * rates.rc());
  }
  return 0;
}
