#pragma once

// Euler discretisation of the fluid model dQ = (R_u - 1) dt + dW under the
// risky threshold rule, with a Brownian-bridge correction for crossings of 0
// inside a step, plus a co-simulation of the expanded state (Q, p) under the
// optimal feedback controls.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "qstream/core.hpp"
#include "qstream/errors.hpp"
#include "qstream/estimate.hpp"
#include "qstream/fluid.hpp"
#include "qstream/mc_poisson.hpp"
#include "qstream/random.hpp"

namespace qstream {

struct FluidPathOptions {
  double dt = 1e-3;
  bool bridge = true;
  std::uint64_t max_steps = 1'000'000'000;
};

/// One Euler path from d under "use both servers iff 0 < Q < t_thr".
///
/// Above the threshold the free-server-only excursion is absorbed in closed
/// form: the path returns to t_thr with probability e^{-theta0 (Q - t_thr)}
/// and otherwise never empties. A path that returns resumes at t_thr as if
/// arriving from above, i.e. on the u = 1 side.
inline PathOutcome simulate_fluid_path(double t_thr, double d, const Rates& rates, RandomStream& stream,
                                       const FluidPathOptions& opt = {}) {
  if (!(d > 0.0)) throw DomainError("simulate_fluid_path: initial buffer must be positive");
  if (!(opt.dt > 0.0)) throw DomainError("simulate_fluid_path: dt must be positive");
  if (!(t_thr >= 0.0 && std::isfinite(t_thr))) throw DomainError("simulate_fluid_path: threshold must be finite");
  const double theta0 = rates.exponents().theta0;
  const double dt = opt.dt, sdt = std::sqrt(dt);
  const double up1 = (rates.r1() - 1.0) * dt;
  // Bridge crossings with exp(-2ab/dt) below this are never sampled.
  constexpr double kBridgeCutoff = 40.0;

  PathOutcome out;
  double q = d;
  bool from_above = false;
  for (;;) {
    if (q >= t_thr && !from_above) {
      if (!stream.bernoulli(std::exp(-theta0 * (q - t_thr)))) return out;
      if (t_thr == 0.0) {
        out.interrupted = true;
        return out;
      }
      q = t_thr;
      from_above = true;
    }
    if (++out.events > opt.max_steps) throw SimulationOverrun("simulate_fluid_path: step budget exhausted");
    const double next = q + up1 + sdt * stream.normal();
    out.cost += dt;
    if (next <= 0.0) {
      out.interrupted = true;
      return out;
    }
    if (opt.bridge) {
      const double x = 2.0 * q * next / dt;
      if (x < kBridgeCutoff && stream.bernoulli(std::exp(-x))) {
        out.interrupted = true;
        return out;
      }
    }
    q = next;
    from_above = false;
  }
}

inline PolicyEstimate estimate_fluid(double t_thr, double d, const Rates& rates, const SimConfig& cfg,
                                     const FluidPathOptions& opt = {}) {
  if (cfg.replicas == 0) throw DomainError("SimConfig: replicas must be at least 1");
  const unsigned workers = cfg.workers ? cfg.workers : worker_count();
  auto paths = run_replicas<PathOutcome>(
      cfg.replicas,
      [&](std::size_t i) {
        RandomStream stream = replica_stream(cfg.master_seed, i);
        try {
          return simulate_fluid_path(t_thr, d, rates, stream, opt);
        } catch (const SimulationOverrun& e) {
          throw SimulationOverrun(e.what(), i);
        }
      },
      workers);
  return summarize(paths);
}

// ---------------------------------------------------------------------------
// Invariant manifold

struct ManifoldLevel {
  double dt = 0.0;
  double median_max_deviation = 0.0;
  double mean_max_deviation = 0.0;
  std::size_t paths = 0;
  std::size_t excluded = 0;  // p left (0, 1) or the feasible region
  std::size_t interrupted = 0;
};

struct ManifoldReport {
  double t_star = 0.0;
  ManifoldLevel levels[3];  // dt, dt/2, dt/4
  /// median(dt) / median(dt/4); about 2 under strong order 1/2.
  double refinement_ratio = 0.0;
};

struct ManifoldOptions {
  double horizon = 50.0;
  double q_cap = std::numeric_limits<double>::infinity();  // default: anchor.d + 40
  unsigned workers = 0;
};

namespace detail {

struct ManifoldPath {
  double max_dev = 0.0;
  bool excluded = false;
  bool interrupted = false;
};

inline ManifoldPath manifold_path(const QoETarget& anchor, const FluidModel<double>& m, double t_star,
                                  const Rates& rates, double dt, double horizon, double q_cap,
                                  RandomStream& stream) {
  const double sdt = std::sqrt(dt);
  const double drift[2] = {(rates.r0() - 1.0) * dt, (rates.r1() - 1.0) * dt};
  ManifoldPath out;
  double q = anchor.d, p = anchor.eps;
  const auto steps = static_cast<std::uint64_t>(std::ceil(horizon / dt));
  for (std::uint64_t k = 0; k < steps && q < q_cap; ++k) {
    if (!(p > 0.0 && p < 1.0) || m.below_feasible(q, p)) {
      out.excluded = true;
      return out;
    }
    const bool free_only = m.free_only(q, p);
    const double phi = free_only ? -m.theta0 * p : -m.theta1 * (1.0 - p) / std::expm1(m.theta1 * q);
    const double dw = sdt * stream.normal();
    q += drift[free_only ? 0 : 1] + dw;
    p += phi * dw;
    if (q <= 0.0) {
      out.interrupted = true;
      return out;
    }
    out.max_dev = std::max(out.max_dev, std::abs(p - m.interruption_probability(q, t_star)));
  }
  return out;
}

}  // namespace detail

/// Co-simulates (Q_t, p_t) from the anchor with dp = phi* dW on the same
/// noise as Q, recording max_t |p_t - manifold_p(Q_t)| per path. Runs the
/// three step sizes dt, dt/2, dt/4 with stream seeds shared across levels.
inline ManifoldReport manifold_invariance_check(const QoETarget& anchor, const Rates& rates, double dt, std::size_t n,
                                                std::uint64_t seed, const ManifoldOptions& opt = {}) {
  if (classify_region(anchor, rates, Model::Fluid) != RegionClass::NonDegenerate)
    throw InfeasibleTarget("manifold_invariance_check: anchor must be non-degenerate");
  if (!(dt > 0.0) || n == 0) throw DomainError("manifold_invariance_check: need dt > 0 and n >= 1");
  const auto m = FluidModel<double>::from(rates);
  ManifoldReport rep;
  rep.t_star = m.design_threshold(anchor.d, anchor.eps);
  const double q_cap = std::isfinite(opt.q_cap) ? opt.q_cap : anchor.d + 40.0;
  const unsigned workers = opt.workers ? opt.workers : worker_count();

  for (int level = 0; level < 3; ++level) {
    const double h = dt / static_cast<double>(1 << level);
    auto paths = run_replicas<detail::ManifoldPath>(
        n,
        [&](std::size_t i) {
          RandomStream stream(seed, i);
          return detail::manifold_path(anchor, m, rep.t_star, rates, h, opt.horizon, q_cap, stream);
        },
        workers);
    ManifoldLevel& lv = rep.levels[level];
    lv.dt = h;
    lv.paths = n;
    std::vector<double> devs;
    devs.reserve(n);
    for (const auto& p : paths) {
      if (p.excluded) {
        ++lv.excluded;
        continue;
      }
      if (p.interrupted) ++lv.interrupted;
      devs.push_back(p.max_dev);
    }
    if (!devs.empty()) {
      lv.mean_max_deviation = make_estimate(devs).mean;
      auto mid = devs.begin() + static_cast<std::ptrdiff_t>(devs.size() / 2);
      std::nth_element(devs.begin(), mid, devs.end());
      lv.median_max_deviation = *mid;
      if (devs.size() % 2 == 0) {
        const double lower = *std::max_element(devs.begin(), mid);
        lv.median_max_deviation = 0.5 * (lv.median_max_deviation + lower);
      }
    }
  }
  rep.refinement_ratio = rep.levels[0].median_max_deviation / rep.levels[2].median_max_deviation;
  return rep;
}

}  // namespace qstream
