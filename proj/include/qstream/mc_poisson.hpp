#pragma once

// Event-driven Monte Carlo of the Poisson buffer model
//   Q_t = D + N_t + int_0^t u dN^c - t
// with regenerative analytic absorption of the free-server-only tails.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <variant>

#include "qstream/core.hpp"
#include "qstream/errors.hpp"
#include "qstream/estimate.hpp"
#include "qstream/policies.hpp"
#include "qstream/random.hpp"

namespace qstream {

enum class Absorption {
  /// Whenever u == 0 forever is guaranteed, draw the remaining interruption
  /// event from its closed form instead of simulating it. Exact in distribution.
  Analytic,
  /// Simulate everything; stop as "survived" at q >= q_max or t >= horizon.
  Cap,
};

struct SimConfig {
  std::size_t replicas = 10000;
  std::uint64_t master_seed = 1;
  Absorption absorption = Absorption::Analytic;
  double q_max = 500.0;
  double horizon = 1e5;
  std::uint64_t max_events = 1'000'000'000;
  unsigned workers = 0;  // 0: worker_count()
};

struct PathOutcome {
  bool interrupted = false;
  double cost = 0.0;  // time spent with u = 1
  std::uint64_t events = 0;
};

struct PolicyEstimate {
  Estimate p_hat;
  Estimate cost_hat;
};

/// One replica. The first draw of `stream` is the first inter-arrival time.
///
/// AlwaysBoth never enters a u == 0 regime, so it is always run against the
/// q_max / horizon caps; its cost is then the usage time until the cap.
inline PathOutcome simulate_path(const PolicySpec& policy, double d, const Rates& rates,
                                 RandomStream& stream, const SimConfig& cfg = {}) {
  if (!(d > 0.0)) throw DomainError("simulate_path: initial buffer must be positive");
  const double alpha0 = rates.exponents().alpha0;
  const bool analytic = cfg.absorption == Absorption::Analytic;
  const bool capped = !analytic || std::holds_alternative<AlwaysBoth>(policy);
  const Risky* risky = std::get_if<Risky>(&policy);
  const Offline* offline = std::get_if<Offline>(&policy);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  auto rate_of = [&](int u) { return u ? rates.r1() : rates.r0(); };

  PathOutcome out;
  PolicyState ps;
  double t = 0.0;
  double q = d;
  int u = decide(policy, ps, t, q);
  double next_arrival = stream.exponential(rate_of(u));

  for (;;) {
    if (++out.events > cfg.max_events) throw SimulationOverrun("simulate_path: event budget exhausted");

    if (analytic && u == 0) {
      if (risky == nullptr) {
        // Free server forever from here: interrupted w.p. e^{-alpha0 q}.
        out.interrupted = stream.bernoulli(std::exp(-alpha0 * q));
        return out;
      }
      // Above the risky threshold: the path comes back down to exactly T
      // (continuous drain) with probability e^{-alpha0 (q - T)}.
      if (!stream.bernoulli(std::exp(-alpha0 * (q - risky->threshold)))) return out;
      q = risky->threshold;
      u = 1;
      next_arrival = t + stream.exponential(rate_of(u));
      continue;
    }
    if (capped && (q >= cfg.q_max || t >= cfg.horizon)) return out;

    const double t_empty = t + q;
    double t_switch = kInf;
    if (offline != nullptr && u == 1) t_switch = offline->switch_time;
    if (risky != nullptr && u == 0 && risky->threshold > 0.0 && q >= risky->threshold)
      t_switch = t + (q - risky->threshold);

    if (t_empty <= next_arrival && t_empty <= t_switch) {
      out.cost += u * (t_empty - t);
      out.interrupted = true;
      return out;
    }

    const bool arrival = next_arrival <= t_switch;
    const double t_next = arrival ? next_arrival : t_switch;
    out.cost += u * (t_next - t);
    q -= t_next - t;
    t = t_next;

    int new_u;
    if (arrival) {
      q += 1.0;
      new_u = decide(policy, ps, t, q);
    } else if (risky != nullptr) {
      q = risky->threshold;
      new_u = 1;  // draining through T: just below it
    } else {
      new_u = decide(policy, ps, std::nextafter(t, kInf), q);  // just past t_s
    }
    if (arrival || new_u != u) {
      u = new_u;
      next_arrival = t + stream.exponential(rate_of(u));
    }
  }
}

/// Stream used by replica i of a run seeded with master_seed.
inline RandomStream replica_stream(std::uint64_t master_seed, std::size_t replica) {
  return RandomStream(master_seed, static_cast<std::uint64_t>(replica));
}

inline std::vector<PathOutcome> simulate_replicas(const PolicySpec& policy, double d, const Rates& rates,
                                                  const SimConfig& cfg) {
  if (cfg.replicas == 0) throw DomainError("SimConfig: replicas must be at least 1");
  if (cfg.absorption == Absorption::Cap && !(cfg.q_max > d))
    throw DomainError("SimConfig: q_max must exceed the initial buffer");
  const unsigned workers = cfg.workers ? cfg.workers : worker_count();
  return run_replicas<PathOutcome>(
      cfg.replicas,
      [&](std::size_t i) {
        RandomStream stream = replica_stream(cfg.master_seed, i);
        try {
          return simulate_path(policy, d, rates, stream, cfg);
        } catch (const SimulationOverrun& e) {
          throw SimulationOverrun(e.what(), i);
        }
      },
      workers);
}

inline PolicyEstimate summarize(const std::vector<PathOutcome>& paths) {
  RunningStats p, c;
  for (const auto& o : paths) {
    p.add(o.interrupted ? 1.0 : 0.0);
    c.add(o.cost);
  }
  return {p.estimate(), c.estimate()};
}

/// Interruption probability and expected usage time of `policy` from buffer d.
inline PolicyEstimate estimate(const PolicySpec& policy, double d, const Rates& rates, const SimConfig& cfg) {
  return summarize(simulate_replicas(policy, d, rates, cfg));
}

// ---------------------------------------------------------------------------
// Optional-stopping identities

struct StoppingIdentityReport {
  Estimate lhs;            // P(tau_e > tau_T)
  double rhs = 0.0;        // (1 - e^{-I d}) / (1 - E[e^{-I Q_tauT} | tau_e > tau_T])
  double rhs_std_error = 0.0;
  double difference = 0.0;
  double combined_std_error = 0.0;
  std::size_t survivors = 0;
  bool boundary_case = false;  // d == T: both sides are 1
  bool consistent = false;     // |difference| <= 3 combined_std_error
};

/// Two-sided exit of a single Poisson(rate) server started at d: empty
/// first, or reach at least `threshold` first.
inline StoppingIdentityReport stopping_identity_check(double d, double threshold, double rate, std::size_t n,
                                                      std::uint64_t seed) {
  if (!(d > 0.0 && d <= threshold)) throw DomainError("stopping_identity_check: need 0 < d <= threshold");
  if (n < 2) throw DomainError("stopping_identity_check: need at least two replicas");
  const double alpha = interruption_exponent(rate);
  StoppingIdentityReport rep;
  if (d == threshold) {
    rep.boundary_case = true;
    rep.lhs = {1.0, 0.0, n};
    rep.rhs = 1.0;
    rep.consistent = true;
    return rep;
  }

  struct Exit {
    bool survived;
    double y;  // e^{-alpha Q_tauT} when survived
  };
  auto exits = run_replicas<Exit>(n, [&](std::size_t i) {
    RandomStream s(seed, i);
    double q = d;
    for (std::uint64_t ev = 0;; ++ev) {
      if (ev > 1'000'000'000ull) throw SimulationOverrun("stopping_identity_check", i);
      const double gap = s.exponential(rate);
      if (gap >= q) return Exit{false, 0.0};
      q += 1.0 - gap;
      if (q >= threshold) return Exit{true, std::exp(-alpha * q)};
    }
  });

  RunningStats lhs, y;
  for (const auto& e : exits) {
    lhs.add(e.survived ? 1.0 : 0.0);
    if (e.survived) y.add(e.y);
  }
  rep.lhs = lhs.estimate();
  rep.survivors = y.count();
  const double numer = -std::expm1(-alpha * d);
  const double m = y.mean();
  rep.rhs = numer / (1.0 - m);
  const double y_se = y.count() > 1 ? std::sqrt(y.variance() / static_cast<double>(y.count())) : 0.0;
  rep.rhs_std_error = numer / ((1.0 - m) * (1.0 - m)) * y_se;
  rep.difference = rep.lhs.mean - rep.rhs;
  rep.combined_std_error = std::hypot(rep.lhs.std_error(), rep.rhs_std_error);
  rep.consistent = std::abs(rep.difference) <= 3.0 * rep.combined_std_error;
  return rep;
}

struct WaldReport {
  Estimate hitting_time;  // E[tau_level]
  Estimate overshoot;     // E[Q_tau - level], in [0, 1)
  double lo = 0.0;        // (level - d) / (rate - 1)
  double hi = 0.0;        // (level - d + 1) / (rate - 1)
  bool consistent = false;
};

/// First passage of the unkilled single-server process (rate, started at d)
/// to `level`, against the Wald bounds D + (R - 1) E[tau] = E[Q_tau] in [S, S + 1).
inline WaldReport wald_check(double d, double level, double rate, std::size_t n, std::uint64_t seed) {
  if (!(rate > 1.0)) throw DomainError("wald_check: rate must exceed 1");
  if (n < 2) throw DomainError("wald_check: need at least two replicas");
  struct Passage {
    double tau;
    double overshoot;
  };
  auto runs = run_replicas<Passage>(n, [&](std::size_t i) {
    RandomStream s(seed, i);
    double q = d, t = 0.0;
    for (std::uint64_t ev = 0; q < level; ++ev) {
      if (ev > 1'000'000'000ull) throw SimulationOverrun("wald_check", i);
      const double gap = s.exponential(rate);
      t += gap;
      q += 1.0 - gap;
    }
    return Passage{t, q - level};
  });
  RunningStats tau, over;
  for (const auto& r : runs) {
    tau.add(r.tau);
    over.add(r.overshoot);
  }
  WaldReport rep;
  rep.hitting_time = tau.estimate();
  rep.overshoot = over.estimate();
  const double gap = std::max(0.0, level - d);
  rep.lo = gap / (rate - 1.0);
  rep.hi = (gap + 1.0) / (rate - 1.0);
  const double tol = 3.0 * rep.hitting_time.std_error();
  rep.consistent = rep.hitting_time.mean >= rep.lo - tol && rep.hitting_time.mean <= rep.hi + tol;
  return rep;
}

/// wald_check at the designed safe level S* for (target, rates), using rate r1.
inline WaldReport wald_check(const QoETarget& target, const Rates& rates, std::size_t n, std::uint64_t seed) {
  const ParameterDesign s = design_safe(target, rates);
  return wald_check(target.d, s.raw, rates.r1(), n, seed);
}

}  // namespace qstream
