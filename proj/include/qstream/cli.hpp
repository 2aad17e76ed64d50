#pragma once

// The qstream command-line front end. Every command writes CSV to `out`: a
// '#' provenance block, one header row, then data rows. Exit status is 0 on
// success, 2 when a requested target is infeasible, 1 on usage errors.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qstream/config.hpp"
#include "qstream/core.hpp"
#include "qstream/errors.hpp"
#include "qstream/fluid.hpp"
#include "qstream/mc_fluid.hpp"
#include "qstream/mc_poisson.hpp"
#include "qstream/poisson_hjb.hpp"
#include "qstream/policies.hpp"
#include "qstream/rlnc.hpp"

namespace qstream::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2 };

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string num_list(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : ",") + num(x);
  return s;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void comment(const std::string& text) { out_ << "# " << text << '\n'; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

inline Model parse_model(const std::string& s) {
  if (s == "poisson") return Model::Poisson;
  if (s == "fluid") return Model::Fluid;
  throw ConfigError("unknown model '" + s + "' (expected poisson or fluid)");
}

// ---------------------------------------------------------------------------
// Policy design shared by design / simulate / tradeoff

struct DesignRow {
  std::string policy;
  RegionClass region = RegionClass::NonDegenerate;
  bool feasible = true;
  std::string note;
  double parameter = 0.0;
  double raw = 0.0;
  std::optional<double> cost_lo;  // time units
  std::optional<double> cost_hi;
  std::optional<PolicySpec> spec;  // Poisson policies only
};

inline DesignRow design_policy(const std::string& policy, const QoETarget& target, const Rates& rates) {
  DesignRow r;
  r.policy = policy;
  const Model model = policy == "fluid" ? Model::Fluid : Model::Poisson;
  r.region = classify_region(target, rates, model);
  if (policy == "free") {
    r.spec = AlwaysFree{};
    r.cost_lo = r.cost_hi = 0.0;
    return r;
  }
  if (policy == "both") {
    r.spec = AlwaysBoth{};
    return r;
  }
  if (policy != "offline" && policy != "safe" && policy != "risky" && policy != "fluid")
    throw ConfigError("unknown policy '" + policy + "' (expected free, both, offline, safe, risky or fluid)");
  if (r.region == RegionClass::Infeasible) {
    r.feasible = false;
    r.note = "infeasible target";
    return r;
  }
  try {
    if (policy == "offline") {
      const auto d = design_offline(target, rates);
      r.parameter = d.value;
      r.raw = d.raw;
      r.note = d.zero_cost ? "zero-cost" : (d.clamped ? "clamped" : "");
      r.cost_lo = r.cost_hi = d.value;
      r.spec = Offline{d.value};
    } else if (policy == "safe") {
      const auto d = design_safe(target, rates);
      r.parameter = d.value;
      r.raw = d.raw;
      r.note = d.zero_cost ? "zero-cost" : (d.clamped ? "clamped" : "");
      if (d.zero_cost) {
        r.cost_lo = r.cost_hi = 0.0;
      } else {
        const auto b = safe_cost_bounds(target, rates);
        r.cost_lo = b.lo;
        r.cost_hi = b.hi;
      }
      r.spec = Safe{d.value};
    } else if (policy == "risky") {
      if (r.region == RegionClass::ZeroCost) {
        r.note = "zero-cost";
        r.cost_lo = r.cost_hi = 0.0;
        r.spec = Risky{0.0};
      } else {
        const auto d = design_risky(target, rates);
        r.parameter = r.raw = d.t_star;
        r.note = std::string(d.branch == RiskyBranch::Above ? "above" : "below") + (d.clamped ? " clamped" : "");
        r.cost_lo = 0.0;
        r.cost_hi = risky_cost_bound(target, rates, d);
        r.spec = Risky{d.t_star};
      }
    } else {
      const double t = fluid_design_threshold(target, rates);
      r.parameter = r.raw = t;
      r.note = r.region == RegionClass::ZeroCost ? "zero-cost" : "";
      r.cost_lo = r.cost_hi = fluid_cost(target.d, t, rates);
    }
  } catch (const InfeasibleTarget& e) {
    r.feasible = false;
    r.note = e.what();
  } catch (const BranchDomainError& e) {
    r.feasible = false;
    r.note = e.what();
  }
  return r;
}

inline std::string opt_num(const std::optional<double>& x, double scale = 1.0) {
  return x ? num(*x * scale) : std::string();
}

// ---------------------------------------------------------------------------
// Experiment configuration files

struct ExperimentConfig {
  Config raw;
  Model model = Model::Poisson;
  double r0 = 1.05, rc = 0.15, eps = 1e-3;
  std::vector<double> d_grid;
  std::vector<std::string> policies;
  SimConfig sim;
  FluidPathOptions fluid;
  std::optional<double> threshold;
};

inline ExperimentConfig load_experiment(const std::string& path, const std::string& default_d,
                                        const std::string& default_policies) {
  ExperimentConfig c;
  c.raw = Config::load(path);
  const Config& k = c.raw;
  c.model = parse_model(k.get_string("model", "poisson"));
  c.r0 = k.get_double("r0", c.r0);
  c.rc = k.get_double("rc", c.rc);
  c.eps = k.get_double("eps", c.eps);
  c.d_grid = k.has("d") ? k.get_double_list("d", "") : k.get_double_list("d_grid", default_d);
  if (c.d_grid.empty()) throw ConfigError("config: no initial buffer given (keys d or d_grid)");
  c.policies = k.get_list("policies", c.model == Model::Fluid ? "fluid" : default_policies);
  if (c.policies.empty()) throw ConfigError("config: empty policy list");
  c.sim.replicas = k.get_u64("replicas", 10000);
  if (c.sim.replicas == 0) throw ConfigError("config: replicas must be at least 1");
  c.sim.master_seed = k.get_u64("seed", 1);
  const std::string absorption = k.get_string("absorption", "analytic");
  if (absorption == "analytic") c.sim.absorption = Absorption::Analytic;
  else if (absorption == "cap") c.sim.absorption = Absorption::Cap;
  else throw ConfigError("config: absorption must be analytic or cap");
  c.sim.q_max = k.get_double("q_max", c.sim.q_max);
  c.sim.horizon = k.get_double("horizon", c.sim.horizon);
  c.fluid.dt = k.get_double("dt", c.fluid.dt);
  if (!(c.fluid.dt > 0.0)) throw ConfigError("config: dt must be positive");
  c.fluid.bridge = k.get_bool("bridge", c.fluid.bridge);
  if (k.has("threshold")) c.threshold = k.get_double("threshold", 0.0);
  return c;
}

struct SimRow {
  DesignRow design;
  std::optional<PolicyEstimate> est;
};

inline SimRow run_point(const ExperimentConfig& c, const std::string& policy, double d, const Rates& rates) {
  const QoETarget target(d, c.eps);
  SimRow row{design_policy(policy, target, rates), std::nullopt};
  if (policy == "fluid") {
    if (c.threshold) {
      row.design.parameter = row.design.raw = *c.threshold;
      row.design.feasible = true;
      row.design.note = "given";
      row.design.cost_lo = row.design.cost_hi = fluid_cost(d, *c.threshold, rates);
    }
    if (row.design.feasible) row.est = estimate_fluid(row.design.parameter, d, rates, c.sim, c.fluid);
    return row;
  }
  if (c.model == Model::Fluid) throw ConfigError("config: model=fluid only supports the policy 'fluid'");
  if (policy == "risky" && c.threshold) {
    row.design.parameter = row.design.raw = *c.threshold;
    row.design.spec = Risky{*c.threshold};
    row.design.feasible = true;
    row.design.note = "given";
    row.design.cost_lo = row.design.cost_hi = std::nullopt;
  }
  if (row.design.feasible && row.design.spec) row.est = estimate(*row.design.spec, d, rates, c.sim);
  return row;
}

inline void write_provenance(CsvWriter& csv, const std::string& command, const ExperimentConfig& c) {
  csv.comment("qstream " + command);
  csv.comment("config: " + c.raw.canonical());
  csv.comment("master_seed=" + std::to_string(c.sim.master_seed) + " replicas=" + std::to_string(c.sim.replicas));
}

inline int cmd_experiment(const std::string& command, const std::string& path, std::ostream& out) {
  const bool sweep = command == "tradeoff";
  const ExperimentConfig c = load_experiment(path, sweep ? "20,35,50,65" : "20", "offline,safe,risky");
  const Rates rates(c.r0, c.rc);
  CsvWriter csv(out);
  write_provenance(csv, command, c);
  csv.row({"model", "policy", "d", "eps", "status", "note", "parameter", "analytic_cost_lo_packets",
           "analytic_cost_hi_packets", "p_hat", "p_hw", "cost_time", "cost_time_hw", "cost_packets",
           "cost_packets_hw"});
  int code = kOk;
  for (double d : c.d_grid) {
    for (const auto& policy : c.policies) {
      const SimRow r = run_point(c, policy, d, rates);
      const DesignRow& g = r.design;
      if (!g.feasible) code = kInfeasible;
      std::vector<std::string> cells{std::string(to_string(c.model)), policy, num(d), num(c.eps),
                                     g.feasible ? std::string(to_string(g.region)) : "infeasible",
                                     "\"" + g.note + "\"", g.feasible ? num(g.parameter) : "",
                                     opt_num(g.cost_lo, c.rc), opt_num(g.cost_hi, c.rc)};
      if (r.est) {
        const auto& e = *r.est;
        for (double x : {e.p_hat.mean, e.p_hat.half_width_95, e.cost_hat.mean, e.cost_hat.half_width_95,
                         e.cost_hat.mean * c.rc, e.cost_hat.half_width_95 * c.rc})
          cells.push_back(num(x));
      } else {
        cells.insert(cells.end(), 6, "");
      }
      csv.row(cells);
    }
  }
  return code;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"qstream: server-association policies for streaming from a free and a costly server"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help message and exit");  // frees -h for hjb-check --h

  double rate = 0.0;
  auto* exponent = app.add_subcommand("exponent", "interruption exponent I(R) and fluid exponent 2(R-1)");
  exponent->add_option("--rate", rate, "merged arrival rate R > 1")->required();

  double r0 = 1.05, rc = 0.15, eps = 1e-3, d = 20.0;
  std::vector<double> eps_list, d_list;
  std::string model_name = "poisson";
  auto* regions = app.add_subcommand("regions", "(D, eps) region boundaries");
  regions->add_option("--r0", r0, "free-server rate")->capture_default_str();
  regions->add_option("--rc", rc, "costly-server rate")->capture_default_str();
  regions->add_option("--eps", eps_list, "interruption tolerances")->delimiter(',')->required();
  regions->add_option("--d", d_list, "initial buffers to classify")->delimiter(',');
  regions->add_option("--model", model_name, "poisson or fluid")->capture_default_str();

  std::string policy;
  auto* design = app.add_subcommand("design", "designed policy parameter and analytic cost");
  design->add_option("--policy", policy, "offline, safe, risky or fluid")
      ->required()
      ->check(CLI::IsMember({"offline", "safe", "risky", "fluid"}));
  design->add_option("--d", d, "initial buffer (packets)")->required();
  design->add_option("--eps", eps, "interruption tolerance")->required();
  design->add_option("--r0", r0, "free-server rate")->capture_default_str();
  design->add_option("--rc", rc, "costly-server rate")->capture_default_str();

  std::string config_path;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates for the policies in a config file");
  simulate->add_option("--config", config_path, "key=value config file")->required();
  auto* tradeoff = app.add_subcommand("tradeoff", "designed parameters, analytic costs and MC costs over a D grid");
  tradeoff->add_option("--config", config_path, "key=value config file")->required();

  std::size_t grid = 100;
  double h = 0.0;
  std::size_t phi_grid = 1000;
  auto* hjb = app.add_subcommand("hjb-check", "finite-difference HJB residuals of the candidate value functions");
  hjb->add_option("--model", model_name, "poisson or fluid")->capture_default_str();
  hjb->add_option("--grid", grid, "points per sub-region (fluid) or in total (poisson)")->capture_default_str();
  hjb->add_option("--h", h, "difference step (default 1e-3 fluid, 1e-4 poisson)");
  hjb->add_option("--phi-grid", phi_grid, "phi grid size (poisson)")->capture_default_str();
  hjb->add_option("--r0", r0, "free-server rate")->capture_default_str();
  hjb->add_option("--rc", rc, "costly-server rate")->capture_default_str();

  double dt = 1e-3;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  auto* manifold = app.add_subcommand("manifold", "deviation of the controlled (Q, p) path from its manifold");
  manifold->add_option("--d", d, "anchor buffer")->required();
  manifold->add_option("--eps", eps, "anchor tolerance")->required();
  manifold->add_option("--r0", r0, "free-server rate")->capture_default_str();
  manifold->add_option("--rc", rc, "costly-server rate")->capture_default_str();
  manifold->add_option("--dt", dt, "coarsest step")->capture_default_str();
  manifold->add_option("--n", n, "paths per step size")->capture_default_str();
  manifold->add_option("--seed", seed, "master seed")->capture_default_str();

  unsigned q = 256;
  std::size_t block = 32, replicas = 10, payload = 0;
  std::vector<double> servers;
  double horizon = 1000.0;
  auto* rl = app.add_subcommand("rlnc", "merged coded delivery from several servers");
  rl->add_option("--q", q, "field size")->check(CLI::IsMember({2u, 256u}))->capture_default_str();
  rl->add_option("--block", block, "block size W")->capture_default_str();
  rl->add_option("--servers", servers, "server rates")->delimiter(',')->required();
  rl->add_option("--horizon", horizon, "delivery horizon")->capture_default_str();
  rl->add_option("--replicas", replicas, "independent runs")->capture_default_str();
  rl->add_option("--payload", payload, "payload bytes per packet")->capture_default_str();
  rl->add_option("--seed", seed, "master seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CsvWriter csv(out);
  try {
    if (*exponent) {
      csv.comment("qstream exponent rate=" + num(rate));
      csv.row({"rate", "alpha", "theta"});
      csv.row({num(rate), num(interruption_exponent(rate)), num(fluid_exponent(rate))});
      return kOk;
    }

    if (*regions) {
      const Model model = parse_model(model_name);
      const Rates rates(r0, rc);
      csv.comment("qstream regions model=" + model_name + " r0=" + num(r0) + " rc=" + num(rc) +
                  " eps=" + num_list(eps_list) + (d_list.empty() ? "" : " d=" + num_list(d_list)));
      if (d_list.empty()) {
        csv.row({"model", "eps", "d_min", "d_max"});
        for (double e : eps_list) {
          const auto b = region_boundaries(e, rates, model);
          csv.row({model_name, num(e), num(b.d_min), num(b.d_max)});
        }
      } else {
        csv.row({"model", "eps", "d", "d_min", "d_max", "class"});
        for (double e : eps_list) {
          const auto b = region_boundaries(e, rates, model);
          for (double x : d_list)
            csv.row({model_name, num(e), num(x), num(b.d_min), num(b.d_max),
                     std::string(to_string(classify_region(QoETarget(x, e), rates, model)))});
        }
      }
      return kOk;
    }

    if (*design) {
      const Rates rates(r0, rc);
      const DesignRow r = design_policy(policy, QoETarget(d, eps), rates);
      csv.comment("qstream design policy=" + policy + " d=" + num(d) + " eps=" + num(eps) + " r0=" + num(r0) +
                  " rc=" + num(rc));
      csv.row({"policy", "d", "eps", "region", "status", "note", "parameter", "raw", "cost_lo_time", "cost_hi_time",
               "cost_lo_packets", "cost_hi_packets"});
      csv.row({policy, num(d), num(eps), std::string(to_string(r.region)), r.feasible ? "ok" : "infeasible",
               "\"" + r.note + "\"", r.feasible ? num(r.parameter) : "", r.feasible ? num(r.raw) : "",
               opt_num(r.cost_lo), opt_num(r.cost_hi), opt_num(r.cost_lo, rc), opt_num(r.cost_hi, rc)});
      return r.feasible ? kOk : kInfeasible;
    }

    if (*simulate) return cmd_experiment("simulate", config_path, out);
    if (*tradeoff) return cmd_experiment("tradeoff", config_path, out);

    if (*hjb) {
      const Model model = parse_model(model_name);
      const Rates rates(r0, rc);
      if (grid == 0) throw ConfigError("hjb-check: --grid must be positive");
      const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(grid))));
      if (model == Model::Fluid) {
        const double step = h > 0.0 ? h : 1e-3;
        csv.comment("qstream hjb-check model=fluid r0=" + num(r0) + " rc=" + num(rc) + " grid=" +
                    std::to_string(side) + "x" + std::to_string(side) + " per sub-region, q in [3, 40] h=" + num(step));
        csv.row({"subregion", "q", "p", "value", "residual", "residual_half_h", "ratio", "u_argmin", "phi_argmin",
                 "phi_explicit"});
        for (auto region : {FluidSubregion::FreeOnly, FluidSubregion::BothServers}) {
          for (const auto& s : fluid_interior_grid(rates, region, side, side, 3.0, 40.0)) {
            try {
              const auto a = fluid_hjb_residual(s, rates, step);
              const auto b = fluid_hjb_residual(s, rates, step / 2);
              csv.row({std::string(to_string(region)), num(s.q), num(s.p), num(a.v), num(a.residual),
                       num(b.residual), num(a.residual / b.residual), std::to_string(a.u_argmin),
                       num(a.phi_argmin), num(a.phi_explicit)});
            } catch (const StencilOutOfRegion&) {
              csv.row({std::string(to_string(region)), num(s.q), num(s.p), "", "stencil-out-of-region", "", "", "",
                       "", ""});
            }
          }
        }
        return kOk;
      }
      const double step = h > 0.0 ? h : 1e-4;
      const auto& e = rates.exponents();
      csv.comment("qstream hjb-check model=poisson r0=" + num(r0) + " rc=" + num(rc) + " grid=" +
                  std::to_string(side) + "x" + std::to_string(side) + " q in [5, 60] h=" + num(step) +
                  " phi_grid=" + std::to_string(phi_grid));
      csv.row({"q", "p", "zone", "lhs", "rhs", "residual", "u", "phi", "jump_to_zero_cost"});
      for (std::size_t i = 0; i < side; ++i) {
        const double qq = side == 1 ? 5.0 : 5.0 + 55.0 * static_cast<double>(i) / static_cast<double>(side - 1);
        for (std::size_t j = 0; j < side; ++j) {
          const double s = side == 1 ? 0.5 : 0.15 + 0.7 * static_cast<double>(j) / static_cast<double>(side - 1);
          const double pp = std::exp(-(e.alpha1 + s * (e.alpha0 - e.alpha1)) * qq);
          try {
            const auto r = poisson_hjb_residual(qq, pp, rates, step, phi_grid);
            csv.row({num(qq), num(pp), std::string(to_string(r.zone)), num(r.lhs), num(r.rhs), num(r.residual),
                     std::to_string(r.u), num(r.phi), r.jump_to_zero_cost ? "1" : "0"});
          } catch (const DomainError&) {
            csv.row({num(qq), num(pp), "", "", "", "domain-error", "", "", ""});
          }
        }
      }
      return kOk;
    }

    if (*manifold) {
      const Rates rates(r0, rc);
      const QoETarget anchor(d, eps);
      if (classify_region(anchor, rates, Model::Fluid) != RegionClass::NonDegenerate) {
        csv.comment("qstream manifold d=" + num(d) + " eps=" + num(eps));
        csv.row({"status"});
        csv.row({"anchor is not in the non-degenerate fluid region"});
        return kInfeasible;
      }
      const auto rep = manifold_invariance_check(anchor, rates, dt, n, seed);
      csv.comment("qstream manifold d=" + num(d) + " eps=" + num(eps) + " r0=" + num(r0) + " rc=" + num(rc) +
                  " dt=" + num(dt) + " n=" + std::to_string(n) + " seed=" + std::to_string(seed));
      csv.comment("threshold=" + num(rep.t_star) + " median_ratio_dt_over_dt4=" + num(rep.refinement_ratio));
      csv.row({"dt", "paths", "excluded", "interrupted", "median_max_deviation", "mean_max_deviation"});
      for (const auto& lv : rep.levels)
        csv.row({num(lv.dt), std::to_string(lv.paths), std::to_string(lv.excluded), std::to_string(lv.interrupted),
                 num(lv.median_max_deviation), num(lv.mean_max_deviation)});
      return kOk;
    }

    if (*rl) {
      rlnc::MergeConfig mc;
      mc.replicas = replicas;
      mc.master_seed = seed;
      mc.payload_len = payload;
      const auto rep = rlnc::merge_experiment(servers, horizon, block, q, mc);
      csv.comment("qstream rlnc q=" + std::to_string(q) + " block=" + std::to_string(block) + " servers=" +
                  num_list(servers) + " horizon=" + num(horizon) + " replicas=" + std::to_string(replicas) +
                  " payload=" + std::to_string(payload) + " seed=" + std::to_string(seed));
      csv.row({"q", "block", "total_rate", "expected_count", "count_mean", "count_hw", "blocks",
               "redundant_per_block", "redundant_per_block_hw", "expected_redundant_per_block", "ks_statistic",
               "ks_p_value"});
      csv.row({std::to_string(q), std::to_string(block), num(rep.total_rate), num(rep.expected_count),
               num(rep.count.mean), num(rep.count.half_width_95), std::to_string(rep.blocks),
               num(rep.redundant_per_block.mean), num(rep.redundant_per_block.half_width_95),
               num(rep.expected_redundant), num(rep.ks.statistic), num(rep.ks.p_value)});
      return kOk;
    }
  } catch (const InfeasibleTarget& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  }
  return kUsage;
}

}  // namespace qstream::cli
