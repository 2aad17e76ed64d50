#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "qstream/fluid.hpp"

using namespace qstream;

namespace {

// theta0 = 0.1, theta1 = 0.4
const Rates kRates(1.05, 0.15);

}  // namespace

TEST(FluidClosedForms, FrozenReferences) {
  EXPECT_NEAR(fluid_p_at_threshold(10, kRates), 0.069446674896645861, 1e-15);
  EXPECT_NEAR(fluid_p_at_threshold(20, kRates), 0.0013405014471954974, 1e-16);
  EXPECT_NEAR(fluid_p_at_threshold(5, kRates), 0.38502054102987485, 1e-15);
  EXPECT_NEAR(fluid_interruption_probability(20, 10, kRates), 0.025548003952192911, 1e-15);
  EXPECT_NEAR(fluid_interruption_probability(5, 10, kRates), 0.18037135034636319, 1e-15);
  const auto m = FluidModel<double>::from(kRates);
  EXPECT_NEAR(m.threshold_cost(10), 43.055332510335414, 1e-12);
  EXPECT_NEAR(fluid_cost(20, 10, kRates), 15.839171663352825, 1e-12);
  EXPECT_NEAR(fluid_cost(5, 10, kRates), 56.962864965363681, 1e-12);
}

TEST(FluidClosedForms, ContinuousAtThreshold) {
  const auto m = FluidModel<double>::from(kRates);
  for (double t : {1.0, 10.0, 30.0}) {
    EXPECT_NEAR(m.interruption_probability(t, t), m.p_at_threshold(t), 1e-15);
    EXPECT_NEAR(m.interruption_probability(std::nextafter(t, 0.0), t), m.p_at_threshold(t), 1e-13);
    EXPECT_NEAR(m.cost(t, t), m.threshold_cost(t), 1e-12);
    EXPECT_NEAR(m.cost(std::nextafter(t, 0.0), t), m.threshold_cost(t), 1e-10);
  }
  EXPECT_EQ(m.cost(0.0, 10.0), 0.0);
  EXPECT_EQ(m.cost(5.0, 0.0), 0.0);
  EXPECT_NEAR(m.interruption_probability(7.0, 0.0), std::exp(-0.7), 1e-15);
}

TEST(FluidClosedForms, MonotoneInThreshold) {
  const auto m = FluidModel<double>::from(kRates);
  double prev_p = 1.0, prev_j = -1.0;
  for (double t = 0.5; t < 40.0; t += 0.5) {
    const double p = m.interruption_probability(15.0, t), j = m.cost(15.0, t);
    EXPECT_LT(p, prev_p) << t;
    EXPECT_GT(j, prev_j) << t;
    prev_p = p;
    prev_j = j;
  }
}

TEST(FluidCostOde, ResidualSmallAndSecondOrder) {
  const double t = 10.0;
  for (double d = 0.5; d < 9.6; d += 0.5) {
    const double r1 = fluid_cost_ode_residual(d, t, kRates, 1e-3);
    const double r2 = fluid_cost_ode_residual(d, t, kRates, 5e-4);
    EXPECT_LT(std::abs(r1), 1e-4) << d;
    // The exact second difference is O(h^2); long double keeps rounding well below it.
    if (std::abs(r1) > 1e-9) {
      EXPECT_NEAR(r1 / r2, 4.0, 0.2) << d;
    }
  }
  EXPECT_THROW(fluid_cost_ode_residual(9.9995, 10.0, kRates, 1e-3), StencilOutOfRegion);
  EXPECT_THROW(fluid_cost_ode_residual(0.0005, 10.0, kRates, 1e-3), StencilOutOfRegion);
}

TEST(FluidDesign, ThresholdInvertsInterruptionProbability) {
  EXPECT_NEAR(fluid_design_threshold({20, 0.02555}, kRates), 9.9997201429842224, 1e-10);
  EXPECT_NEAR(fluid_design_threshold({5, 0.18}, kRates), 10.021831932868812, 1e-10);
  EXPECT_NEAR(fluid_value({5, 0.18}, kRates), 57.089510924762130, 1e-9);
  const double t = fluid_design_threshold({20, 1e-3}, kRates);
  EXPECT_NEAR(fluid_interruption_probability(20, t, kRates), 1e-3, 1e-15);
  EXPECT_EQ(fluid_design_threshold({80, 1e-3}, kRates), 0.0);
  EXPECT_THROW(fluid_design_threshold({10, 1e-3}, kRates), InfeasibleTarget);
}

TEST(FluidValue, RegionsAndComposition) {
  EXPECT_EQ(fluid_value({20, 0.5}, kRates), 0.0);
  EXPECT_THROW(fluid_value({20, 1e-5}, kRates), InfeasibleState);
  // V(d, p^T(d)) = J^T(d)
  for (double d : {5.0, 20.0})
    EXPECT_NEAR(fluid_value({d, fluid_interruption_probability(d, 10, kRates)}, kRates), fluid_cost(d, 10, kRates),
                1e-9);
}

TEST(FluidControls, SubregionFormulas) {
  const double p5 = fluid_interruption_probability(5, 10, kRates);
  const auto both = fluid_optimal_controls({5, p5}, kRates);
  EXPECT_EQ(both.u, 1);
  EXPECT_NEAR(both.phi, -0.051314537669551518, 1e-15);
  const double p20 = fluid_interruption_probability(20, 10, kRates);
  const auto free = fluid_optimal_controls({20, p20}, kRates);
  EXPECT_EQ(free.u, 0);
  EXPECT_NEAR(free.phi, -0.0025548003952192911, 1e-16);
  EXPECT_THROW(fluid_optimal_controls({20, 1e-5}, kRates), InfeasibleState);
}

TEST(FluidControls, FormulasMatchOnSubregionBoundary) {
  for (double q : {1.0, 5.0, 12.0, 30.0}) {
    const auto c = fluid_optimal_controls({q, fluid_p_at_threshold(q, kRates)}, kRates);
    EXPECT_NEAR(c.phi_free, c.phi_both, 1e-14 * std::abs(c.phi_free)) << q;
    EXPECT_EQ(c.u, 0);
  }
}

TEST(FluidControls, ManifoldThroughAnchor) {
  const QoETarget anchor(20, fluid_interruption_probability(20, 10, kRates));
  EXPECT_NEAR(manifold_p(30, anchor, kRates), 0.0093985854169785281, 1e-14);
  EXPECT_NEAR(manifold_p(20, anchor, kRates), anchor.eps, 1e-15);
}

TEST(FluidExit, ClosedFormsAndIdentity) {
  const auto e = fluid_exit_statistics(5, 10, 0.4);
  EXPECT_NEAR(e.p_hit_zero, 0.11920292202211756, 1e-15);
  EXPECT_NEAR(e.p_hit_zero + e.p_hit_upper, 1.0, 1e-15);
  EXPECT_NEAR(e.expected_exit_time, 19.039853898894122, 1e-12);
  // Below T the usage time is the exit time, plus J(T) after an upward exit.
  const auto m = FluidModel<double>::from(kRates);
  EXPECT_NEAR(e.expected_exit_time + e.p_hit_upper * m.threshold_cost(10), m.cost(5, 10), 1e-11);
  EXPECT_NEAR(e.p_hit_zero + e.p_hit_upper * m.p_at_threshold(10), m.interruption_probability(5, 10), 1e-15);

  const auto z = fluid_exit_statistics(3, 12, 0.0);
  EXPECT_DOUBLE_EQ(z.p_hit_zero, 0.75);
  EXPECT_DOUBLE_EQ(z.expected_exit_time, 27.0);
  const auto tiny = fluid_exit_statistics(3, 12, 1e-9);
  EXPECT_NEAR(tiny.p_hit_zero, 0.75, 1e-8);
  EXPECT_NEAR(tiny.expected_exit_time, 27.0, 1e-5);
  EXPECT_THROW(fluid_exit_statistics(13, 12, 0.4), DomainError);
}

TEST(FluidHjb, InteriorGridResiduals) {
  for (auto region : {FluidSubregion::FreeOnly, FluidSubregion::BothServers}) {
    const auto grid = fluid_interior_grid(kRates, region, 10, 10, 3.0, 40.0);
    ASSERT_EQ(grid.size(), 100u);
    double worst = 0.0, worst_half = 0.0;
    for (const auto& s : grid) {
      const auto r = fluid_hjb_residual(s, kRates, 1e-3);
      EXPECT_EQ(r.subregion, region);
      EXPECT_GE(r.residual, r.residual_min);
      worst = std::max(worst, std::abs(r.residual));
      worst_half = std::max(worst_half, std::abs(fluid_hjb_residual(s, kRates, 5e-4).residual));
    }
    EXPECT_LT(worst, 1e-2) << to_string(region);
    EXPECT_NEAR(worst / worst_half, 4.0, 0.5) << to_string(region);
  }
}

TEST(FluidHjb, MinimisingControlsMatchExplicitOnes) {
  const double p5 = fluid_interruption_probability(5, 10, kRates);
  const auto r = fluid_hjb_residual({5, p5}, kRates);
  EXPECT_EQ(r.subregion, FluidSubregion::BothServers);
  EXPECT_EQ(r.u_argmin, 1);
  EXPECT_NEAR(r.phi_argmin, r.phi_explicit, 1e-3 * std::abs(r.phi_explicit));
  const double p20 = fluid_interruption_probability(20, 10, kRates);
  const auto f = fluid_hjb_residual({20, p20}, kRates);
  EXPECT_EQ(f.subregion, FluidSubregion::FreeOnly);
  EXPECT_EQ(f.u_argmin, 0);
  EXPECT_NEAR(f.phi_argmin, f.phi_explicit, 1e-3 * std::abs(f.phi_explicit));
}

TEST(FluidHjb, StencilMustStayInSubregion) {
  EXPECT_THROW(fluid_hjb_residual({0.001, 0.9}, kRates), StencilOutOfRegion);
  EXPECT_THROW(fluid_hjb_residual({10, fluid_p_at_threshold(10, kRates)}, kRates), StencilOutOfRegion);
  EXPECT_THROW(fluid_hjb_residual({10, 0.5}, kRates), StencilOutOfRegion);
  EXPECT_EQ(to_string(FluidSubregion::FreeOnly), "free-only");
}
