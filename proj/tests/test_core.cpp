#include <gtest/gtest.h>

#include <cmath>

#include "qstream/core.hpp"
#include "qstream/root_finding.hpp"

using namespace qstream;

namespace {

// Independent oracle: the positive root of r = R (1 - e^{-r}) is
// R + W0(-R e^{-R}), with the principal Lambert W solved by Halley steps.
long double lambert_w0(long double x) {
  long double w = x < -0.25L ? -1.0L + std::sqrt(2.0L * (1.0L + std::exp(1.0L) * x)) : x;
  for (int i = 0; i < 100; ++i) {
    const long double e = std::exp(w);
    const long double f = w * e - x;
    const long double step = f / (e * (w + 1) - (w + 2) * f / (2 * w + 2));
    w -= step;
    if (std::abs(step) < 1e-19L * (1 + std::abs(w))) break;
  }
  return w;
}

long double exponent_oracle(long double rate) { return rate + lambert_w0(-rate * std::exp(-rate)); }

// Frozen 40-digit reference values for the same roots.
struct Ref {
  double rate;
  double alpha;
};
constexpr Ref kRefs[] = {
    {1.01, 0.01993377454398769128}, {1.05, 0.09838692892654671077}, {1.1, 0.19374755799499067325},
    {1.2, 0.37643799724946119691},  {1.5, 0.87421746579871707906},  {2.0, 1.59362426004004009232},
    {5.0, 4.96511423174427630370},
};

}  // namespace

TEST(Gamma, VanishesAtZeroAndAtTheExponent) {
  EXPECT_EQ(gamma(0.0, 1.3), 0.0);
  for (const auto& r : kRefs) EXPECT_LE(std::abs(gamma(interruption_exponent(r.rate), r.rate)), 1e-12) << r.rate;
}

TEST(InterruptionExponent, MatchesFrozenReferences) {
  for (const auto& r : kRefs) EXPECT_NEAR(interruption_exponent(r.rate), r.alpha, 1e-13 * r.alpha) << r.rate;
}

TEST(InterruptionExponent, MatchesLambertOracle) {
  for (double rate : {1.0001, 1.01, 1.3, 3.0, 10.0, 50.0})
    EXPECT_NEAR(interruption_exponent(rate), static_cast<double>(exponent_oracle(rate)), 1e-12) << rate;
}

TEST(InterruptionExponent, NearOneFollowsSeriesExpansion) {
  // I(1 + x) = 2x - (2/3) x^2 + O(x^3)
  const double x = 1e-6;
  EXPECT_NEAR(interruption_exponent(1.0 + x), 2 * x - 2.0 / 3.0 * x * x, 1e-15);
}

TEST(InterruptionExponent, RejectsRatesNotAboveOne) {
  EXPECT_THROW(interruption_exponent(1.0), DomainError);
  EXPECT_THROW(interruption_exponent(0.5), DomainError);
  EXPECT_THROW(interruption_exponent(std::nan("")), DomainError);
}

TEST(FluidExponent, IsTwiceTheDrift) {
  EXPECT_NEAR(fluid_exponent(1.05), 0.1, 1e-15);
  EXPECT_NEAR(fluid_exponent(1.2), 0.4, 1e-15);
  EXPECT_THROW(fluid_exponent(1.0), DomainError);
}

TEST(Rates, ValidatesAndCachesExponents) {
  const Rates r(1.05, 0.15);
  EXPECT_DOUBLE_EQ(r.r1(), 1.2);
  EXPECT_DOUBLE_EQ(r.exponents().alpha0, interruption_exponent(1.05));
  EXPECT_DOUBLE_EQ(r.exponents().alpha1, interruption_exponent(r.r1()));
  EXPECT_NEAR(r.model_exponents(Model::Fluid).first, 0.1, 1e-15);
  EXPECT_THROW(Rates(1.0, 0.1), DomainError);
  EXPECT_THROW(Rates(1.05, 0.0), DomainError);
}

TEST(QoETarget, Validates) {
  EXPECT_NO_THROW(QoETarget(0.0, 0.5));
  EXPECT_THROW(QoETarget(-1.0, 0.1), DomainError);
  EXPECT_THROW(QoETarget(10.0, 0.0), DomainError);
  EXPECT_THROW(QoETarget(10.0, 1.0), DomainError);
}

TEST(Regions, BoundariesForReferenceRates) {
  const Rates r(1.05, 0.15);
  const auto b = region_boundaries(1e-3, r, Model::Poisson);
  EXPECT_NEAR(b.d_min, 18.350313542881922, 1e-10);
  EXPECT_NEAR(b.d_max, 70.210091465903009, 1e-10);
  const auto f = region_boundaries(1e-3, r, Model::Fluid);
  EXPECT_NEAR(f.d_min, std::log(1000.0) / 0.4, 1e-10);
  EXPECT_NEAR(f.d_max, std::log(1000.0) / 0.1, 1e-9);
}

TEST(Regions, Classification) {
  const Rates r(1.05, 0.15);
  const auto b = region_boundaries(1e-3, r, Model::Poisson);
  EXPECT_EQ(classify_region({20, 1e-3}, r, Model::Poisson), RegionClass::NonDegenerate);
  EXPECT_EQ(classify_region({18, 1e-3}, r, Model::Poisson), RegionClass::Infeasible);
  EXPECT_EQ(classify_region({71, 1e-3}, r, Model::Poisson), RegionClass::ZeroCost);
  EXPECT_EQ(classify_region({b.d_max, 1e-3}, r, Model::Poisson), RegionClass::ZeroCost);
  EXPECT_EQ(classify_region({b.d_min, 1e-3}, r, Model::Poisson), RegionClass::NonDegenerate);
  EXPECT_EQ(to_string(RegionClass::ZeroCost), "zero-cost");
}

TEST(RootFinding, BisectionAndHybrid) {
  auto f = [](double x) { return x * x - 2.0; };
  EXPECT_NEAR(root::bisect(f, 0.0, 2.0), std::sqrt(2.0), 4e-16);
  EXPECT_THROW(root::bisect(f, 2.0, 3.0), DomainError);
  auto df = [](double x) { return 2.0 * x; };
  EXPECT_NEAR(root::bisect_then_newton(f, df, {0.0, 2.0}), std::sqrt(2.0), 4e-16);
  const long double lr = root::bisect<long double>([](long double x) { return x * x - 2.0L; }, 0.0L, 2.0L);
  EXPECT_NEAR(static_cast<double>(lr - std::sqrt(2.0L)), 0.0, 1e-18);
}
