#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cgp/fitness.hpp"

using namespace cgp;

namespace {

std::vector<FitnessModel> gumbel_models() {
  return {catalog::power_rho(0.5), catalog::exp_inv(),         catalog::gnedenko(),
          catalog::exp_sqrt(),     catalog::tan_model(),       catalog::loglog_negative()};
}

double ks_against(const FitnessModel& model, std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = 1.0 - tail_prob(model, xs[i]);
    d = std::max({d, std::abs((i + 1) / n - c), std::abs(c - i / n)});
  }
  return d;
}

}  // namespace

TEST(TailProb, SpecExamples) {
  const auto gn = catalog::gnedenko();
  EXPECT_DOUBLE_EQ(tail_prob(gn, 0.0), 1.0);
  EXPECT_NEAR(tail_prob(gn, 0.5), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(tail_prob(catalog::uniform(), 0.75), 0.25, 1e-15);
}

TEST(TailProb, DomainErrors) {
  const auto gn = catalog::gnedenko();
  EXPECT_THROW(tail_prob(gn, 1.0), DomainError);
  EXPECT_THROW(tail_prob(gn, -0.1), DomainError);
}

TEST(TailProb, DecreasingAndComplementsCdf) {
  for (const auto& m : gumbel_models()) {
    double prev = 1.0;
    for (double x = 0.0; x < 0.999; x += 0.037) {
      const double p = tail_prob(m, x);
      EXPECT_LE(p, prev) << m.id();
      EXPECT_NEAR(p + fitness_cdf(m, x), 1.0, 1e-14) << m.id();
      prev = p;
    }
  }
}

TEST(GumbelModels, InverseIdentities) {
  for (const auto& m : gumbel_models()) {
    EXPECT_NEAR(m.m(0.0), 0.0, 1e-14) << m.id();
    for (double y : {0.1, 1.0, 10.0, 100.0}) {
      // a few ulps of x = g(y) propagated through m'
      const double x = m.g(y);
      const double cond = 4.0 * std::numeric_limits<double>::epsilon() * m.m1(x);
      EXPECT_NEAR(m.m(x), y, std::max(1e-9 * std::max(1.0, y), cond)) << m.id();
    }
    for (double y : {0.05, 0.5, 2.0, 20.0}) EXPECT_NEAR(m.g1(y) * m.m1(m.g(y)), 1.0, 1e-8) << m.id();
  }
}

TEST(GumbelModels, GOfMRoundTrip) {
  for (const auto& m : gumbel_models()) {
    for (double x : {0.0, 0.1, 0.5, 0.9, 0.99}) {
      if (!std::isfinite(m.m(x))) continue;
      EXPECT_NEAR(m.g(m.m(x)), x, 1e-10) << m.id();
    }
  }
}

TEST(GumbelModels, ClosedFormInverses) {
  EXPECT_NEAR(catalog::power_rho(0.5).g(3.0), 1.0 - std::pow(4.0, -2.0), 1e-15);
  EXPECT_NEAR(catalog::gnedenko().g(3.0), 0.75, 1e-15);
  EXPECT_NEAR(catalog::tan_model().g(1.0), 0.5, 1e-15);
}

TEST(WeibullModels, RegularVariation) {
  for (double a : {0.5, 1.0, 2.5}) {
    const auto m = catalog::weibull_alpha(a);
    for (double eps : {1e-1, 1e-3, 1e-6}) EXPECT_NEAR(tail_prob(m, 1.0 - eps) / std::pow(eps, a), 1.0, 1e-9);
  }
}

TEST(SampleFitness, ExponentialLevels) {
  const auto gn = catalog::gnedenko();
  EXPECT_EQ(fitness_from_exp(gn, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(fitness_from_exp(gn, 1.0), 0.5);
  for (const auto& m : gumbel_models()) EXPECT_NEAR(fitness_from_exp(m, 0.0), 0.0, 1e-12) << m.id();
}

TEST(SampleFitness, MatchesLawAndStaysInside) {
  std::vector<FitnessModel> models = gumbel_models();
  models.push_back(catalog::uniform());
  models.push_back(catalog::weibull_alpha(3.0));
  for (const auto& m : models) {
    auto rng = make_stream(11, 0);
    std::vector<double> xs(10000);
    for (auto& x : xs) {
      x = sample_fitness(m, rng);
      ASSERT_GT(x, 0.0);
      ASSERT_LT(x, 1.0);
    }
    EXPECT_LE(ks_against(m, xs), 0.02) << m.id();
  }
}

TEST(SampleFitness, MillionDrawsInsideUnitInterval) {
  auto rng = make_stream(3, 0);
  const auto gn = catalog::gnedenko();
  for (int i = 0; i < 1000000; ++i) {
    const double x = sample_fitness(gn, rng);
    ASSERT_TRUE(x > 0.0 && x < 1.0);
  }
}

TEST(Kappa, CatalogValues) {
  EXPECT_NEAR(kappa(catalog::gnedenko()).estimate, 2.0, 1e-4);
  for (double rho : {0.3, 0.5, 1.0, 2.0}) {
    const auto rep = kappa(catalog::power_rho(rho));
    EXPECT_FALSE(rep.failed);
    EXPECT_NEAR(rep.estimate, (rho + 1.0) / rho, 1e-3) << rho;
  }
}

TEST(Kappa, Deterministic) {
  const auto m = catalog::exp_sqrt();
  EXPECT_EQ(kappa(m).estimate, kappa(m).estimate);
}

TEST(CheckA5, PassesForFrameworkModels) {
  for (const auto& m : {catalog::power_rho(0.5), catalog::exp_inv(), catalog::gnedenko(), catalog::exp_sqrt(),
                        catalog::tan_model()}) {
    const auto rep = check_a5(m);
    EXPECT_TRUE(rep.all_pass()) << m.id();
  }
  EXPECT_NEAR(check_a5(catalog::power_rho(0.5)).kappa.estimate, 3.0, 1e-3);
}

TEST(CheckA5, LogLogFails) {
  const auto rep = check_a5(catalog::loglog_negative());
  EXPECT_FALSE(rep.all_pass());
  bool has_evidence = false;
  for (const auto& c : rep.conditions)
    if (!c.pass && !c.evidence.empty()) has_evidence = true;
  EXPECT_TRUE(has_evidence);
}

TEST(CheckA5, RejectsWeibull) { EXPECT_THROW(check_a5(catalog::uniform()), DomainError); }

TEST(Catalog, LookupAndParams) {
  EXPECT_EQ(catalog::make("gnedenko").id(), "gnedenko");
  EXPECT_EQ(catalog::make("weibull_alpha", {{"alpha", 2.0}}).alpha(), 2.0);
  EXPECT_THROW(catalog::make("nope"), DomainError);
  EXPECT_THROW(catalog::make("gnedenko", {{"rho", 1.0}}), DomainError);
  EXPECT_THROW(catalog::make("weibull_alpha", {{"alpha", -1.0}}), DomainError);
  for (const auto& id : catalog::ids()) EXPECT_NO_THROW(catalog::make(id));
}

TEST(Expectation, UniformMean) {
  EXPECT_NEAR(expectation(catalog::uniform(), [](double f) { return f; }), 0.5, 1e-12);
  // E[1/(1-F)] = int_0^inf (1+y) e^{-y} dy = 2 for the Gnedenko law
  EXPECT_NEAR(expectation(catalog::gnedenko(), [](double f) { return 1.0 / (1.0 - f); }), 2.0, 1e-6);
}
