#include <gtest/gtest.h>

#include <cmath>

#include "cgp/fitness.hpp"
#include "cgp/malthusian.hpp"
#include "cgp/numerics.hpp"

using namespace cgp;

namespace {

// Root of lambda log(lambda / (lambda - 1)) = 2, the BB equation for uniform fitness.
double bb_uniform_oracle() {
  double lo = 1.0 + 1e-12, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::log(mid / (mid - 1.0)) > 2.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// m2 int_0^1 x / (lambda - m1 x) dx by plain x-space quadrature.
double uniform_rbp_integral(double m1, double m2, double lambda) {
  return m2 * num::integrate([&](double x) { return x / (lambda - m1 * x); }, 0.0, 1.0, 1e-14);
}

}  // namespace

TEST(Malthusian, BbUniformMatchesOracle) {
  const auto r = malthusian_bb(catalog::uniform());
  EXPECT_NEAR(r.lambda, bb_uniform_oracle(), 1e-9);
  EXPECT_NEAR(r.lambda, 1.2550, 1e-3);
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_GT(r.lambda, 1.0);
}

TEST(Malthusian, BbEqualsRbpOneOne) {
  for (const auto& m : {catalog::uniform(), catalog::weibull_alpha(0.5), catalog::power_rho(0.5)}) {
    EXPECT_NEAR(malthusian_bb(m).lambda, malthusian_rbp(m, OffspringLaw::one_one()).lambda, 1e-8) << m.id();
  }
}

TEST(Malthusian, BbPowerRhoResidual) {
  const auto m = catalog::power_rho(0.5);
  const auto r = malthusian_bb(m);
  EXPECT_GT(r.lambda, 1.0);
  EXPECT_LE(r.residual, 1e-8);
  EXPECT_NEAR(malthusian_integral(m, OffspringLaw::one_one(), r.lambda), 1.0, 1e-8);
}

TEST(Malthusian, IndependentQuadratureAgrees) {
  const auto law = OffspringLaw({{1, 1, 0.5}, {2, 1, 0.25}, {0, 2, 0.25}});
  const auto r = malthusian_rbp(catalog::uniform(), law);
  EXPECT_GT(r.lambda, law.m1());
  EXPECT_NEAR(uniform_rbp_integral(law.m1(), law.m2(), r.lambda), 1.0, 1e-6);
}

TEST(Malthusian, SelectionMutationEqualsThinnedRbp) {
  for (double beta : {0.6, 0.75, 0.9}) {
    const auto sm = malthusian_selection_mutation(catalog::gnedenko(), beta, 1.0);
    const auto rbp = malthusian_rbp(catalog::gnedenko(), OffspringLaw::thinned({{1, 1.0}}, beta));
    EXPECT_NEAR(sm.lambda, rbp.lambda, 1e-8);
    EXPECT_GT(sm.lambda, 1.0 - beta);
    EXPECT_LE(sm.residual, 1e-8);
  }
  const auto two = malthusian_selection_mutation(catalog::uniform(), 0.7, 2.0);
  const auto law = OffspringLaw::thinned({{2, 1.0}}, 0.7);
  EXPECT_NEAR(law.m1(), 0.6, 1e-14);
  EXPECT_NEAR(law.m2(), 1.4, 1e-14);
  EXPECT_NEAR(two.lambda, malthusian_rbp(catalog::uniform(), law).lambda, 1e-8);
}

TEST(Malthusian, BetaOneUniformIsMean) {
  EXPECT_NEAR(malthusian_selection_mutation(catalog::uniform(), 1.0, 1.0).lambda, 0.5, 1e-9);
}

TEST(Malthusian, NoSolutionCases) {
  // E[F/(1-F)] = 1 for the Gnedenko law: beta = 0.4 gives 0.4 < 0.6
  EXPECT_THROW(malthusian_selection_mutation(catalog::gnedenko(), 0.4, 1.0), NoSolutionError);
  EXPECT_THROW(malthusian_bb(catalog::gnedenko()), NoSolutionError);
  const auto weak = OffspringLaw({{1, 0, 0.99}, {1, 1, 0.01}});
  EXPECT_THROW(malthusian_rbp(catalog::uniform(), weak), NoSolutionError);
}

TEST(Malthusian, DomainErrors) {
  EXPECT_THROW(malthusian_selection_mutation(catalog::uniform(), 0.0, 1.0), DomainError);
  EXPECT_THROW(malthusian_selection_mutation(catalog::uniform(), 0.5, -1.0), DomainError);
}

TEST(Malthusian, MonotoneInFamilyCreation) {
  double prev = 0.0;
  for (double m2 = 0.5; m2 <= 3.0; m2 += 0.5) {
    const auto law = OffspringLaw({{1, 0, 1.0 - m2 / 3.0}, {1, 3, m2 / 3.0}});
    ASSERT_NEAR(law.m2(), m2, 1e-12);
    const double lambda = malthusian_rbp(catalog::uniform(), law).lambda;
    EXPECT_GT(lambda, prev);
    prev = lambda;
  }
}

TEST(Malthusian, ResidualOnParameterGrid) {
  for (double beta = 0.55; beta < 1.0; beta += 0.05) {
    EXPECT_LE(malthusian_selection_mutation(catalog::gnedenko(), beta, 1.0).residual, 1e-8);
    EXPECT_LE(malthusian_selection_mutation(catalog::uniform(), beta, 1.0).residual, 1e-8);
  }
}

TEST(Malthusian, CrpIdentity) {
  for (const auto& m : {catalog::uniform(), catalog::gnedenko(), catalog::weibull_alpha(3.0)}) {
    const auto r = malthusian_crp(m);
    EXPECT_EQ(r.lambda, 1.0);
    EXPECT_LE(r.residual, 1e-10) << m.id();
  }
}

TEST(OffspringLawTest, Validation) {
  EXPECT_THROW(OffspringLaw({{0, 0, 0.5}, {1, 1, 0.5}}), DomainError);
  EXPECT_THROW(OffspringLaw({{1, 1, 0.5}}), DomainError);
  EXPECT_THROW(OffspringLaw({{-1, 1, 1.0}}), DomainError);
  EXPECT_THROW(OffspringLaw::thinned({{1, 1.0}}, 1.5), DomainError);
  EXPECT_THROW(OffspringLaw::thinned({{0, 1.0}}, 0.5), DomainError);
}

TEST(OffspringLawTest, ThinningMarginals) {
  const auto law = OffspringLaw::thinned({{1, 0.5}, {3, 0.5}}, 0.25);
  EXPECT_NEAR(law.m1(), 0.75 * 2.0, 1e-14);
  EXPECT_NEAR(law.m2(), 0.25 * 2.0, 1e-14);
  double total = 0.0;
  for (const auto& e : law.entries()) total += e.p;
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_EQ(law.max_same(), 3);
  double marginal = 0.0;
  for (const auto& [i, p] : law.first_marginal()) marginal += i * p;
  EXPECT_NEAR(marginal, law.m1(), 1e-14);
}
