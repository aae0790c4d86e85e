#include <gtest/gtest.h>

#include <cmath>

#include "cgp/numerics.hpp"
#include "cgp/random.hpp"

using namespace cgp;

TEST(Bisect, FindsSqrtTwo) {
  const auto r = num::bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x, std::sqrt(2.0), 1e-15);
}

TEST(Bisect, EndpointRoot) {
  const auto r = num::bisect([](double x) { return x - 1.0; }, 1.0, 3.0);
  EXPECT_EQ(r.x, 1.0);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Bisect, RejectsMissingBracket) {
  EXPECT_THROW(num::bisect([](double x) { return x * x + 1.0; }, -1.0, 1.0), NumericError);
}

TEST(SafeguardedNewton, ConvergesOnCubic) {
  auto fdf = [](double x) { return std::pair{x * x * x - x - 2.0, 3.0 * x * x - 1.0}; };
  const auto r = num::safeguarded_newton(fdf, 1.0, 2.0, 1.9, 1e-14);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x * r.x * r.x - r.x - 2.0, 0.0, 1e-12);
}

TEST(SafeguardedNewton, RejectsMissingBracket) {
  auto fdf = [](double x) { return std::pair{x * x + 1.0, 2.0 * x}; };
  EXPECT_THROW(num::safeguarded_newton(fdf, -1.0, 1.0, 0.0, 1e-12), NumericError);
}

TEST(Integrate, Polynomial) {
  EXPECT_NEAR(num::integrate([](double x) { return x * x; }, 0.0, 3.0), 9.0, 1e-12);
  EXPECT_EQ(num::integrate([](double x) { return x; }, 2.0, 2.0), 0.0);
}

TEST(Integrate, ExpWeightMoments) {
  // int_0^inf y^k e^{-y} dy = k!
  EXPECT_NEAR(num::integrate_exp_weight([](double) { return 1.0; }, 60.0), 1.0, 1e-12);
  EXPECT_NEAR(num::integrate_exp_weight([](double y) { return y * y * y; }, 80.0), 6.0, 1e-10);
}

TEST(GammaP, ExponentialSpecialCase) {
  EXPECT_NEAR(num::gamma_p(1.0, 2.0), 1.0 - std::exp(-2.0), 1e-14);
  EXPECT_EQ(num::gamma_p(2.0, 0.0), 0.0);
  EXPECT_EQ(num::gamma_p(2.0, INFINITY), 1.0);
  // P(2, x) = 1 - (1 + x) e^{-x}
  EXPECT_NEAR(num::gamma_p(2.0, 3.0), 1.0 - 4.0 * std::exp(-3.0), 1e-14);
}

TEST(Harmonic, SmallAndAsymptotic) {
  EXPECT_EQ(num::harmonic(0), 0.0);
  EXPECT_DOUBLE_EQ(num::harmonic(4), 25.0 / 12.0);
  double direct = 0.0;
  for (long long i = 200000; i >= 1; --i) direct += 1.0 / static_cast<double>(i);
  EXPECT_NEAR(num::harmonic(200000), direct, 1e-12);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  auto a = make_stream(42, 3);
  auto b = make_stream(42, 3);
  auto c = make_stream(42, 4);
  const auto xa = a();
  EXPECT_EQ(xa, b());
  EXPECT_NE(xa, c());
}

TEST(Random, UniformOpenNeverZero) {
  auto rng = make_stream(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, PoissonMean) {
  auto rng = make_stream(5, 0);
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += static_cast<double>(poisson(rng, 3.5));
  EXPECT_NEAR(s / n, 3.5, 3.0 * std::sqrt(3.5 / n) + 1e-12);
}
