#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "cgp/engines.hpp"
#include "cgp/fitness.hpp"
#include "cgp/malthusian.hpp"

using namespace cgp;

namespace {
double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}
double se_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}
}  // namespace

TEST(Yule, MeanMatchesExponential) {
  auto rng = make_stream(21, 0);
  std::vector<double> ys(10000);
  for (auto& y : ys) y = static_cast<double>(yule_size_at(1.0, 5.0, rng));
  EXPECT_LE(std::abs(mean_of(ys) - std::exp(5.0)), 3.0 * se_of(ys));
}

TEST(Yule, GeometricLaw) {
  auto rng = make_stream(22, 0);
  const double p = std::exp(-3.0);
  const int n = 10000;
  std::map<long long, int> counts;
  for (int i = 0; i < n; ++i) ++counts[yule_size_at(2.0, 1.5, rng)];
  // Kolmogorov distance between the empirical and geometric CDFs
  double dist = 0.0, emp_cdf = 0.0;
  for (long long k = 1; k < 2000; ++k) {
    emp_cdf += counts.count(k) ? counts[k] / double(n) : 0.0;
    const double cdf = 1.0 - std::pow(1.0 - p, static_cast<double>(k));
    dist = std::max(dist, std::abs(emp_cdf - cdf));
  }
  EXPECT_LE(dist, 0.02);
}

TEST(Yule, PathIsExact) {
  auto rng = make_stream(23, 0);
  const auto path = simulate_yule(1.0, 4.0, rng);
  ASSERT_GE(path.size(), 2u);
  EXPECT_EQ(path.front().second, 1);
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    EXPECT_GT(path[i].first, path[i - 1].first);
    EXPECT_EQ(path[i].second, path[i - 1].second + 1);
  }
  EXPECT_EQ(path.back().first, 4.0);
  auto rng2 = make_stream(23, 0);
  EXPECT_EQ(yule_size_at(1.0, 4.0, rng2), path.back().second);
}

TEST(Yule, SizeCapAndDomain) {
  auto rng = make_stream(24, 0);
  EXPECT_THROW(simulate_yule(1.0, 30.0, rng, 1000), SizeCapError);
  EXPECT_THROW(simulate_yule(0.0, 1.0, rng), DomainError);
}

TEST(CtGw, ReducesToYule) {
  auto a = make_stream(25, 0);
  auto b = make_stream(25, 0);
  const auto p1 = simulate_ct_gw({{1, 1.0}}, 1.0, 3.0, a);
  const auto p2 = simulate_yule(1.0, 3.0, b);
  EXPECT_EQ(p1, p2);
}

TEST(CtGw, BinaryMean) {
  auto rng = make_stream(26, 0);
  std::vector<double> ys(10000);
  for (auto& y : ys) y = static_cast<double>(simulate_ct_gw({{0, 0.5}, {2, 0.5}}, 1.0, 5.0, rng).back().second);
  EXPECT_LE(std::abs(mean_of(ys) - std::exp(5.0)), 3.0 * se_of(ys));
}

TEST(CtGw, FrozenPath) {
  auto rng = make_stream(27, 0);
  const auto path = simulate_ct_gw({{0, 1.0}}, 1.0, 10.0, rng);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path.back().second, 1);
  EXPECT_THROW(simulate_ct_gw({{1, 0.5}}, 1.0, 1.0, rng), DomainError);
}

TEST(RbpGillespieTest, FrozenTwoFamilyChoice) {
  const auto model = catalog::uniform();
  const auto law = OffspringLaw({{1, 0, 1.0}});
  auto rng = make_stream(28, 0);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    RbpGillespie g(model, law, rng);
    g.add_family(0.0, 0.5, 2);
    g.add_family(0.0, 1.0, 1);
    g.step();
    hits += g.events().front().family == 1;
  }
  EXPECT_NEAR(hits / double(n), 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(RbpGillespieTest, ConservationAndOrdering) {
  auto rng = make_stream(29, 0);
  const auto law = OffspringLaw({{1, 1, 0.5}, {2, 0, 0.3}, {0, 2, 0.2}});
  const auto res = simulate_rbp(catalog::uniform(), law, StopRule{8.0, 0, 0}, rng);
  long long same = 0, fresh = 0;
  double last = 0.0;
  for (const auto& e : res.events) {
    same += e.same;
    fresh += e.fresh;
    EXPECT_GT(e.time, last);
    last = e.time;
  }
  const auto& s = res.snapshot;
  long long total = 0;
  for (const auto& f : s.families) {
    total += f.size;
    EXPECT_GE(f.size, 1);
    EXPECT_TRUE(f.fitness > 0.0 && f.fitness < 1.0);
    EXPECT_LE(f.tau, s.clock);
  }
  EXPECT_EQ(s.total_size, total);
  EXPECT_EQ(s.family_count, static_cast<long long>(s.families.size()));
  EXPECT_EQ(s.families.size(), static_cast<std::size_t>(1 + fresh));
  EXPECT_EQ(s.total_size, 1 + same + fresh);
  for (std::size_t i = 1; i < s.families.size(); ++i) EXPECT_GE(s.families[i].tau, s.families[i - 1].tau);
  EXPECT_EQ(s.clock, 8.0);
}

TEST(RbpGillespieTest, TotalRateDrift) {
  auto rng = make_stream(30, 0);
  RbpGillespie g(catalog::uniform(), OffspringLaw({{1, 0, 0.9}, {1, 1, 0.1}}), rng, false);
  g.seed();
  for (int i = 0; i < 1000000; ++i) g.step();
  const auto& s = g.snapshot();
  EXPECT_NEAR(s.total_rate / s.recompute_rate(), 1.0, 1e-9);
}

TEST(RbpGillespieTest, SingleFamilyIsTimeChangedYule) {
  auto rng = make_stream(31, 0);
  const double f = 0.5;
  std::vector<double> ys(4000);
  for (auto& y : ys) {
    RbpGillespie g(catalog::uniform(), OffspringLaw({{1, 0, 1.0}}), rng, false);
    g.add_family(0.0, f);
    g.run(StopRule{6.0, 0, 0});
    y = static_cast<double>(g.snapshot().total_size);
  }
  EXPECT_LE(std::abs(mean_of(ys) - std::exp(f * 6.0)), 3.0 * se_of(ys));
}

TEST(RbpGillespieTest, Determinism) {
  auto a = make_stream(32, 5);
  auto b = make_stream(32, 5);
  const auto law = OffspringLaw::one_one();
  const auto ra = simulate_rbp(catalog::gnedenko(), law, StopRule{INFINITY, 0, 500}, a);
  const auto rb = simulate_rbp(catalog::gnedenko(), law, StopRule{INFINITY, 0, 500}, b);
  std::ostringstream ea, eb;
  write_event_log_csv(ea, ra.events);
  write_event_log_csv(eb, rb.events);
  EXPECT_EQ(ea.str(), eb.str());
  EXPECT_EQ(ra.snapshot.family_count, 500);
}

TEST(RbpGillespieTest, StopRules) {
  auto rng = make_stream(33, 0);
  const auto r = simulate_rbp(catalog::uniform(), OffspringLaw::one_one(), StopRule{INFINITY, 1000, 0}, rng);
  // each p_11 event adds two individuals, so N(t) first reaches 1000 at 1001
  EXPECT_GE(r.snapshot.total_size, 1000);
  EXPECT_LE(r.snapshot.total_size, 1001);
  EXPECT_THROW(simulate_rbp(catalog::uniform(), OffspringLaw::one_one(), StopRule{}, rng), DomainError);
}

TEST(SelectionMutation, BetaOneKeepsSizesAtOne) {
  auto rng = make_stream(34, 0);
  const auto r = simulate_selection_mutation(catalog::uniform(), 1.0, {{1, 1.0}}, StopRule{INFINITY, 0, 2000}, rng);
  for (const auto& f : r.snapshot.families) EXPECT_EQ(f.size, 1);
}

TEST(SelectionMutation, EventMarginals) {
  auto rng = make_stream(36, 0);
  const double beta = 0.3, mean = 1.5;
  RbpGillespie g(catalog::uniform(), OffspringLaw::thinned({{1, 0.5}, {2, 0.5}}, beta), rng);
  g.seed();
  for (int i = 0; i < 100000; ++i) g.step();
  std::vector<double> same, fresh;
  for (const auto& e : g.events()) {
    same.push_back(e.same);
    fresh.push_back(e.fresh);
  }
  EXPECT_LE(std::abs(mean_of(same) - (1.0 - beta) * mean), 3.0 * se_of(same));
  EXPECT_LE(std::abs(mean_of(fresh) - beta * mean), 3.0 * se_of(fresh));
}

TEST(Branching, AgreesWithGillespieInMean) {
  const auto model = catalog::uniform();
  const auto law = OffspringLaw::thinned({{1, 1.0}}, 0.6);
  std::vector<double> a, b, fa, fb;
  auto r1 = make_stream(37, 0);
  auto r2 = make_stream(37, 1);
  for (int i = 0; i < 3000; ++i) {
    const auto s1 = simulate_rbp_branching(model, law, 5.0, r1);
    const auto s2 = simulate_rbp(model, law, StopRule{5.0, 0, 0}, r2, false).snapshot;
    a.push_back(static_cast<double>(s1.total_size));
    b.push_back(static_cast<double>(s2.total_size));
    fa.push_back(static_cast<double>(s1.family_count));
    fb.push_back(static_cast<double>(s2.family_count));
  }
  const double se = std::hypot(se_of(a), se_of(b));
  EXPECT_LE(std::abs(mean_of(a) - mean_of(b)), 4.0 * se);
  EXPECT_LE(std::abs(mean_of(fa) - mean_of(fb)), 4.0 * std::hypot(se_of(fa), se_of(fb)));
}

TEST(Branching, SnapshotIsConsistent) {
  auto rng = make_stream(38, 0);
  const auto s = simulate_rbp_branching(catalog::uniform(), OffspringLaw::thinned({{2, 1.0}}, 0.5), 4.0, rng);
  long long total = 0;
  for (std::size_t i = 0; i < s.families.size(); ++i) {
    total += s.families[i].size;
    EXPECT_EQ(s.families[i].index, static_cast<long long>(i) + 1);
    if (i > 0) {
      EXPECT_GE(s.families[i].tau, s.families[i - 1].tau);
      EXPECT_GE(s.families[i].parent, 1);
      EXPECT_LT(s.families[i].parent, s.families[i].index);
    }
  }
  EXPECT_EQ(total, s.total_size);
  EXPECT_NEAR(s.total_rate, s.recompute_rate(), 1e-9 * s.total_rate);
}

TEST(Branching, PopulationCap) {
  auto rng = make_stream(39, 0);
  EXPECT_THROW(simulate_rbp_branching(catalog::uniform(), OffspringLaw::one_one(), 30.0, rng, 1000), SizeCapError);
}

TEST(EstimateT, RecoversOffset) {
  std::vector<FamilyRecord> fams;
  for (int n = 1; n <= 1001; ++n) {
    FamilyRecord f;
    f.index = n;
    f.tau = std::log(static_cast<double>(n)) / 1.25 + 0.7 + (n % 2 ? 1e-3 : -1e-3);
    fams.push_back(f);
  }
  EXPECT_NEAR(estimate_T(fams, 1.25), 0.7, 1.1e-3);
  EXPECT_EQ(estimate_T({}, 1.0), 0.0);
}

TEST(Csv, Headers) {
  std::ostringstream a, b;
  write_event_log_csv(a, {{1, 0.5, 1, 1, 0}});
  EXPECT_EQ(a.str(), "event_index,time,family_index,delta_same_family,new_families\n1,0.5,1,1,0\n");
  PopulationSnapshot s;
  s.families.push_back({1, 0.0, 0.25, 3, 0});
  write_snapshot_csv(b, s);
  EXPECT_EQ(b.str(), "family_index,tau,fitness,size\n1,0,0.25,3\n");
}
