#pragma once

// Malthusian parameters of the reinforced branching families, by quadrature
// against the fitness law plus bisection.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cgp/fitness.hpp"
#include "cgp/numerics.hpp"

namespace cgp {

class NoSolutionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Joint law p_ij of (new members of the same family, new families) created
/// at one birth event. Finite table, p_00 = 0.
class OffspringLaw {
public:
  struct Entry {
    int same = 0;
    int fresh = 0;
    double p = 0.0;
  };

  OffspringLaw() = default;

  explicit OffspringLaw(std::vector<Entry> entries) : entries_(std::move(entries)) {
    double total = 0.0;
    std::map<std::pair<int, int>, double> merged;
    for (const auto& e : entries_) {
      if (e.same < 0 || e.fresh < 0) throw DomainError("offspring law: negative counts");
      if (!(e.p >= 0.0)) throw DomainError("offspring law: negative probability");
      if (e.same == 0 && e.fresh == 0 && e.p > 0.0)
        throw DomainError("offspring law: p_00 must be 0");
      total += e.p;
      merged[{e.same, e.fresh}] += e.p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw DomainError("offspring law: probabilities sum to " + std::to_string(total));
    entries_.clear();
    for (const auto& [k, p] : merged)
      if (p > 0.0) entries_.push_back({k.first, k.second, p});
    for (const auto& e : entries_) {
      m1_ += e.same * e.p;
      m2_ += e.fresh * e.p;
    }
  }

  /// p_11 = 1: every event adds one member and founds one family.
  static OffspringLaw one_one() { return OffspringLaw({{1, 1, 1.0}}); }

  /// Binomial thinning of an offspring-number law (p_k): each of the k
  /// children independently founds a new family with probability beta,
  /// p_ij = p_{i+j} C(i+j, i) (1-beta)^i beta^j.
  static OffspringLaw thinned(const std::vector<std::pair<int, double>>& offspring, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("thinned: beta outside [0, 1]");
    std::vector<Entry> out;
    for (const auto& [k, pk] : offspring) {
      if (k < 1) throw DomainError("thinned: offspring numbers must be >= 1");
      for (int i = 0; i <= k; ++i) {
        const int j = k - i;
        const double c = std::exp(std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(j + 1.0));
        const double p = pk * c * std::pow(1.0 - beta, i) * std::pow(beta, j);
        if (p > 0.0) out.push_back({i, j, p});
      }
    }
    return OffspringLaw(std::move(out));
  }

  const std::vector<Entry>& entries() const { return entries_; }
  double m1() const { return m1_; }
  double m2() const { return m2_; }
  int max_same() const {
    int r = 0;
    for (const auto& e : entries_) r = std::max(r, e.same);
    return r;
  }

  /// First marginal (p^{(1)}_i).
  std::vector<std::pair<int, double>> first_marginal() const {
    std::map<int, double> acc;
    for (const auto& e : entries_) acc[e.same] += e.p;
    return {acc.begin(), acc.end()};
  }

private:
  std::vector<Entry> entries_;
  double m1_ = 0.0;
  double m2_ = 0.0;
};

struct MalthusianResult {
  double lambda = 0.0;
  /// |defining integral at lambda - 1|.
  double residual = 0.0;
  /// Value of the existence-condition integral (truncated at 1 - 1e-10).
  double condition_integral = 0.0;
  int iterations = 0;
};

namespace detail {

// Exponential level at which fitness reaches 1 - 1e-10.
inline double truncation_level(const FitnessModel& model) {
  return std::min(-model.log_tail(1.0 - 1e-10), model.max_exp_level());
}

// E[F / (1 - F)] over F <= 1 - 1e-10; a divergent integral is reported by
// its truncated value, which then exceeds any threshold it is checked against.
inline double odds_integral(const FitnessModel& model) {
  return num::integrate_exp_weight(
      [&](double y) {
        const double f = model.quantile_exp(y);
        return f / (1.0 - f);
      },
      truncation_level(model), 1e-10);
}

// m2 E[F / (lambda - m1 F)].
inline double rbp_integral(const FitnessModel& model, double m1, double m2, double lambda) {
  return m2 * expectation(model, [&](double f) { return f / (lambda - m1 * f); });
}

inline MalthusianResult solve_rbp(const FitnessModel& model, double m1, double m2) {
  if (!(m1 >= 0.0) || !(m2 > 0.0))
    throw DomainError("malthusian: need m1 >= 0 and m2 > 0");
  MalthusianResult res;
  res.condition_integral = odds_integral(model);
  if (m1 > 0.0 && !(m2 * res.condition_integral > m1))
    throw NoSolutionError("malthusian: existence condition m2 E[F/(1-F)] > m1 fails (" +
                          std::to_string(m2 * res.condition_integral) + " <= " +
                          std::to_string(m1) + ")");
  auto excess = [&](double lambda) { return rbp_integral(model, m1, m2, lambda) - 1.0; };
  // The integral is strictly decreasing in lambda on (m1, inf).
  double lo = m1 > 0.0 ? m1 * (1.0 + 1e-9) : 1e-12 * m2;
  if (!(excess(lo) > 0.0))
    throw NoSolutionError("malthusian: no root above m1 (integral at the lower bracket <= 1)");
  double hi = m1 + m2;
  while (excess(hi) > 0.0) hi = m1 + 2.0 * (hi - m1);
  const auto r = num::bisect(excess, lo, hi, 200);
  res.lambda = r.x;
  res.iterations = r.iterations;
  res.residual = std::abs(excess(r.x));
  return res;
}

}  // namespace detail

/// Root lambda > m1 of m2 int f/(lambda - m1 f) dmu(f) = 1.
inline MalthusianResult malthusian_rbp(const FitnessModel& model, const OffspringLaw& law) {
  return detail::solve_rbp(model, law.m1(), law.m2());
}

/// Root lambda > (1-beta) mean of beta mean int x/(lambda - (1-beta) mean x) dmu = 1.
inline MalthusianResult malthusian_selection_mutation(const FitnessModel& model, double beta,
                                                      double mean_offspring) {
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("selection-mutation: beta outside (0, 1]");
  if (!(mean_offspring > 0.0)) throw DomainError("selection-mutation: mean offspring must be positive");
  return detail::solve_rbp(model, (1.0 - beta) * mean_offspring, beta * mean_offspring);
}

/// Root lambda > 1 of int x/(lambda - x) dmu = 1 (tree with p_11 = 1).
inline MalthusianResult malthusian_bb(const FitnessModel& model) {
  return detail::solve_rbp(model, 1.0, 1.0);
}

/// The table-creation process of the disordered restaurant has Malthusian
/// parameter 1 for every mu; residual is |int (1-w)/(1-w) dmu - 1|.
inline MalthusianResult malthusian_crp(const FitnessModel& model) {
  MalthusianResult res;
  res.lambda = 1.0;
  const double v = expectation(model, [](double w) { return (1.0 - w) / (1.0 - w); });
  res.residual = std::abs(v - 1.0);
  return res;
}

/// The defining integral m2 E[F/(lambda - m1 F)] at a given lambda.
inline double malthusian_integral(const FitnessModel& model, const OffspringLaw& law, double lambda) {
  return detail::rbp_integral(model, law.m1(), law.m2(), lambda);
}

}  // namespace cgp
