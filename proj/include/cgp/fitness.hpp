#pragma once

// Fitness distributions on (0, 1): analytic transforms, regularity checks
// and sampling.
//
// A Gumbel-class law is described through m(x) = -log mu(x, 1] and its
// inverse g = m^{-1}; a Weibull-class law through its regularly varying tail
// mu(1 - eps, 1) = eps^alpha * ell(eps).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgp/numerics.hpp"
#include "cgp/random.hpp"

namespace cgp {

using ScalarFn = std::function<double(double)>;

enum class TailClass { Gumbel, Weibull };

inline const char* to_string(TailClass c) {
  return c == TailClass::Gumbel ? "gumbel" : "weibull";
}

/// Immutable description of a fitness law. Copies share the closures, so a
/// model can be handed to many threads; sampling takes an external Rng.
class FitnessModel {
public:
  struct GumbelFns {
    ScalarFn m, m1, m2;
    /// g = m^{-1} and derivatives; left empty to request a numeric inverse.
    ScalarFn g, g1, g2;
    /// Optional log-domain versions of m, m', m'' for x close to 1.
    ScalarFn log_m, log_m1, log_m2;
  };

  struct WeibullFns {
    double alpha = 1.0;
    ScalarFn ell;
    /// Optional closed-form x with mu(x, 1) = e^{-y}.
    ScalarFn quantile_exp;
  };

  static FitnessModel gumbel(std::string id, std::map<std::string, double> params,
                             GumbelFns fns) {
    FitnessModel model;
    model.id_ = std::move(id);
    model.params_ = std::move(params);
    model.kind_ = TailClass::Gumbel;
    if (!fns.m || !fns.m1 || !fns.m2)
      throw DomainError("gumbel-class model needs m, m' and m''");
    if (!fns.g) {
      auto m = fns.m;
      auto m1 = fns.m1;
      fns.g = [m, m1](double y) { return numeric_inverse(m, m1, y); };
    }
    if (!fns.g1) {
      auto g = fns.g;
      auto m1 = fns.m1;
      fns.g1 = [g, m1](double y) { return 1.0 / m1(g(y)); };
    }
    if (!fns.g2) {
      auto g = fns.g;
      auto m1 = fns.m1;
      auto m2 = fns.m2;
      fns.g2 = [g, m1, m2](double y) {
        const double x = g(y);
        const double d = m1(x);
        return -m2(x) / (d * d * d);
      };
    }
    if (!fns.log_m) {
      auto f = fns.m;
      fns.log_m = [f](double x) { return std::log(f(x)); };
    }
    if (!fns.log_m1) {
      auto f = fns.m1;
      fns.log_m1 = [f](double x) { return std::log(f(x)); };
    }
    if (!fns.log_m2) {
      auto f = fns.m2;
      fns.log_m2 = [f](double x) { return std::log(f(x)); };
    }
    model.gumbel_ = std::make_shared<const GumbelFns>(std::move(fns));
    return model;
  }

  static FitnessModel weibull(std::string id, std::map<std::string, double> params,
                              WeibullFns fns) {
    if (!(fns.alpha > 0.0)) throw DomainError("weibull-class model needs alpha > 0");
    if (!fns.ell) fns.ell = [](double) { return 1.0; };
    FitnessModel model;
    model.id_ = std::move(id);
    model.params_ = std::move(params);
    model.kind_ = TailClass::Weibull;
    model.weibull_ = std::make_shared<const WeibullFns>(std::move(fns));
    return model;
  }

  TailClass kind() const { return kind_; }
  bool is_gumbel() const { return kind_ == TailClass::Gumbel; }
  const std::string& id() const { return id_; }
  const std::map<std::string, double>& params() const { return params_; }

  double m(double x) const { return gumbel_fns().m(x); }
  double m1(double x) const { return gumbel_fns().m1(x); }
  double m2(double x) const { return gumbel_fns().m2(x); }
  double g(double y) const { return gumbel_fns().g(y); }
  double g1(double y) const { return gumbel_fns().g1(y); }
  double g2(double y) const { return gumbel_fns().g2(y); }
  double log_m(double x) const { return gumbel_fns().log_m(x); }
  double log_m1(double x) const { return gumbel_fns().log_m1(x); }
  double log_m2(double x) const { return gumbel_fns().log_m2(x); }

  double alpha() const { return weibull_fns().alpha; }
  double ell(double eps) const { return weibull_fns().ell(eps); }

  /// log mu(x, 1].
  double log_tail(double x) const {
    if (kind_ == TailClass::Gumbel) return -m(x);
    const double eps = 1.0 - x;
    return alpha() * std::log(eps) + std::log(ell(eps));
  }

  /// The point x with mu(x, 1] = e^{-y}; g(y) in the Gumbel class. Feeding
  /// a standard exponential y yields a mu-distributed fitness.
  double quantile_exp(double y) const {
    if (kind_ == TailClass::Gumbel) return g(y);
    const auto& w = weibull_fns();
    if (w.quantile_exp) return w.quantile_exp(y);
    return weibull_inverse(y);
  }

  /// Largest y for which quantile_exp(y) is distinguishable from 1 in double.
  double max_exp_level() const {
    return -log_tail(1.0 - std::numeric_limits<double>::epsilon());
  }

private:
  FitnessModel() = default;

  const GumbelFns& gumbel_fns() const {
    if (!gumbel_) throw DomainError("model '" + id_ + "' is not in the Gumbel class");
    return *gumbel_;
  }
  const WeibullFns& weibull_fns() const {
    if (!weibull_) throw DomainError("model '" + id_ + "' is not in the Weibull class");
    return *weibull_;
  }

  // Safeguarded Newton on m(x) = y over [0, 1), tolerance 1e-15 in x.
  static double numeric_inverse(const ScalarFn& m, const ScalarFn& m1, double y) {
    if (y <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = 0.5;
    while (m(hi) < y) {
      lo = hi;
      const double next = 0.5 * (1.0 + hi);
      if (next >= 1.0) return hi;
      hi = next;
    }
    auto fdf = [&](double x) { return std::pair{m(x) - y, m1(x)}; };
    return num::safeguarded_newton(fdf, lo, hi, 0.5 * (lo + hi), 1e-15).x;
  }

  // Bisection on log(eps) for alpha*log(eps) + log(ell(eps)) = -y.
  double weibull_inverse(double y) const {
    if (y <= 0.0) return 0.0;
    auto f = [this, y](double log_eps) {
      const double eps = std::exp(log_eps);
      return alpha() * log_eps + std::log(ell(eps)) + y;
    };
    double lo = -1.0;
    while (f(lo) > 0.0) lo *= 2.0;
    const auto r = num::bisect(f, lo, 0.0);
    return -std::expm1(r.x);
  }

  std::string id_;
  std::map<std::string, double> params_;
  TailClass kind_ = TailClass::Gumbel;
  std::shared_ptr<const GumbelFns> gumbel_;
  std::shared_ptr<const WeibullFns> weibull_;
};

/// mu(x, 1] for x in [0, 1).
inline double tail_prob(const FitnessModel& model, double x) {
  if (!(x >= 0.0 && x < 1.0))
    throw DomainError("tail_prob: x must lie in [0, 1), got " + std::to_string(x));
  return std::exp(model.log_tail(x));
}

/// Cumulative distribution function of the fitness law.
inline double fitness_cdf(const FitnessModel& model, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return -std::expm1(model.log_tail(x));
}

/// Fitness from a standard exponential draw: g(e) in the Gumbel class.
inline double fitness_from_exp(const FitnessModel& model, double e) {
  return model.quantile_exp(e);
}

/// Inverse-CDF sample from mu, strictly inside (0, 1).
inline double sample_fitness(const FitnessModel& model, Rng& rng) {
  const double x = model.quantile_exp(exp1(rng));
  if (x <= 0.0) return std::numeric_limits<double>::min();
  if (x >= 1.0) return std::nextafter(1.0, 0.0);
  return x;
}

/// E[h(F)] for F ~ mu, computed as the integral of h(quantile_exp(y)) e^{-y}
/// over y in [0, y_max].
template <typename H>
double expectation(const FitnessModel& model, H&& h, double y_max = 60.0,
                   double rel_tol = 1e-13) {
  return num::integrate_exp_weight([&](double y) { return h(model.quantile_exp(y)); },
                                   std::min(y_max, model.max_exp_level()), rel_tol);
}

// ---------------------------------------------------------------------------
// kappa and the (A5) regularity checks

struct KappaReport {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  /// Raw ratio m''(x) m(x) x / m'(x)^2 at x = 1 - 10^{-k}, k = 4..8.
  std::array<double, 5> raw{};
  bool failed = false;
};

/// m''(x) m(x) x / m'(x)^2, evaluated in log space.
inline double kappa_ratio(const FitnessModel& model, double x) {
  return std::exp(model.log_m2(x) + model.log_m(x) + std::log(x) - 2.0 * model.log_m1(x));
}

/// Limit of the kappa ratio as x -> 1: raw values at x = 1 - 10^{-k} for
/// k = 4..8, extrapolated with Aitken's delta-squared on the last three.
/// Declared failed when the raw values at k = 7 and 8 differ by more than 10%.
inline KappaReport kappa(const FitnessModel& model) {
  KappaReport rep;
  for (int k = 4; k <= 8; ++k)
    rep.raw[static_cast<std::size_t>(k - 4)] = kappa_ratio(model, 1.0 - std::pow(10.0, -k));
  const double r6 = rep.raw[2], r7 = rep.raw[3], r8 = rep.raw[4];
  if (!std::isfinite(r7) || !std::isfinite(r8) ||
      std::abs(r8 - r7) > 0.1 * std::max(std::abs(r7), std::abs(r8))) {
    rep.failed = true;
    rep.estimate = r8;
    rep.residual = std::abs(r8 - r7);
    return rep;
  }
  const double d1 = r7 - r6;
  const double d2 = r8 - r7;
  const double denom = d2 - d1;
  double est = r8;
  // Aitken is only meaningful for a geometric-looking error sequence.
  if (denom != 0.0 && d1 * d2 > 0.0 && std::abs(d2) < std::abs(d1))
    est = r8 - d2 * d2 / denom;
  rep.estimate = est;
  rep.residual = std::abs(est - r8);
  return rep;
}

struct ConditionResult {
  std::string name;
  bool pass = true;
  /// Grid points and values behind a failure, or the final values on success.
  std::vector<std::pair<double, double>> evidence;
};

struct A5Report {
  std::array<ConditionResult, 4> conditions;
  KappaReport kappa;
  bool all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionResult& c) { return c.pass; });
  }
};

namespace detail {
// A sequence on x_k = 1 - 10^{-k}, k = 2..8, "tends to zero" when it is
// eventually non-increasing and its last value is below 10% of the first.
inline ConditionResult tends_to_zero(std::string name, const FitnessModel& model,
                                     const std::function<double(double)>& ratio) {
  ConditionResult c{std::move(name), true, {}};
  std::vector<std::pair<double, double>> values;
  for (int k = 2; k <= 8; ++k) {
    const double x = 1.0 - std::pow(10.0, -k);
    values.emplace_back(x, ratio(x));
  }
  (void)model;
  const double first = values.front().second;
  const double last = values.back().second;
  bool monotone_tail = true;
  for (std::size_t i = values.size() - 3; i + 1 < values.size(); ++i)
    if (values[i + 1].second > values[i].second) monotone_tail = false;
  c.pass = std::isfinite(last) && monotone_tail && last <= 0.1 * first;
  c.evidence = c.pass ? std::vector{values.back()} : values;
  return c;
}
}  // namespace detail

/// Numerical check of the four (A5) conditions on grids approaching 1.
/// A5.1 is tested on the open interval (0, 1): m'' may vanish at 0 exactly.
inline A5Report check_a5(const FitnessModel& model) {
  if (!model.is_gumbel()) throw DomainError("check_a5 requires a Gumbel-class model");
  A5Report rep;

  ConditionResult a1{"A5.1 m'>0, m''>0", true, {}};
  std::vector<double> grid;
  for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);
  for (int k = 3; k <= 8; ++k) grid.push_back(1.0 - std::pow(10.0, -k));
  for (double x : grid) {
    const double d1 = model.log_m1(x);
    const double d2 = model.log_m2(x);
    // log of a non-positive value is NaN or -inf
    if (!(d1 > -std::numeric_limits<double>::infinity()) ||
        !(d2 > -std::numeric_limits<double>::infinity())) {
      a1.pass = false;
      a1.evidence.emplace_back(x, std::min(d1, d2));
    }
  }
  rep.conditions[0] = a1;

  rep.conditions[1] = detail::tends_to_zero("A5.2 m''/m'^2 -> 0", model, [&](double x) {
    return std::exp(model.log_m2(x) - 2.0 * model.log_m1(x));
  });

  rep.kappa = kappa(model);
  ConditionResult a3{"A5.3 m''m x/m'^2 -> kappa > 0", true, {}};
  a3.pass = !rep.kappa.failed && rep.kappa.estimate > 0.0;
  for (int k = 4; k <= 8; ++k)
    a3.evidence.emplace_back(1.0 - std::pow(10.0, -k), rep.kappa.raw[static_cast<std::size_t>(k - 4)]);
  rep.conditions[2] = a3;

  rep.conditions[3] = detail::tends_to_zero("A5.4 m/m' -> 0", model, [&](double x) {
    return std::exp(model.log_m(x) - model.log_m1(x));
  });
  return rep;
}

// ---------------------------------------------------------------------------
// Catalog

namespace catalog {

inline FitnessModel power_rho(double rho) {
  if (!(rho > 0.0)) throw DomainError("power_rho: rho must be positive");
  FitnessModel::GumbelFns f;
  f.m = [rho](double x) { return std::pow(1.0 - x, -rho) - 1.0; };
  f.m1 = [rho](double x) { return rho * std::pow(1.0 - x, -rho - 1.0); };
  f.m2 = [rho](double x) { return rho * (rho + 1.0) * std::pow(1.0 - x, -rho - 2.0); };
  f.g = [rho](double y) { return -std::expm1(-std::log1p(y) / rho); };
  f.g1 = [rho](double y) { return std::pow(1.0 + y, -1.0 / rho - 1.0) / rho; };
  f.g2 = [rho](double y) {
    return -(1.0 / rho) * (1.0 / rho + 1.0) * std::pow(1.0 + y, -1.0 / rho - 2.0);
  };
  f.log_m = [rho](double x) {
    const double le = std::log1p(-x);
    return std::log(-std::expm1(rho * le)) - rho * le;
  };
  f.log_m1 = [rho](double x) { return std::log(rho) - (rho + 1.0) * std::log1p(-x); };
  f.log_m2 = [rho](double x) {
    return std::log(rho * (rho + 1.0)) - (rho + 2.0) * std::log1p(-x);
  };
  return FitnessModel::gumbel("power_rho", {{"rho", rho}}, std::move(f));
}

inline FitnessModel exp_inv() {
  const double e = std::exp(1.0);
  FitnessModel::GumbelFns f;
  f.m = [e](double x) { return std::exp(1.0 / (1.0 - x)) - e; };
  f.m1 = [](double x) {
    const double u = 1.0 / (1.0 - x);
    return std::exp(u) * u * u;
  };
  f.m2 = [](double x) {
    const double u = 1.0 / (1.0 - x);
    return std::exp(u) * (u * u * u * u + 2.0 * u * u * u);
  };
  f.g = [e](double y) { return 1.0 - 1.0 / std::log(y + e); };
  f.g1 = [e](double y) {
    const double l = std::log(y + e);
    return 1.0 / ((y + e) * l * l);
  };
  f.g2 = [e](double y) {
    const double l = std::log(y + e);
    return -(l + 2.0) / ((y + e) * (y + e) * l * l * l);
  };
  f.log_m = [](double x) {
    const double u = 1.0 / (1.0 - x);
    return u + std::log(-std::expm1(1.0 - u));
  };
  f.log_m1 = [](double x) {
    const double u = 1.0 / (1.0 - x);
    return u + 2.0 * std::log(u);
  };
  f.log_m2 = [](double x) {
    const double u = 1.0 / (1.0 - x);
    return u + 4.0 * std::log(u) + std::log1p(2.0 / u);
  };
  return FitnessModel::gumbel("exp_inv", {}, std::move(f));
}

inline FitnessModel gnedenko() {
  FitnessModel::GumbelFns f;
  f.m = [](double x) { return x / (1.0 - x); };
  f.m1 = [](double x) { return 1.0 / ((1.0 - x) * (1.0 - x)); };
  f.m2 = [](double x) { return 2.0 / ((1.0 - x) * (1.0 - x) * (1.0 - x)); };
  f.g = [](double y) { return y / (1.0 + y); };
  f.g1 = [](double y) { return 1.0 / ((1.0 + y) * (1.0 + y)); };
  f.g2 = [](double y) { return -2.0 / ((1.0 + y) * (1.0 + y) * (1.0 + y)); };
  f.log_m = [](double x) { return std::log(x) - std::log1p(-x); };
  f.log_m1 = [](double x) { return -2.0 * std::log1p(-x); };
  f.log_m2 = [](double x) { return std::log(2.0) - 3.0 * std::log1p(-x); };
  return FitnessModel::gumbel("gnedenko", {}, std::move(f));
}

inline FitnessModel exp_sqrt() {
  const double e = std::exp(1.0);
  FitnessModel::GumbelFns f;
  f.m = [e](double x) { return std::exp(1.0 / std::sqrt(1.0 - x)) - e; };
  f.m1 = [](double x) {
    const double u = 1.0 / std::sqrt(1.0 - x);
    return std::exp(u) * u * u * u / 2.0;
  };
  f.m2 = [](double x) {
    const double u = 1.0 / std::sqrt(1.0 - x);
    return std::exp(u) * std::pow(u, 5) * (u + 3.0) / 4.0;
  };
  f.g = [e](double y) {
    const double l = std::log(y + e);
    return 1.0 - 1.0 / (l * l);
  };
  f.g1 = [e](double y) {
    const double l = std::log(y + e);
    return 2.0 / ((y + e) * l * l * l);
  };
  f.g2 = [e](double y) {
    const double l = std::log(y + e);
    return -2.0 * (3.0 + l) / ((y + e) * (y + e) * l * l * l * l);
  };
  f.log_m = [](double x) {
    const double u = 1.0 / std::sqrt(1.0 - x);
    return u + std::log(-std::expm1(1.0 - u));
  };
  f.log_m1 = [](double x) {
    const double u = 1.0 / std::sqrt(1.0 - x);
    return u + 3.0 * std::log(u) - std::log(2.0);
  };
  f.log_m2 = [](double x) {
    const double u = 1.0 / std::sqrt(1.0 - x);
    return u + 5.0 * std::log(u) + std::log(u + 3.0) - std::log(4.0);
  };
  return FitnessModel::gumbel("exp_sqrt", {}, std::move(f));
}

inline FitnessModel tan_model() {
  constexpr double h = num::kPi / 2.0;
  FitnessModel::GumbelFns f;
  f.m = [](double x) { return std::tan(h * x); };
  f.m1 = [](double x) {
    const double c = std::cos(h * x);
    return h / (c * c);
  };
  f.m2 = [](double x) {
    const double c = std::cos(h * x);
    return 2.0 * h * h * std::tan(h * x) / (c * c);
  };
  f.g = [](double y) { return std::atan(y) / h; };
  f.g1 = [](double y) { return 1.0 / (h * (1.0 + y * y)); };
  f.g2 = [](double y) { return -2.0 * y / (h * (1.0 + y * y) * (1.0 + y * y)); };
  // cos(h x) = sin(h (1 - x)) avoids cancellation near 1
  f.log_m = [](double x) {
    return std::log(std::sin(h * x)) - std::log(std::sin(h * (1.0 - x)));
  };
  f.log_m1 = [](double x) { return std::log(h) - 2.0 * std::log(std::sin(h * (1.0 - x))); };
  f.log_m2 = [](double x) {
    return std::log(2.0 * h * h) + std::log(std::sin(h * x)) -
           3.0 * std::log(std::sin(h * (1.0 - x)));
  };
  return FitnessModel::gumbel("tan", {}, std::move(f));
}

/// m(x) = log(e/(1-x)) loglog(e/(1-x)): Gumbel domain but outside (A5).
/// No closed-form inverse; g is computed numerically.
inline FitnessModel loglog_negative() {
  FitnessModel::GumbelFns f;
  f.m = [](double x) {
    const double l = 1.0 - std::log1p(-x);
    return l * std::log(l);
  };
  f.m1 = [](double x) {
    const double l = 1.0 - std::log1p(-x);
    return (std::log(l) + 1.0) / (1.0 - x);
  };
  f.m2 = [](double x) {
    const double l = 1.0 - std::log1p(-x);
    return (std::log(l) + 1.0 + 1.0 / l) / ((1.0 - x) * (1.0 - x));
  };
  return FitnessModel::gumbel("loglog_negative", {}, std::move(f));
}

/// mu(x, 1) = (1 - x)^alpha, i.e. Beta(1, alpha); alpha = 1 is uniform.
inline FitnessModel weibull_alpha(double alpha) {
  FitnessModel::WeibullFns f;
  f.alpha = alpha;
  f.ell = [](double) { return 1.0; };
  f.quantile_exp = [alpha](double y) { return -std::expm1(-y / alpha); };
  return FitnessModel::weibull("weibull_alpha", {{"alpha", alpha}}, std::move(f));
}

inline FitnessModel uniform() { return weibull_alpha(1.0); }

inline const std::vector<std::string>& ids() {
  static const std::vector<std::string> v{"power_rho", "exp_inv",         "gnedenko",
                                          "exp_sqrt",  "tan",             "loglog_negative",
                                          "weibull_alpha"};
  return v;
}

/// Default parameters of each catalog template.
inline std::map<std::string, double> default_params(const std::string& id) {
  if (id == "power_rho") return {{"rho", 0.5}};
  if (id == "weibull_alpha") return {{"alpha", 1.0}};
  return {};
}

/// Builds a catalog model from its id and numeric parameters; missing
/// parameters take their defaults, unknown ones are rejected.
inline FitnessModel make(const std::string& id, std::map<std::string, double> params = {}) {
  auto resolved = default_params(id);
  for (const auto& [k, v] : params) {
    if (!resolved.count(k))
      throw DomainError("fitness model '" + id + "' has no parameter '" + k + "'");
    resolved[k] = v;
  }
  if (id == "power_rho") return power_rho(resolved.at("rho"));
  if (id == "exp_inv") return exp_inv();
  if (id == "gnedenko") return gnedenko();
  if (id == "exp_sqrt") return exp_sqrt();
  if (id == "tan") return tan_model();
  if (id == "loglog_negative") return loglog_negative();
  if (id == "weibull_alpha") {
    const double a = resolved.at("alpha");
    if (!(a > 0.0)) throw DomainError("weibull_alpha: alpha must be positive");
    return weibull_alpha(a);
  }
  throw DomainError("unknown fitness model '" + id + "'");
}

}  // namespace catalog
}  // namespace cgp
