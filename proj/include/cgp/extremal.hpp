#pragma once

// Point-process coordinates of a snapshot, extremal observables, reference
// limit laws and goodness-of-fit checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "cgp/engines.hpp"
#include "cgp/fitness.hpp"
#include "cgp/numerics.hpp"
#include "cgp/random.hpp"
#include "cgp/scaling.hpp"
#include "json.hpp"

namespace cgp {

// ---------------------------------------------------------------------------
// Reference laws

namespace laws {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be positive");
}

/// exp(-(x/scale)^{-shape}) for x > 0.
inline double frechet_cdf(double x, double shape, double scale) {
  require_positive(shape, "frechet shape");
  require_positive(scale, "frechet scale");
  if (x <= 0.0) return 0.0;
  return std::exp(-std::pow(x / scale, -shape));
}

inline double frechet_quantile(double p, double shape, double scale) {
  require_positive(shape, "frechet shape");
  require_positive(scale, "frechet scale");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("frechet_quantile: p must lie in (0, 1)");
  return scale * std::pow(-std::log(p), -1.0 / shape);
}

/// Law of log W for W ~ Frechet(shape, scale): Gumbel with location
/// log(scale) and scale 1/shape.
inline double log_frechet_cdf(double y, double shape, double scale) {
  require_positive(shape, "frechet shape");
  require_positive(scale, "frechet scale");
  return std::exp(-std::exp(-shape * (y - std::log(scale))));
}

inline double gaussian_cdf(double x, double mean, double var) {
  require_positive(var, "gaussian variance");
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

/// Gamma law with the given shape and rate.
inline double gamma_cdf(double x, double shape, double rate) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  return num::gamma_p(shape, rate * x);
}

inline double exp_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

/// Upper tail of the chi-squared law.
inline double chi_square_pvalue(double statistic, double dof) {
  require_positive(dof, "chi-squared degrees of freedom");
  if (statistic <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

}  // namespace laws

/// Kolmogorov-Smirnov sup-distance between the empirical CDF of `samples`
/// and a continuous reference CDF.
template <typename Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw DomainError("ks_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Rescaled point process coordinates

struct RescaledPoint {
  double s = 0.0;
  double f = 0.0;
  double z = 0.0;
};

/// log of the common size factor e^{-gamma g(lambda sigma)(t - sigma)
/// - a1 g(lambda sigma) log sigma + gamma T}.
inline double gumbel_log_prefactor(const FitnessModel& model, const ScalingBundle& b, double T_hat) {
  const double gs = model.g(b.lambda * b.sigma_t);
  return -b.gamma * gs * (b.t - b.sigma_t) - b.a1 * gs * std::log(b.sigma_t) + b.gamma * T_hat;
}

/// Gumbel-class coordinates ((tau - sigma)/sqrt(sigma),
/// (F - g(log(n sqrt sigma)))/g'(log(n sqrt sigma)), prefactor * Z).
inline std::vector<RescaledPoint> rescale_gumbel(const std::vector<FamilyRecord>& families,
                                                 const FitnessModel& model, const ScalingBundle& b,
                                                 double T_hat) {
  const double lp = gumbel_log_prefactor(model, b, T_hat);
  const double root = std::sqrt(b.sigma_t);
  std::vector<RescaledPoint> out;
  out.reserve(families.size());
  for (const auto& fam : families) {
    const double level = std::log(static_cast<double>(fam.index) * root);
    RescaledPoint p;
    p.s = (fam.tau - b.sigma_t) / root;
    p.f = (fam.fitness - model.g(level)) / model.g1(level);
    p.z = fam.size > 0 ? std::exp(lp + std::log(static_cast<double>(fam.size))) : 0.0;
    out.push_back(p);
  }
  return out;
}

/// Weibull-class coordinates (tau - sigma, t (1 - F), e^{-gamma (t - sigma)} Z).
inline std::vector<RescaledPoint> rescale_weibull(const std::vector<FamilyRecord>& families,
                                                  const ScalingBundle& b) {
  const double lp = -b.gamma * (b.t - b.sigma_t);
  std::vector<RescaledPoint> out;
  out.reserve(families.size());
  for (const auto& fam : families) {
    RescaledPoint p;
    p.s = fam.tau - b.sigma_t;
    p.f = b.t * (1.0 - fam.fitness);
    p.z = fam.size > 0 ? std::exp(lp + std::log(static_cast<double>(fam.size))) : 0.0;
    out.push_back(p);
  }
  return out;
}

inline void write_point_cloud_csv(std::ostream& os, const std::vector<RescaledPoint>& pts) {
  os << "s,f,z\n";
  for (const auto& p : pts) os << fmt_double(p.s) << ',' << fmt_double(p.f) << ',' << fmt_double(p.z) << '\n';
}

// ---------------------------------------------------------------------------
// Extremes

struct Extremes {
  /// Position in the input sequence and the family's own index.
  std::size_t position = 0;
  long long index = 0;
  long long max_size = 0;
  long long second_size = 0;
  /// max / second; infinite when the runner-up is empty.
  double ratio = 1.0;
};

/// Largest family (ties go to the earlier one) and its ratio to the runner-up.
inline Extremes extract_extremes(const std::vector<FamilyRecord>& families) {
  if (families.empty()) throw DomainError("extract_extremes: no families");
  Extremes e;
  e.max_size = -1;
  for (std::size_t i = 0; i < families.size(); ++i) {
    const long long z = families[i].size;
    if (z > e.max_size) {
      e.second_size = e.max_size;
      e.max_size = z;
      e.position = i;
    } else if (z > e.second_size) {
      e.second_size = z;
    }
  }
  e.second_size = std::max<long long>(e.second_size, 0);
  e.index = families[e.position].index;
  e.ratio = e.second_size > 0 ? static_cast<double>(e.max_size) / static_cast<double>(e.second_size)
                              : std::numeric_limits<double>::infinity();
  return e;
}

struct ReplicateSummary {
  double t = 0.0;
  double max_size_rescaled = 0.0;
  double argmax_fitness = 0.0;
  double argmax_birth_rescaled = 0.0;
  double top_ratio = 1.0;
  double T_hat = 0.0;
};

/// Summary of one snapshot in the coordinates of its tail class. In the
/// Weibull case sigma is rebuilt as the bundle's deterministic part plus T_hat.
inline ReplicateSummary summarize(const std::vector<FamilyRecord>& families, const FitnessModel& model,
                                  const ScalingBundle& b, double T_hat) {
  const auto e = extract_extremes(families);
  const auto& fam = families[e.position];
  ReplicateSummary r;
  r.t = b.t;
  r.T_hat = T_hat;
  r.top_ratio = e.ratio;
  r.argmax_fitness = fam.fitness;
  const double log_z = std::log(static_cast<double>(e.max_size));
  if (b.tail == TailClass::Gumbel) {
    r.max_size_rescaled = std::exp(gumbel_log_prefactor(model, b, T_hat) + log_z);
    r.argmax_birth_rescaled = (fam.tau - b.sigma_t) / std::sqrt(b.sigma_t);
  } else {
    const double sigma = b.sigma_t - b.T_hat + T_hat;
    r.max_size_rescaled = std::exp(-b.gamma * (b.t - sigma) + log_z);
    r.argmax_birth_rescaled = fam.tau - sigma;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Toy model: Z_n(t) = e^{(t - tau_n) F_n}, tau_n = (1/lambda) log n

struct ToyOutcome {
  /// log max_n Z_n(t) over n <= t^{c alpha}.
  double log_max = 0.0;
  /// e^{-t} ((lambda t)^alpha / Gamma(alpha+1))^{1/lambda} max_n Z_n(t).
  double rescaled_max = 0.0;
  long long argmax = 0;
  double argmax_fitness = 0.0;
  long long n_families = 0;
  /// Upper bound, relative to the max, on any family beyond the truncation:
  /// e^{t - tau_{N+1}} / max. At most 1 means the truncation cannot matter.
  double truncation_ratio = 0.0;
  /// The same quantities after extending the truncation to `extend_c`.
  double log_max_extended = 0.0;
  bool extension_changed = false;
};

namespace detail {

inline double toy_rescale_log(double log_max, double alpha, double lambda, double t) {
  return log_max - t + (alpha * std::log(lambda * t) - std::lgamma(alpha + 1.0)) / lambda;
}

}  // namespace detail

/// Exact maximum of the toy model with fitness law Beta(1, alpha)
/// (mu(1 - x, 1] = x^alpha) over the families n <= t^{c alpha}. Families that
/// cannot beat the running maximum are skipped in geometric blocks, which
/// leaves the law of the maximum unchanged. With extend_c > c the scan
/// continues on the same stream up to t^{extend_c alpha}.
inline ToyOutcome toy_model_oracle(double alpha, double lambda, double t, double c, Rng& rng,
                                   double extend_c = 0.0) {
  laws::require_positive(alpha, "toy alpha");
  laws::require_positive(lambda, "toy lambda");
  laws::require_positive(t, "toy t");
  if (!(c >= 3.0)) throw DomainError("toy_model_oracle: truncation multiplier must be >= 3");
  const auto bound = [&](double mult) {
    return static_cast<long long>(std::floor(std::exp(std::min(mult * alpha * std::log(t), 60.0))));
  };
  const long long n_main = std::max<long long>(1, bound(c));
  const long long n_ext = extend_c > c ? std::max(n_main, bound(extend_c)) : n_main;

  double best = -std::numeric_limits<double>::infinity();
  long long argmax = 0;
  double argmax_f = 0.0;
  long long n = 0;  // last index examined
  ToyOutcome out;
  out.n_families = n_main;
  auto scan_to = [&](long long limit) {
    while (n < limit) {
      // every later family has t - tau <= t - tau_{n+1}
      const double room = t - std::log(static_cast<double>(n + 1)) / lambda;
      if (room <= 0.0) return;
      const double x = best > 0.0 ? best / room : 0.0;
      if (x >= 1.0) return;
      const double p = std::pow(1.0 - x, alpha);
      long long skip = 0;
      if (p < 1.0) {
        const double g = std::floor(std::log(uniform_open(rng)) / std::log1p(-p));
        if (g >= static_cast<double>(limit - n)) {
          n = limit;
          return;
        }
        skip = static_cast<long long>(g);
      }
      n += skip + 1;
      if (n > limit) {
        n = limit;
        return;
      }
      // F conditioned on F > x
      const double gap = (1.0 - x) * std::pow(uniform_open(rng), 1.0 / alpha);
      const double f = 1.0 - gap;
      const double v = (t - std::log(static_cast<double>(n)) / lambda) * f;
      if (v > best) {
        best = v;
        argmax = n;
        argmax_f = f;
      }
    }
  };
  scan_to(n_main);
  out.log_max = best;
  out.argmax = argmax;
  out.argmax_fitness = argmax_f;
  out.rescaled_max = std::exp(detail::toy_rescale_log(best, alpha, lambda, t));
  out.truncation_ratio = std::exp(t - std::log(static_cast<double>(n_main) + 1.0) / lambda - best);
  n = std::max(n, n_main);
  scan_to(n_ext);
  out.log_max_extended = best;
  out.extension_changed = best != out.log_max;
  return out;
}

// ---------------------------------------------------------------------------
// Validation against the limit laws

class InsufficientReplicatesError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LawCheck {
  std::string law;
  long long n_replicates = 0;
  double ks = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::map<std::string, double> params;
};

struct LimitsReport {
  std::vector<LawCheck> checks;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const LawCheck& c) { return c.pass; });
  }
};

struct LimitsOptions {
  double ks_threshold = 0.05;
  double ratio_tolerance = 0.05;
  std::vector<double> ratio_points{1.5, 2.0, 3.0, 4.0};
  bool check_size = true;
  bool check_position = true;
  bool check_ratio = true;
  long long min_replicates = 100;
};

/// Largest |P(R >= x) - 1/x| over the given points, with the individual gaps.
inline double ratio_law_gap(const std::vector<double>& ratios, const std::vector<double>& points,
                            std::map<std::string, double>* detail_out = nullptr) {
  if (ratios.empty()) throw DomainError("ratio_law_gap: empty sample");
  double worst = 0.0;
  for (double x : points) {
    const auto hits = std::count_if(ratios.begin(), ratios.end(), [x](double r) { return r >= x; });
    const double p = static_cast<double>(hits) / static_cast<double>(ratios.size());
    const double gap = std::abs(p - 1.0 / x);
    worst = std::max(worst, gap);
    if (detail_out) (*detail_out)["P(R>=" + fmt_double(x) + ")"] = p;
  }
  return worst;
}

/// KS distances of the replicate summaries against the predicted limits:
/// maximal size vs Frechet(lambda/gamma, s) on the log scale; birth time vs
/// N(0, 1/(lambda kappa)) (Gumbel class) or t(1 - fitness) vs Gamma(alpha,
/// rate lambda) (Weibull class); the top ratio vs P(R >= x) = 1/x.
inline LimitsReport validate_limits(const std::vector<ReplicateSummary>& summaries, const ScalingBundle& b,
                                    const LimitsOptions& opt = {}) {
  const auto n = static_cast<long long>(summaries.size());
  if (n < opt.min_replicates)
    throw InsufficientReplicatesError("validate_limits: need at least " +
                                      std::to_string(opt.min_replicates) + " replicates, got " +
                                      std::to_string(n));
  LimitsReport rep;
  if (opt.check_size) {
    std::vector<double> logs;
    for (const auto& s : summaries) logs.push_back(std::log(s.max_size_rescaled));
    LawCheck c{"frechet", n, 0.0, opt.ks_threshold, false,
               {{"shape", b.frechet_shape}, {"scale", b.frechet_scale}}};
    c.ks = ks_distance(logs, [&](double y) { return laws::log_frechet_cdf(y, b.frechet_shape, b.frechet_scale); });
    c.pass = c.ks <= c.threshold;
    rep.checks.push_back(c);
  }
  if (opt.check_position) {
    if (b.tail == TailClass::Gumbel) {
      const double var = 1.0 / (b.lambda * b.kappa);
      std::vector<double> xs;
      for (const auto& s : summaries) xs.push_back(s.argmax_birth_rescaled);
      LawCheck c{"normal", n, 0.0, opt.ks_threshold, false, {{"mean", 0.0}, {"variance", var}}};
      c.ks = ks_distance(xs, [&](double x) { return laws::gaussian_cdf(x, 0.0, var); });
      c.pass = c.ks <= c.threshold;
      rep.checks.push_back(c);
    } else {
      std::vector<double> xs;
      for (const auto& s : summaries) xs.push_back(s.t * (1.0 - s.argmax_fitness));
      LawCheck c{"gamma", n, 0.0, opt.ks_threshold, false, {{"shape", b.alpha}, {"rate", b.lambda}}};
      c.ks = ks_distance(xs, [&](double x) { return laws::gamma_cdf(x, b.alpha, b.lambda); });
      c.pass = c.ks <= c.threshold;
      rep.checks.push_back(c);
    }
  }
  if (opt.check_ratio) {
    std::vector<double> rs;
    for (const auto& s : summaries) rs.push_back(s.top_ratio);
    LawCheck c{"ratio", n, 0.0, opt.ratio_tolerance, false, {}};
    c.ks = ratio_law_gap(rs, opt.ratio_points, &c.params);
    c.pass = c.ks <= c.threshold;
    rep.checks.push_back(c);
  }
  return rep;
}

inline nlohmann::json to_json(const LawCheck& c) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  return {{"law", c.law},     {"n_replicates", c.n_replicates}, {"ks", c.ks},
          {"threshold", c.threshold}, {"pass", c.pass},         {"params", params}};
}

inline nlohmann::json to_json(const LimitsReport& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : r.checks) arr.push_back(to_json(c));
  return arr;
}

// ---------------------------------------------------------------------------
// xi moments

/// Monte Carlo estimate of E[xi^p] for xi = lim e^{-gamma u} Y(u), using the
/// process observed at a large time u. The family process is the CT-GW with
/// the given increments at rate `rate` per individual.
inline double estimate_xi_moment(const std::vector<std::pair<int, double>>& increments, double rate,
                                 double p, double u, int replicates, Rng& rng) {
  double gamma = 0.0;
  for (const auto& [j, q] : increments) gamma += j * q;
  gamma *= rate;
  laws::require_positive(gamma, "growth rate");
  double acc = 0.0;
  for (int r = 0; r < replicates; ++r) {
    const auto path = simulate_ct_gw(increments, rate, u, rng);
    acc += std::pow(std::exp(-gamma * u) * static_cast<double>(path.back().second), p);
  }
  return acc / replicates;
}

}  // namespace cgp
