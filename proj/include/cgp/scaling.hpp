#pragma once

// Window centre sigma_t, scaling constants, Frechet scales and the reference
// intensity densities of the limiting Poisson point processes.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cgp/fitness.hpp"
#include "cgp/numerics.hpp"

namespace cgp {

/// Law of the martingale limit xi of a single growth process.
class XiLaw {
public:
  enum class Kind { Exponential, PointMassOne, Custom };

  /// Standard exponential: the Yule-process limit.
  static XiLaw exponential() {
    XiLaw law;
    law.kind_ = Kind::Exponential;
    law.density_ = [](double z) { return z < 0.0 ? 0.0 : std::exp(-z); };
    law.survival_ = [](double z) { return z <= 0.0 ? 1.0 : std::exp(-z); };
    law.moment_ = [](double p) { return std::tgamma(1.0 + p); };
    return law;
  }

  /// Dirac mass at 1 (deterministic growth).
  static XiLaw point_mass_one() {
    XiLaw law;
    law.kind_ = Kind::PointMassOne;
    law.survival_ = [](double z) { return z <= 1.0 ? 1.0 : 0.0; };
    law.moment_ = [](double) { return 1.0; };
    return law;
  }

  /// Absolutely continuous law given by its density; survival function and
  /// moments are obtained by quadrature unless supplied.
  static XiLaw custom(ScalarFn density, ScalarFn survival = {}, ScalarFn moment = {}) {
    XiLaw law;
    law.kind_ = Kind::Custom;
    law.density_ = density;
    if (!survival) {
      survival = [density](double z) {
        if (z <= 0.0) return 1.0;
        return num::integrate([&](double u) { return density(z + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)); },
                              0.0, 1.0, 1e-12);
      };
    }
    if (!moment) {
      moment = [density](double p) {
        return num::integrate(
            [&](double u) {
              const double z = u / (1.0 - u);
              return std::pow(z, p) * density(z) / ((1.0 - u) * (1.0 - u));
            },
            0.0, 1.0, 1e-12);
      };
    }
    law.survival_ = std::move(survival);
    law.moment_ = std::move(moment);
    return law;
  }

  Kind kind() const { return kind_; }
  bool has_density() const { return static_cast<bool>(density_); }
  double density(double z) const {
    if (!density_) throw DomainError("xi law has no density (point mass)");
    return density_(z);
  }
  double survival(double z) const { return survival_(z); }
  double moment(double p) const { return moment_(p); }

private:
  Kind kind_ = Kind::Exponential;
  ScalarFn density_;
  ScalarFn survival_;
  ScalarFn moment_;
};

struct ScalingBundle {
  TailClass tail = TailClass::Gumbel;
  double t = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  /// kappa (Gumbel) or alpha (Weibull).
  double kappa = 0.0;
  double alpha = 0.0;
  double sigma_t = 1.0;
  bool sigma_clamped = false;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double frechet_shape = 0.0;
  double frechet_scale = 0.0;
  double xi_moment = 0.0;
  double T_hat = 0.0;
};

// ---------------------------------------------------------------------------
// sigma_t

struct SigmaSolution {
  /// max(1, root); this is the value used for rescaling.
  double sigma = 1.0;
  /// Unclamped root of (log g)'(lambda x) = 1/(lambda (t - x)).
  double root = 0.0;
  bool clamped = false;
  /// |(log g)'(lambda root) lambda (t - root) - 1|.
  double residual = 0.0;
  bool no_root = false;
};

/// Solves (log g)'(lambda x) = 1/(lambda (t - x)) for x in (0, t) by
/// bisection on a bracket of width t (1 - 2e-9) followed by Newton polish,
/// then clamps below at 1.
inline SigmaSolution solve_sigma(const FitnessModel& model, double lambda, double t) {
  if (!model.is_gumbel()) throw DomainError("solve_sigma requires a Gumbel-class model");
  if (!(lambda > 0.0) || !(t > 0.0)) throw DomainError("solve_sigma: lambda and t must be positive");
  const double lt = lambda * t;
  // Root in y = lambda x of G(y) = g'(y)(lambda t - y) - g(y), which has the
  // sign of (log g)'(y) - 1/(lambda t - y) and is strictly decreasing.
  auto G = [&](double y) { return model.g1(y) * (lt - y) - model.g(y); };
  const double eps = 1e-9 * lt;
  SigmaSolution sol;
  double lo = eps;
  double hi = lt - eps;
  if (!(G(lo) > 0.0) || !(G(hi) < 0.0)) {
    sol.no_root = true;
    sol.clamped = true;
    sol.sigma = 1.0;
    sol.root = std::numeric_limits<double>::quiet_NaN();
    sol.residual = std::numeric_limits<double>::quiet_NaN();
    return sol;
  }
  auto br = num::bisect(G, lo, hi, 60);
  // Newton polish on G with G'(y) = g''(y)(lambda t - y) - 2 g'(y).
  double y = br.x;
  for (int i = 0; i < 3; ++i) {
    const double gy = G(y);
    const double dg = model.g2(y) * (lt - y) - 2.0 * model.g1(y);
    if (gy == 0.0 || dg == 0.0) break;
    const double next = y - gy / dg;
    if (!(next > lo && next < hi)) break;
    if (std::abs(G(next)) >= std::abs(gy)) break;
    y = next;
  }
  sol.root = y / lambda;
  sol.residual = std::abs(model.g1(y) * (lt - y) / model.g(y) - 1.0);
  sol.clamped = sol.root < 1.0;
  sol.sigma = sol.clamped ? 1.0 : sol.root;
  return sol;
}

/// Deterministic part of sigma_t in the Weibull class:
/// (alpha/lambda) log t - (1/lambda) log ell(1/t).
inline double sigma_weibull_leading(double alpha, const ScalarFn& ell, double lambda, double t) {
  const double l = ell ? ell(1.0 / t) : 1.0;
  return (alpha / lambda) * std::log(t) - std::log(l) / lambda;
}

// ---------------------------------------------------------------------------
// Frechet scales

/// Scale of the Frechet limit in the Gumbel class:
/// (sqrt(2 pi lambda / kappa) E[xi^{lambda/gamma}])^{gamma/lambda}.
inline double frechet_scale_gumbel(double lambda, double gamma, double kappa, double xi_moment) {
  return std::pow(std::sqrt(2.0 * num::kPi * lambda / kappa) * xi_moment, gamma / lambda);
}

/// Scale of the Frechet limit in the Weibull class:
/// (Gamma(alpha + 1) lambda^{-alpha} E[xi^{lambda/gamma}])^{gamma/lambda}.
inline double frechet_scale_weibull(double lambda, double gamma, double alpha, double xi_moment) {
  return std::pow(std::tgamma(alpha + 1.0) * std::pow(lambda, -alpha) * xi_moment, gamma / lambda);
}

/// Scaling constants for a Gumbel-class experiment observed at time t.
inline ScalingBundle make_gumbel_bundle(const FitnessModel& model, double lambda, double gamma,
                                        double t, const XiLaw& xi = XiLaw::exponential()) {
  ScalingBundle b;
  b.tail = TailClass::Gumbel;
  b.t = t;
  b.lambda = lambda;
  b.gamma = gamma;
  b.kappa = kappa(model).estimate;
  const auto sol = solve_sigma(model, lambda, t);
  b.sigma_t = sol.sigma;
  b.sigma_clamped = sol.clamped;
  b.a1 = gamma / (2.0 * lambda);
  b.a2 = gamma * b.kappa / 2.0;
  b.a3 = gamma / lambda;
  b.frechet_shape = lambda / gamma;
  b.xi_moment = xi.moment(lambda / gamma);
  b.frechet_scale = frechet_scale_gumbel(lambda, gamma, b.kappa, b.xi_moment);
  return b;
}

/// Scaling constants for a Weibull-class experiment observed at time t; the
/// random offset T enters sigma_t through T_hat.
inline ScalingBundle make_weibull_bundle(const FitnessModel& model, double lambda, double gamma,
                                         double t, double T_hat,
                                         const XiLaw& xi = XiLaw::exponential()) {
  ScalingBundle b;
  b.tail = TailClass::Weibull;
  b.t = t;
  b.lambda = lambda;
  b.gamma = gamma;
  b.alpha = model.alpha();
  b.T_hat = T_hat;
  b.sigma_t = sigma_weibull_leading(b.alpha, [&](double e) { return model.ell(e); }, lambda, t) + T_hat;
  b.a3 = gamma / lambda;
  b.frechet_shape = lambda / gamma;
  b.xi_moment = xi.moment(lambda / gamma);
  b.frechet_scale = frechet_scale_weibull(lambda, gamma, b.alpha, b.xi_moment);
  return b;
}

// ---------------------------------------------------------------------------
// Intensity densities

/// Gumbel-class limit intensity at (s, f, z):
/// lambda e^{-f} e^{s^2 a2 - f a3} nu(z e^{s^2 a2 - f a3}).
inline double intensity_gumbel(double s, double f, double z, const ScalingBundle& b,
                               const XiLaw& nu) {
  const double e = s * s * b.a2 - f * b.a3;
  const double w = z * std::exp(e);
  const double d = nu.density(w);
  if (d == 0.0) return 0.0;
  return b.lambda * std::exp(-f + e) * d;
}

/// Weibull-class limit intensity at (s, f, z), f > 0:
/// alpha f^{alpha-1} lambda e^{lambda s} e^{gamma (s+f)} nu(z e^{gamma (s+f)}).
inline double intensity_weibull(double s, double f, double z, const ScalingBundle& b,
                                const XiLaw& nu, double alpha) {
  const double e = b.gamma * (s + f);
  const double d = nu.density(z * std::exp(e));
  if (d == 0.0) return 0.0;
  const double fp = alpha == 1.0 ? 1.0 : std::pow(f, alpha - 1.0);
  return alpha * fp * b.lambda * std::exp(b.lambda * s + e) * d;
}

/// Closed-form mass of {z >= x} under the Gumbel-class intensity:
/// lambda sqrt(pi a3 / a2) E[xi^{1/a3}] x^{-1/a3}.
inline double tail_mass_gumbel(double x, const ScalingBundle& b, const XiLaw& nu) {
  return b.lambda * std::sqrt(num::kPi * b.a3 / b.a2) * nu.moment(1.0 / b.a3) *
         std::pow(x, -1.0 / b.a3);
}

/// Closed-form mass of {z >= x} under the Weibull-class intensity:
/// Gamma(alpha+1) lambda^{-alpha} E[xi^{lambda/gamma}] x^{-lambda/gamma}.
inline double tail_mass_weibull(double x, const ScalingBundle& b, const XiLaw& nu, double alpha) {
  const double eta = b.lambda / b.gamma;
  return std::tgamma(alpha + 1.0) * std::pow(b.lambda, -alpha) * nu.moment(eta) * std::pow(x, -eta);
}

// ---------------------------------------------------------------------------
// Asymptotic sanity checks

struct AsymptoticsRow {
  double t = 0.0;
  double sigma = 0.0;
  /// lambda t g'(lambda sigma_t), tends to 1.
  double c1_ratio = 0.0;
  /// sigma_t t g''(lambda sigma_t) lambda^2 / (-kappa), tends to 1.
  double curvature_ratio = 0.0;
  /// sigma_t g'(lambda sigma_t), tends to 0.
  double small_o = 0.0;
};

struct AsymptoticsReport {
  std::vector<AsymptoticsRow> rows;
  double kappa = 0.0;
  bool c1_converged = false;
  bool curvature_converged = false;
  bool small_o_converged = false;
  bool all_converged() const { return c1_converged && curvature_converged && small_o_converged; }
};

/// The three ratio sequences along t_grid, evaluated at the unclamped root.
/// The first two pass when within 10% of 1 at the largest t; the third when
/// it is decreasing along the grid and below 0.05 at the largest t.
inline AsymptoticsReport sanity_asymptotics(const FitnessModel& model, double lambda,
                                            const std::vector<double>& t_grid) {
  AsymptoticsReport rep;
  rep.kappa = kappa(model).estimate;
  for (double t : t_grid) {
    const auto sol = solve_sigma(model, lambda, t);
    AsymptoticsRow row;
    row.t = t;
    row.sigma = sol.root;
    const double y = lambda * sol.root;
    row.c1_ratio = lambda * t * model.g1(y);
    row.curvature_ratio = sol.root * t * model.g2(y) * lambda * lambda / (-rep.kappa);
    row.small_o = sol.root * model.g1(y);
    rep.rows.push_back(row);
  }
  if (!rep.rows.empty()) {
    const auto& last = rep.rows.back();
    rep.c1_converged = std::abs(last.c1_ratio - 1.0) <= 0.1;
    rep.curvature_converged = std::abs(last.curvature_ratio - 1.0) <= 0.1;
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
      if (rep.rows[i].small_o > rep.rows[i - 1].small_o) decreasing = false;
    rep.small_o_converged = decreasing && last.small_o <= 0.05;
  }
  return rep;
}

}  // namespace cgp
