#pragma once

// Root finding, quadrature and special functions shared by the solvers.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace cgp {

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

namespace num {

inline constexpr double kEulerGamma = 0.57721566490153286060651209;
inline constexpr double kPi = 3.14159265358979323846264338;

struct RootResult {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Bisection on a bracket [lo, hi] with f(lo) and f(hi) of opposite sign.
/// Runs until the bracket stops shrinking in floating point or max_iter.
template <typename F>
RootResult bisect(F&& f, double lo, double hi, int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, 0.0, 0, true};
  if (fhi == 0.0) return {hi, 0.0, 0, true};
  if (std::signbit(flo) == std::signbit(fhi))
    throw NumericError("bisect: root is not bracketed");
  RootResult r;
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) {
      lo = hi = mid;
      flo = fhi = 0.0;
      break;
    }
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  r.converged = true;
  if (std::abs(flo) <= std::abs(fhi)) {
    r.x = lo;
    r.residual = flo;
  } else {
    r.x = hi;
    r.residual = fhi;
  }
  return r;
}

/// Newton iteration kept inside [lo, hi]; a step leaving the bracket (or not
/// reducing |f|) is replaced by a bisection step. `fdf` returns {f, f'}.
template <typename FdF>
RootResult safeguarded_newton(FdF&& fdf, double lo, double hi, double x0,
                              double xtol, int max_iter = 200) {
  auto [flo, dlo] = fdf(lo);
  auto [fhi, dhi] = fdf(hi);
  (void)dlo;
  (void)dhi;
  if (flo == 0.0) return {lo, 0.0, 0, true};
  if (fhi == 0.0) return {hi, 0.0, 0, true};
  if (std::signbit(flo) == std::signbit(fhi))
    throw NumericError("safeguarded_newton: root is not bracketed");
  const bool increasing = flo < 0.0;
  double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
  RootResult r;
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    auto [fx, dfx] = fdf(x);
    if (fx == 0.0) return {x, 0.0, r.iterations, true};
    if ((fx < 0.0) == increasing)
      lo = x;
    else
      hi = x;
    double next = x - fx / dfx;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= xtol || hi - lo <= xtol) {
      r.x = next;
      r.residual = fdf(next).first;
      r.converged = true;
      return r;
    }
    x = next;
  }
  r.x = x;
  r.residual = fdf(x).first;
  return r;
}

/// Adaptive 31-point Gauss-Kronrod on a finite interval.
template <typename F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13,
                 double* error = nullptr, unsigned max_depth = 15) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, max_depth, rel_tol, &err);
  if (error) *error = err;
  return v;
}

/// Integral of f over [0, upper] against the weight e^{-y}, split into
/// doubling segments so that long flat tails and the bulk are both resolved.
template <typename F>
double integrate_exp_weight(F&& h, double upper, double rel_tol = 1e-13) {
  auto integrand = [&](double y) { return h(y) * std::exp(-y); };
  double total = 0.0;
  double a = 0.0;
  double b = std::min(1.0, upper);
  while (a < upper) {
    total += integrate(integrand, a, b, rel_tol);
    a = b;
    b = std::min(2.0 * b, upper);
  }
  return total;
}

inline double gamma_fn(double x) { return std::tgamma(x); }
inline double log_gamma(double x) { return std::lgamma(x); }

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (!std::isfinite(x)) return 1.0;
  return boost::math::gamma_p(a, x);
}

/// Harmonic number H_n = sum_{i=1}^n 1/i (exact summation for small n,
/// asymptotic expansion beyond).
inline double harmonic(long long n) {
  if (n <= 0) return 0.0;
  if (n < 100000) {
    double s = 0.0;
    for (long long i = n; i >= 1; --i) s += 1.0 / static_cast<double>(i);
    return s;
  }
  const double x = static_cast<double>(n);
  const double x2 = x * x;
  return std::log(x) + kEulerGamma + 1.0 / (2.0 * x) - 1.0 / (12.0 * x2) +
         1.0 / (120.0 * x2 * x2);
}

}  // namespace num
}  // namespace cgp
