#include "srgbm/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace srgbm::analytics {

namespace {

void require_laplace_arg(double s) {
  if (!std::isfinite(s) || s < 0.0)
    throw DomainError("Laplace variable s must be finite and >= 0");
}

void require_target_reachable(const FptQuery& q, const SrgbmParams& p) {
  validate(q);
  validate(p);
  if (p.x_r > q.y)
    throw DomainError("reset income x_r must not exceed the target y");
}

// q1 without the s >= 0 guard; the moment extractor probes small negative s
// where the discriminant is still positive.
double q1_unchecked(double s, const SrgbmParams& p) {
  const double c = p.sigma2 - 2.0 * p.mu;
  const double disc = c * c + 8.0 * s * p.sigma2;
  if (disc < 0.0)
    throw NumericalError("characteristic discriminant negative");
  const double root = std::sqrt(disc);
  if (c >= 0.0) return (root + c) / (2.0 * p.sigma2);
  return 4.0 * s / (root - c);  // product form, avoids cancellation
}

double mgf_unchecked(double x0, double y, double s, const SrgbmParams& p) {
  // log-space: y/x0 can span many orders of magnitude in percentile queries.
  return std::exp(q1_unchecked(s, p) * std::log(x0 / y));
}

double survival_laplace_unchecked(const FptQuery& q, double s,
                                  const SrgbmParams& p) {
  if (s == 0.0 && p.r == 0.0) {
    const double m = p.log_drift();
    if (m <= 0.0)
      throw DivergenceError(
          "MFPT diverges: no resetting and mu <= sigma2/2");
    return std::log(q.y / q.x0) / m;
  }
  const double q1 = q1_unchecked(s + p.r, p);
  // expm1 keeps 1 - (x0/y)^q1 exact as q1 -> 0 (the r -> 0 regime).
  const double numerator = -std::expm1(q1 * std::log(q.x0 / q.y));
  const double t_xr = std::exp(q1 * std::log(p.x_r / q.y));
  return numerator / (s + p.r * t_xr);
}

// m-th central difference of f at 0 with step h (nodes (m/2 - j)*h).
template <typename F>
double central_difference(F&& f, int m, double h) {
  double acc = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= m; ++j) {
    const double node = (0.5 * m - j) * h;
    acc += (j % 2 == 0 ? binom : -binom) * f(node);
    binom = binom * (m - j) / (j + 1);
  }
  return acc / std::pow(h, m);
}

}  // namespace

double exponent_q1(double s, const SrgbmParams& params) {
  require_laplace_arg(s);
  validate(params);
  return q1_unchecked(s, params);
}

double exponent_q2(double s, const SrgbmParams& params) {
  require_laplace_arg(s);
  validate(params);
  const double c = params.sigma2 - 2.0 * params.mu;
  const double root = std::sqrt(c * c + 8.0 * s * params.sigma2);
  if (c <= 0.0) return -(root - c) / (2.0 * params.sigma2);
  return -4.0 * s / (root + c);
}

double fpt_mgf_reset_free(const FptQuery& query, double s,
                          const SrgbmParams& params) {
  require_laplace_arg(s);
  validate(query);
  validate(params);
  return mgf_unchecked(query.x0, query.y, s, params);
}

double survival_laplace_reset(const FptQuery& query, double s,
                              const SrgbmParams& params) {
  require_laplace_arg(s);
  require_target_reachable(query, params);
  return survival_laplace_unchecked(query, s, params);
}

double mfpt(const FptQuery& query, const SrgbmParams& params) {
  require_target_reachable(query, params);
  return survival_laplace_unchecked(query, 0.0, params);
}

double fpt_moment(int n, const FptQuery& query, const SrgbmParams& params) {
  if (n < 1) throw DomainError("fpt_moment: n must be >= 1");
  require_target_reachable(query, params);

  if (params.r == 0.0) {
    // Exact derivatives of T~(s) = exp(-L*q1(s)) at s = 0, L = ln(y/x0).
    const double m = params.log_drift();
    if (m <= 0.0)
      throw DivergenceError(
          "FPT moments diverge: no resetting and mu <= sigma2/2");
    const double L = std::log(query.y / query.x0);
    const double d0 = 2.0 * m;  // |sigma2 - 2 mu|, positive here
    // g(s) = -L*q1(s); g^(k)(0) from the closed-form derivatives of the
    // discriminant square root: q1^(k)(0) = (-1)^(k-1) (2k-3)!! (4 sigma2)^k
    // / (2 sigma2 * d0^(2k-1)).
    std::vector<double> g(n + 1, 0.0);
    double double_fact = 1.0;  // (2k-3)!!, == 1 for k = 1
    double power = 1.0;
    for (int k = 1; k <= n; ++k) {
      power *= 4.0 * params.sigma2;
      if (k >= 2) double_fact *= 2 * k - 3;
      const double sign = (k % 2 == 1) ? 1.0 : -1.0;
      const double q1k = sign * double_fact * power /
                         (2.0 * params.sigma2 * std::pow(d0, 2 * k - 1));
      g[k] = -L * q1k;
    }
    // Derivatives of exp(g) by the Leibniz recurrence.
    std::vector<double> t(n + 1, 0.0);
    t[0] = 1.0;  // T~(0) = 1 when the drift wins
    for (int k = 1; k <= n; ++k) {
      double acc = 0.0;
      double binom = 1.0;
      for (int j = 0; j < k; ++j) {
        acc += binom * g[k - j] * t[j];
        binom = binom * (k - 1 - j) / (j + 1);
      }
      t[k] = acc;
    }
    return (n % 2 == 0 ? 1.0 : -1.0) * t[n];
  }

  if (n == 1) return survival_laplace_unchecked(query, 0.0, params);
  if (n > 8)
    throw DomainError(
        "fpt_moment: finite-difference extraction supports n <= 8");

  // <T_r^n> = n * (-1)^(n-1) * d^(n-1) q_r / ds^(n-1) at s = 0.
  const int m = n - 1;
  const double h = 1e-5 * std::max(1.0, params.r);
  auto f = [&](double s) { return survival_laplace_unchecked(query, s, params); };
  const double coarse = central_difference(f, m, h);
  const double fine = central_difference(f, m, 0.5 * h);
  const double deriv = (4.0 * fine - coarse) / 3.0;  // one Richardson step
  const double sign = (n % 2 == 1) ? 1.0 : -1.0;
  return n * sign * deriv;
}

double tail_alpha(const SrgbmParams& params) {
  validate(params);
  const double m = params.log_drift();
  const double root = std::sqrt(m * m + 2.0 * params.r * params.sigma2);
  if (m > 0.0) return 2.0 * params.r / (root + m);
  return (root - m) / params.sigma2;
}

StationaryDistribution::StationaryDistribution(const SrgbmParams& params) {
  validate(params);
  if (params.r <= 0.0)
    throw DivergenceError(
        "no stationary income distribution without resetting (r = 0)");
  alpha_ = tail_alpha(params);
  beta_ = alpha_ + 2.0 * params.log_drift() / params.sigma2;
  x_r_ = params.x_r;
  if (alpha_ <= 0.0 || beta_ <= 0.0)
    throw NumericalError("stationary density is not normalizable");
  norm_ = alpha_ * beta_ / (x_r_ * (alpha_ + beta_));
}

double StationaryDistribution::pdf(double x) const {
  if (!(x > 0.0)) throw DomainError("stationary pdf: income must be > 0");
  const double u = x / x_r_;
  if (u <= 1.0) return norm_ * std::pow(u, beta_ - 1.0);
  return norm_ * std::pow(u, -alpha_ - 1.0);
}

double StationaryDistribution::cdf(double x) const {
  if (!(x > 0.0)) return 0.0;
  const double u = x / x_r_;
  const double w = alpha_ + beta_;
  if (u <= 1.0) return (alpha_ / w) * std::pow(u, beta_);
  return 1.0 - (beta_ / w) * std::pow(u, -alpha_);
}

double StationaryDistribution::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("quantile: percentile must lie in (0, 1)");
  const double w = alpha_ + beta_;
  const double p_split = alpha_ / w;  // CDF at x_r
  if (p <= p_split) return x_r_ * std::pow(p * w / alpha_, 1.0 / beta_);
  return x_r_ * std::pow((1.0 - p) * w / beta_, -1.0 / alpha_);
}

double StationaryDistribution::top_income_share(double q) const {
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("top_income_share: q must lie in (0, 1)");
  if (alpha_ <= 1.0)
    throw NumericalError(
        "top income share undefined: mean diverges for alpha <= 1");
  const double xq = quantile(1.0 - q);
  const double u = xq / x_r_;
  const double mean_tail = 1.0 / (alpha_ - 1.0);
  const double mean_total = 1.0 / (beta_ + 1.0) + mean_tail;
  if (u >= 1.0) return std::pow(u, 1.0 - alpha_) * mean_tail / mean_total;
  // Quantile below the reset point: integrate the lower branch up from xq.
  const double lower = (1.0 - std::pow(u, beta_ + 1.0)) / (beta_ + 1.0);
  return (lower + mean_tail) / mean_total;
}

double stationary_density(double x, const SrgbmParams& params) {
  return StationaryDistribution(params).pdf(x);
}

namespace {

// Brent scalar minimization on [a, b] (golden section with parabolic steps).
template <typename F>
double brent_minimize(F&& f, double a, double b, double tol, int max_iter,
                      double& fmin) {
  constexpr double golden = 0.3819660112501051;
  double x = a + golden * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-300;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
    bool parabolic = false;
    if (std::abs(e) > tol1) {
      const double rr = (x - w) * (fx - fv);
      double qq = (x - v) * (fx - fw);
      double pp = (x - v) * qq - (x - w) * rr;
      qq = 2.0 * (qq - rr);
      if (qq > 0.0) pp = -pp;
      qq = std::abs(qq);
      const double e_old = e;
      e = d;
      if (std::abs(pp) < std::abs(0.5 * qq * e_old) && pp > qq * (a - x) &&
          pp < qq * (b - x)) {
        parabolic = true;
        d = pp / qq;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (mid > x) ? tol1 : -tol1;
      }
    }
    if (!parabolic) {
      e = (x < mid) ? b - x : a - x;
      d = golden * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d
                                           : x + ((d > 0.0) ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  fmin = fx;
  return x;
}

}  // namespace

OptimalRateResult optimal_resetting_rate(const FptQuery& query, double mu,
                                         double sigma2, double x_r,
                                         double r_max,
                                         const OptimalRateOptions& opts) {
  validate(query);
  if (!(r_max > 0.0)) throw DomainError("optimal rate: r_max must be > 0");
  if (!(x_r > 0.0 && x_r <= query.y))
    throw DomainError("optimal rate: need 0 < x_r <= y");

  const double m = mu - 0.5 * sigma2;
  const double limit0 = (query.x0 == query.y)
                            ? 0.0
                            : (m > 0.0 ? std::log(query.y / query.x0) / m
                                       : std::numeric_limits<double>::infinity());
  if (query.x0 == query.y) return {0.0, 0.0, false};

  auto objective = [&](double r) {
    SrgbmParams p{mu, sigma2, r, x_r};
    return mfpt(query, p);
  };

  // Log-spaced bracketing scan, then Brent inside the best bracket.
  const double lo = std::max(opts.r_floor, r_max * 1e-9);
  const int n = std::max(8, opts.coarse_points);
  const double ratio = std::pow(r_max / lo, 1.0 / (n - 1));
  std::vector<double> grid(n), vals(n);
  double g = lo;
  int best = 0;
  for (int i = 0; i < n; ++i, g *= ratio) {
    grid[i] = std::min(g, r_max);
    vals[i] = objective(grid[i]);
    if (!std::isfinite(vals[i]))
      throw DivergenceError("optimal rate: MFPT not finite on search grid");
    if (vals[i] < vals[best]) best = i;
  }
  const double a = grid[std::max(0, best - 1)];
  const double b = grid[std::min(n - 1, best + 1)];
  double f_star = 0.0;
  double r_star = brent_minimize(objective, a, b, opts.rel_tol, 200, f_star);
  if (vals[best] < f_star) {  // keep whichever evaluation was better
    r_star = grid[best];
    f_star = vals[best];
  }

  if (limit0 <= f_star) return {0.0, limit0, false};
  return {r_star, f_star, true};
}

}  // namespace srgbm::analytics
