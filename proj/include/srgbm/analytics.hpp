#pragma once

#include "srgbm/types.hpp"

namespace srgbm::analytics {

// Characteristic exponents: the roots of mu*q + (sigma2/2)*q*(q-1) = s.
// q1 >= 0, q2 <= 0, q1*q2 = -2s/sigma2. Evaluated in a cancellation-free
// branch so the defining relation holds to ~1e-15 for any parameter mix.
double exponent_q1(double s, const SrgbmParams& params);
double exponent_q2(double s, const SrgbmParams& params);

// Reset-free first-passage MGF <e^{-sT}> = (x0/y)^{q1(s)}, x0 <= y.
double fpt_mgf_reset_free(const FptQuery& query, double s,
                          const SrgbmParams& params);

// Laplace transform of the survival probability under resetting,
//   q_r(s) = [1 - T~(x0,y,s+r)] / [s + r * T~(x_r,y,s+r)].
// Its s -> 0 value is the MFPT; that limit is returned exactly, including
// the removable r = 0 case ln(y/x0) / (mu - sigma2/2) when the drift wins.
double survival_laplace_reset(const FptQuery& query, double s,
                              const SrgbmParams& params);

// Mean first passage time <T_r> in years.
double mfpt(const FptQuery& query, const SrgbmParams& params);

// n-th FPT moment (years^n). Reset-free moments are exact derivatives of the
// MGF; with resetting the (n-1)-th derivative of q_r at s = 0 is taken by
// central differences with step 1e-5*max(1, r) plus one Richardson step
// (supported for n <= 8; n = 1 is the exact MFPT).
double fpt_moment(int n, const FptQuery& query, const SrgbmParams& params);

// Tail shape parameter of the stationary income distribution,
// alpha = [-(mu - sigma2/2) + sqrt((mu - sigma2/2)^2 + 2 r sigma2)] / sigma2.
double tail_alpha(const SrgbmParams& params);

// Stationary income distribution for r > 0: a power law on each side of x_r,
//   pdf(x) = C * (x/x_r)^(beta - 1)   for x <= x_r,
//   pdf(x) = C * (x/x_r)^(-alpha - 1) for x >  x_r,
// with beta = alpha + 2*(mu - sigma2/2)/sigma2 and C chosen so the density
// integrates to one (alpha*beta = 2r/sigma2 gives C = alpha*beta /
// (x_r*(alpha+beta)) in closed form).
class StationaryDistribution {
 public:
  explicit StationaryDistribution(const SrgbmParams& params);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  double pdf(double x) const;
  double cdf(double x) const;
  // Inverse CDF; strictly increasing on (0, 1).
  double quantile(double p) const;
  // Fraction of total income held by the top share q in (0, 1); finite only
  // for alpha > 1.
  double top_income_share(double q) const;

 private:
  double alpha_, beta_, x_r_, norm_;  // norm_ = pdf at x_r
};

double stationary_density(double x, const SrgbmParams& params);

struct OptimalRateOptions {
  double r_floor = 1e-9;    // lower edge of the search interval
  double rel_tol = 1e-8;    // Brent convergence tolerance on r
  int coarse_points = 256;  // log-spaced bracketing scan
};

struct OptimalRateResult {
  double r_star = 0.0;      // 0 means the r -> 0 boundary wins
  double mfpt_min = 0.0;    // MFPT at r_star (the limit value at the boundary)
  bool interior = false;
};

// Minimizes mfpt over r in [r_floor, r_max]; reports r* = 0 when the r -> 0
// limit is finite and no interior value beats it.
OptimalRateResult optimal_resetting_rate(const FptQuery& query, double mu,
                                         double sigma2, double x_r,
                                         double r_max,
                                         const OptimalRateOptions& opts = {});

}  // namespace srgbm::analytics
