#pragma once

#include <cmath>

#include "srgbm/errors.hpp"

namespace srgbm {

// Model state of the economy: multiplicative drift mu and variance rate
// sigma2 (both year^-1), Poisson resetting rate r (year^-1) and the income
// x_r a reset worker restarts from.
struct SrgbmParams {
  double mu = 0.0;
  double sigma2 = 0.0;
  double r = 0.0;
  double x_r = 1.0;

  // Effective log-drift mu - sigma^2/2.
  double log_drift() const { return mu - 0.5 * sigma2; }
};

inline void validate(const SrgbmParams& p) {
  if (!std::isfinite(p.mu) || !std::isfinite(p.sigma2) || !std::isfinite(p.r) ||
      !std::isfinite(p.x_r))
    throw DomainError("SrgbmParams: non-finite parameter");
  if (p.sigma2 <= 0.0) throw DomainError("SrgbmParams: sigma2 must be > 0");
  if (p.r < 0.0) throw DomainError("SrgbmParams: resetting rate must be >= 0");
  if (p.x_r <= 0.0) throw DomainError("SrgbmParams: reset income must be > 0");
}

// One first-passage problem: start at income x0, absorb at target y.
struct FptQuery {
  double x0 = 1.0;
  double y = 1.0;
};

inline void validate(const FptQuery& q) {
  if (!std::isfinite(q.x0) || !std::isfinite(q.y))
    throw DomainError("FptQuery: non-finite income");
  if (q.x0 <= 0.0) throw DomainError("FptQuery: starting income must be > 0");
  if (q.y < q.x0)
    throw DomainError("FptQuery: target income must satisfy y >= x0");
}

}  // namespace srgbm
