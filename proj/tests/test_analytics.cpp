#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "srgbm/analytics.hpp"

using namespace srgbm;
using namespace srgbm::analytics;

namespace {

const SrgbmParams kBenchmark{0.10, 0.03, 0.041, 1.0};
const FptQuery kBenchmarkQuery{1.0, 10.0};

// Frozen oracle values for the benchmark point (mu=0.10, sigma2=0.03,
// r=0.041, x0=x_r=1, y=10), cross-checked against the Monte Carlo estimator
// in the acceptance suite.
constexpr double kQ1Benchmark = 0.4470799197662073;
constexpr double kQ2Benchmark = -6.113746586432874;
constexpr double kMgfBenchmark = 0.3572070981164407;
constexpr double kMfptBenchmark = 43.890157105965360;
constexpr double kResetFreeMfpt = 27.089236388165243;  // ln(10)/0.085

double characteristic_poly(double q, const SrgbmParams& p, double s) {
  return p.mu * q + 0.5 * p.sigma2 * q * (q - 1.0) - s;
}

}  // namespace

TEST_CASE("characteristic exponents: closed-form values") {
  SrgbmParams p{0.0, 0.1, 0.0, 1.0};
  CHECK(exponent_q1(0.0, p) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exponent_q2(0.0, p) == doctest::Approx(0.0).epsilon(1e-14));

  // sigma2 = 2*mu cancels the drift term: q1 = sqrt(2s/sigma2).
  SrgbmParams cancel{0.05, 0.1, 0.0, 1.0};
  CHECK(exponent_q1(0.05, cancel) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(exponent_q1(0.041, kBenchmark) ==
        doctest::Approx(kQ1Benchmark).epsilon(1e-12));
  CHECK(exponent_q2(0.041, kBenchmark) ==
        doctest::Approx(kQ2Benchmark).epsilon(1e-12));

  // q1(0) vanishes whenever the drift wins.
  CHECK(exponent_q1(0.0, kBenchmark) == 0.0);
}

TEST_CASE("characteristic exponents: root and product properties") {
  std::mt19937_64 eng(20240101);
  std::uniform_real_distribution<double> mu_d(-0.2, 0.5);
  std::uniform_real_distribution<double> s2_d(1e-3, 0.5);
  std::uniform_real_distribution<double> s_d(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    SrgbmParams p{mu_d(eng), s2_d(eng), 0.0, 1.0};
    const double s = s_d(eng);
    const double q1 = exponent_q1(s, p);
    const double q2 = exponent_q2(s, p);
    const double tol = 1e-10 * std::max(1.0, s);
    CHECK(std::abs(characteristic_poly(q1, p, s)) <= tol);
    CHECK(std::abs(characteristic_poly(q2, p, s)) <= tol);
    CHECK(q1 >= 0.0);
    CHECK(q2 <= 0.0);
    const double product = -2.0 * s / p.sigma2;
    CHECK(q1 * q2 == doctest::Approx(product).epsilon(1e-10));
  }
}

TEST_CASE("tail alpha equals q1 evaluated at the resetting rate") {
  std::mt19937_64 eng(42);
  std::uniform_real_distribution<double> mu_d(-0.2, 0.5);
  std::uniform_real_distribution<double> s2_d(1e-3, 0.5);
  std::uniform_real_distribution<double> r_d(0.0, 0.5);
  for (int i = 0; i < 1000; ++i) {
    SrgbmParams p{mu_d(eng), s2_d(eng), r_d(eng), 1.0};
    const double alpha = tail_alpha(p);
    const double q1 = exponent_q1(p.r, p);
    CHECK(alpha == doctest::Approx(q1).epsilon(1e-12));
  }
  // r = 0 with winning drift collapses the square root.
  CHECK(tail_alpha({0.2, 0.1, 0.0, 1.0}) == doctest::Approx(0.0));
  CHECK(tail_alpha({0.0, 0.1, 0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(tail_alpha(kBenchmark) ==
        doctest::Approx(0.4470799197662073).epsilon(1e-12));
}

TEST_CASE("reset-free MGF: bounds, boundary condition, monotonicity") {
  CHECK(fpt_mgf_reset_free({5.0, 5.0}, 0.7, kBenchmark) == 1.0);
  // Drift-dominated process hits the target with probability one.
  CHECK(fpt_mgf_reset_free(kBenchmarkQuery, 0.0, kBenchmark) ==
        doctest::Approx(1.0));
  CHECK(fpt_mgf_reset_free(kBenchmarkQuery, 0.041, kBenchmark) ==
        doctest::Approx(kMgfBenchmark).epsilon(1e-12));

  double prev = 1.1;
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> mu_d(-0.2, 0.4);
  std::uniform_real_distribution<double> s2_d(1e-3, 0.5);
  for (int i = 0; i < 200; ++i) {
    SrgbmParams p{mu_d(eng), s2_d(eng), 0.0, 1.0};
    prev = 1.0 + 1e-12;
    for (double s : {0.0, 0.05, 0.2, 0.5, 1.0, 3.0}) {
      const double v = fpt_mgf_reset_free({1.0, 4.0}, s, p);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      CHECK(v < prev);  // strictly decreasing in s for x0 < y
      prev = v;
    }
  }

  CHECK_THROWS_AS(fpt_mgf_reset_free({2.0, 1.0}, 0.1, kBenchmark),
                  DomainError);
}

TEST_CASE("mfpt: benchmark value, trivial cases and domain errors") {
  CHECK(mfpt({3.0, 3.0}, kBenchmark) == 0.0);
  CHECK(mfpt(kBenchmarkQuery, kBenchmark) ==
        doctest::Approx(kMfptBenchmark).epsilon(1e-12));

  // r -> 0 limit agrees with the closed form of the drift-only mean.
  SrgbmParams tiny = kBenchmark;
  tiny.r = 1e-8;
  CHECK(mfpt(kBenchmarkQuery, tiny) ==
        doctest::Approx(kResetFreeMfpt).epsilon(1e-3));
  SrgbmParams zero = kBenchmark;
  zero.r = 0.0;
  CHECK(mfpt(kBenchmarkQuery, zero) ==
        doctest::Approx(kResetFreeMfpt).epsilon(1e-14));

  SrgbmParams weak{0.01, 0.05, 0.0, 1.0};  // mu <= sigma2/2, no resetting
  CHECK_THROWS_AS(mfpt(kBenchmarkQuery, weak), DivergenceError);

  SrgbmParams high_reset = kBenchmark;
  high_reset.x_r = 20.0;  // above the target
  CHECK_THROWS_AS(mfpt(kBenchmarkQuery, high_reset), DomainError);
  CHECK_THROWS_AS(mfpt({5.0, 2.0}, kBenchmark), DomainError);
}

TEST_CASE("mfpt: monotone in the target and scale invariant") {
  std::mt19937_64 eng(99);
  std::uniform_real_distribution<double> c_d(0.1, 50.0);
  double prev = 0.0;
  for (double y : {2.0, 4.0, 8.0, 16.0, 64.0}) {
    const double v = mfpt({1.0, y}, kBenchmark);
    CHECK(v > prev);
    prev = v;
  }
  for (int i = 0; i < 100; ++i) {
    const double c = c_d(eng);
    SrgbmParams scaled = kBenchmark;
    scaled.x_r *= c;
    CHECK(mfpt({c * 1.0, c * 10.0}, scaled) ==
          doctest::Approx(kMfptBenchmark).epsilon(1e-12));
  }
}

TEST_CASE("survival Laplace transform under resetting") {
  CHECK(survival_laplace_reset({4.0, 4.0}, 0.3, kBenchmark) == 0.0);
  // s = 0 is exactly the MFPT (same code path).
  CHECK(survival_laplace_reset(kBenchmarkQuery, 0.0, kBenchmark) ==
        mfpt(kBenchmarkQuery, kBenchmark));

  SrgbmParams weak{0.01, 0.05, 0.0, 1.0};
  CHECK_THROWS_AS(survival_laplace_reset(kBenchmarkQuery, 0.0, weak),
                  DivergenceError);
  // but any s > 0 is finite without resetting
  CHECK(survival_laplace_reset(kBenchmarkQuery, 0.5, weak) > 0.0);

  // decreasing in s
  double prev = 1e300;
  for (double s : {0.0, 0.01, 0.1, 0.5}) {
    const double v = survival_laplace_reset(kBenchmarkQuery, s, kBenchmark);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("fpt moments: reset-free closed forms") {
  SrgbmParams p = kBenchmark;
  p.r = 0.0;
  CHECK(fpt_moment(1, kBenchmarkQuery, p) ==
        doctest::Approx(kResetFreeMfpt).epsilon(1e-14));

  // n = 2 against the exact hand derivation
  // <T^2> = L*8*sigma2/d0^3 + L^2*4/d0^2 with d0 = 2mu - sigma2.
  const double L = std::log(10.0);
  const double d0 = 2.0 * p.mu - p.sigma2;
  const double expect2 =
      L * 8.0 * p.sigma2 / (d0 * d0 * d0) + L * L * 4.0 / (d0 * d0);
  CHECK(fpt_moment(2, kBenchmarkQuery, p) ==
        doctest::Approx(expect2).epsilon(1e-12));

  SrgbmParams weak{0.01, 0.05, 0.0, 1.0};
  CHECK_THROWS_AS(fpt_moment(1, kBenchmarkQuery, weak), DivergenceError);
  CHECK_THROWS_AS(fpt_moment(0, kBenchmarkQuery, p), DomainError);
}

TEST_CASE("fpt moments: resetting case") {
  // n = 1 must agree with mfpt (identical path).
  CHECK(fpt_moment(1, kBenchmarkQuery, kBenchmark) ==
        doctest::Approx(mfpt(kBenchmarkQuery, kBenchmark)).epsilon(1e-6));

  // Frozen second moment from a high-precision derivative of q_r.
  CHECK(fpt_moment(2, kBenchmarkQuery, kBenchmark) ==
        doctest::Approx(2798.5200267859232).epsilon(1e-7));
}

TEST_CASE("stationary density: normalization, continuity, shape") {
  const StationaryDistribution stat(kBenchmark);

  // Quadrature oracle over log-income; tail handled by the analytic CDF
  // complement at the cut.
  const double x_hi = stat.quantile(1.0 - 1e-9);
  const auto integrand = [&](double t) {
    const double x = std::exp(t);
    return stat.pdf(x) * x;  // d(log x) substitution
  };
  const double body = oracles::integrate(
      integrand, std::log(stat.quantile(1e-12)), std::log(x_hi), 1e-10);
  const double tail = 1.0 - stat.cdf(x_hi);
  CHECK(body + tail == doctest::Approx(1.0).epsilon(1e-6));

  // continuity at x_r
  CHECK(stat.pdf(1.0 - 1e-12) == doctest::Approx(stat.pdf(1.0 + 1e-12)));

  // log-log slope above x_r: -(alpha + 1)
  const double slope =
      (std::log(stat.pdf(8.0)) - std::log(stat.pdf(2.0))) /
      (std::log(8.0) - std::log(2.0));
  CHECK(slope == doctest::Approx(-(stat.alpha() + 1.0)).epsilon(1e-12));

  SrgbmParams no_reset = kBenchmark;
  no_reset.r = 0.0;
  CHECK_THROWS_AS(StationaryDistribution{no_reset}, DivergenceError);
}

TEST_CASE("stationary distribution: cdf/quantile inverse pair") {
  const StationaryDistribution stat(kBenchmark);
  for (double p : {1e-6, 0.01, 0.068, 0.25, 0.5, 0.9, 0.99, 1.0 - 1e-6}) {
    const double x = stat.quantile(p);
    CHECK(stat.cdf(x) == doctest::Approx(p).epsilon(1e-10));
  }
  // strictly increasing
  double prev = 0.0;
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double x = stat.quantile(p);
    CHECK(x > prev);
    prev = x;
  }
  // CDF at the reset point splits mass alpha/(alpha+beta)
  CHECK(stat.cdf(1.0) ==
        doctest::Approx(stat.alpha() / (stat.alpha() + stat.beta())));
}

TEST_CASE("top income share matches the quadrature oracle") {
  SrgbmParams p{0.02, 0.05, 0.1, 1.0};
  const StationaryDistribution stat(p);
  // frozen from an independent numerical integration
  CHECK(stat.top_income_share(0.01) == doctest::Approx(0.0957057).epsilon(1e-4));
  CHECK(stat.top_income_share(0.10) == doctest::Approx(0.3201204).epsilon(1e-4));

  // alpha <= 1 has a divergent mean
  CHECK_THROWS_AS(StationaryDistribution(kBenchmark).top_income_share(0.01),
                  NumericalError);
}

TEST_CASE("optimal resetting rate: boundary and interior") {
  // Strong drift: resetting only delays the passage.
  const auto boundary =
      optimal_resetting_rate({1.0, 10.0}, 0.5, 0.03, 1.0, 1.0);
  CHECK(boundary.r_star == 0.0);
  CHECK_FALSE(boundary.interior);
  CHECK(boundary.mfpt_min ==
        doctest::Approx(std::log(10.0) / (0.5 - 0.015)).epsilon(1e-12));

  // Zero drift: interior optimum, checked against a dense grid oracle.
  const auto interior =
      optimal_resetting_rate({1.0, 10.0}, 0.0, 0.02, 1.0, 1.0);
  CHECK(interior.interior);
  CHECK(interior.r_star > 0.0);

  const int grid_n = 20000;
  double best_r = 0.0, best_v = 1e300;
  for (int i = 1; i <= grid_n; ++i) {
    const double r = 1.0 * i / grid_n;
    const double v = mfpt({1.0, 10.0}, {0.0, 0.02, r, 1.0});
    if (v < best_v) {
      best_v = v;
      best_r = r;
    }
  }
  CHECK(std::abs(interior.r_star - best_r) <= 1.0 / grid_n);
  CHECK(interior.mfpt_min <= best_v + 1e-9);
}

TEST_CASE("optimal resetting rate is nonincreasing in the drift") {
  double prev = 1e300;
  for (double mu : {0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12}) {
    const auto res = optimal_resetting_rate({1.0, 10.0}, mu, 0.03, 1.0, 0.5);
    CHECK(res.r_star <= prev + 1e-12);
    prev = res.r_star;
  }
  CHECK(prev == 0.0);  // large drift ends at the boundary
}
