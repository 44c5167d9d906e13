// Test fixture: synthetic truth economy. Simulates n workers at fixed
// parameters and records the yearly sample top-income shares the estimator
// will chase. Sample shares (not analytic limits) keep the finite-population
// bias of the top-share statistic identical on both sides of a fit.
#pragma once

#include <cmath>
#include <cstdint>

#include "srgbm/analytics.hpp"
#include "srgbm/estimation.hpp"
#include "srgbm/parallel.hpp"
#include "srgbm/simulator.hpp"

namespace testutil {

inline srgbm::estimation::ObservedSeries simulate_truth_series(
    const srgbm::SrgbmParams& truth, int n_years, std::int64_t n_workers,
    double dt, std::uint64_t seed, int threads = 0) {
  using namespace srgbm;
  const analytics::StationaryDistribution stat(truth);
  const std::size_t n = static_cast<std::size_t>(n_workers);
  rng::EnsembleRng streams(seed, rng::Stream::synthetic_series, 0, n);
  std::vector<double> x(n);
  parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double u = streams.worker(i).uniform();
      while (u <= 0.0) u = streams.worker(i).uniform();
      x[i] = stat.quantile(u);
    }
  });

  const sim::StepKernel kernel(truth, dt);
  const auto steps_per_year =
      static_cast<std::int64_t>(std::llround(1.0 / dt));
  estimation::ObservedSeries s;
  for (int y = 0; y < n_years; ++y) {
    if (y > 0) {
      parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          double xi = x[i];
          for (std::int64_t st = 0; st < steps_per_year; ++st)
            kernel(xi, streams.worker(i));
          x[i] = xi;
        }
      });
    }
    s.years.push_back(2000 + y);
    s.top_share.push_back(estimation::sample_top_share(x, 0.01));
    s.aux_share.push_back(estimation::sample_top_share(x, 0.10));
    s.reset_rate.push_back(truth.r);
  }
  return s;
}

}  // namespace testutil
