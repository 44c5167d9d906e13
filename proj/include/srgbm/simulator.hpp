#pragma once

#include <cstdint>
#include <vector>

#include "srgbm/rng.hpp"
#include "srgbm/types.hpp"

namespace srgbm::sim {

struct SimConfig {
  double dt = 1e-3;                 // years
  std::int64_t n_trajectories = 10000;
  double horizon = 1000.0;          // censoring time, years
  std::uint64_t seed = 1;
  std::int64_t record_stride = 0;   // histogram sampling interval in steps
};

void validate(const SimConfig& config, const SrgbmParams& params);

struct FptSampleSet {
  std::vector<double> hitting_times;  // uncensored, in trajectory order
  std::int64_t n_censored = 0;
  bool degenerate = false;            // x0 >= y: absorbed at start

  std::int64_t n_trajectories() const {
    return static_cast<std::int64_t>(hitting_times.size()) + n_censored;
  }
  double censored_fraction() const {
    const auto n = n_trajectories();
    return n == 0 ? 0.0 : static_cast<double>(n_censored) / n;
  }
};

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  double censored_fraction = 0.0;
  std::int64_t n_used = 0;
};

struct FractionResult {
  double fraction = 0.0;
  double se = 0.0;  // binomial
  std::int64_t n_hit = 0;
  std::int64_t n_total = 0;
};

struct IncomePanel {
  struct Snapshot {
    double time;                  // years since start
    std::vector<double> incomes;  // aligned with worker_ids
  };
  std::vector<std::uint64_t> worker_ids;
  std::vector<Snapshot> snapshots;
  double delta = 0.0;  // horizon between the two analysis snapshots
};

struct Histogram {
  std::vector<double> edges;           // n_bins + 1, log-spaced
  std::vector<std::int64_t> counts;    // per bin
  std::vector<double> density;         // count / (n_samples * width)
  std::int64_t n_samples = 0;          // includes out-of-range samples

  double integral() const;
};

// One Euler step of the whole ensemble: with probability r*dt a worker
// resets to x_r, otherwise x <- x*(1 + mu*dt + sigma*sqrt(dt)*eta).
// Steps that would drive an income non-positive redraw eta; the returned
// count is the number of redraws (astronomically rare under the
// sigma2*dt <= 1e-2 configuration contract).
std::int64_t step_ensemble(std::vector<double>& incomes,
                           const SrgbmParams& params, double dt,
                           rng::EnsembleRng& streams, int threads = 0);

// First-passage sampling against the absorbing target y: trajectory i uses
// the stream derived from (config.seed, i), is absorbed once x >= y at a
// step end, and censored at config.horizon.
FptSampleSet sample_fpt(const FptQuery& query, const SrgbmParams& params,
                        const SimConfig& config, int threads = 0);

// Mean and standard error of the uncensored hitting times; refuses a point
// estimate when the censored fraction exceeds max_censored_fraction.
McEstimate estimate_mfpt_mc(const FptSampleSet& samples,
                            double max_censored_fraction = 0.01);

// Fraction of trajectories whose running maximum reaches y within the
// window (same streams as sample_fpt, so windows are paired by seed).
FractionResult fraction_reaching(const FptQuery& query,
                                 const SrgbmParams& params,
                                 double window_years, const SimConfig& config,
                                 int threads = 0);

enum class PanelStart {
  stationary_draw,  // inverse-CDF draw from the analytic stationary law
  fixed_at_reset,   // all workers at x_r; relies on burn_in to relax
};

// Two aligned income snapshots at burn_in and burn_in + delta for n_workers
// workers. Requires r > 0 (stationary regime).
IncomePanel generate_panel(const SrgbmParams& params, std::int64_t n_workers,
                           double burn_in, double delta,
                           const SimConfig& config, int threads = 0,
                           PanelStart start = PanelStart::stationary_draw);

// The microscopic update shared by every simulator entry point: reset
// Bernoulli first, then the Gaussian Euler increment
// x <- x*(1 + mu*dt + sigma*sqrt(dt)*eta), redrawing eta whenever the
// outcome would be non-positive.
struct StepKernel {
  double growth;   // 1 + mu*dt
  double vol;      // sigma*sqrt(dt)
  double p_reset;  // r*dt
  double x_r;

  StepKernel(const SrgbmParams& p, double dt);

  // One step; returns the number of eta redraws (throws after 1000).
  std::int64_t operator()(double& x, rng::WorkerRng& rng) const;
};

struct HistogramOptions {
  int n_bins = 60;
  double x_lo = 0.0;  // <= 0: auto from analytic quantiles
  double x_hi = 0.0;
  PanelStart start = PanelStart::fixed_at_reset;
  double burn_fraction = 0.5;  // record only after this fraction of horizon
};

// Long-run income histogram over log-spaced bins, normalized so that the
// in-range mass integrates to ~1. Samples are recorded every
// config.record_stride steps (plus the final step) once past the burn
// fraction of the horizon.
Histogram stationary_histogram(const SrgbmParams& params,
                               const SimConfig& config,
                               const HistogramOptions& opts = {},
                               int threads = 0);

}  // namespace srgbm::sim
