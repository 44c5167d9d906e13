#include "srgbm/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>

#include "srgbm/analytics.hpp"
#include "srgbm/parallel.hpp"

namespace srgbm::sim {

namespace {

constexpr int kMaxRedraws = 1000;

std::int64_t steps_for(double duration, double dt) {
  return std::llround(duration / dt);
}

}  // namespace

StepKernel::StepKernel(const SrgbmParams& p, double dt)
    : growth(1.0 + p.mu * dt),
      vol(std::sqrt(p.sigma2 * dt)),
      p_reset(p.r * dt),
      x_r(p.x_r) {}

std::int64_t StepKernel::operator()(double& x, rng::WorkerRng& rng) const {
  if (rng.uniform() < p_reset) {
    x = x_r;
    return 0;
  }
  std::int64_t redraws = 0;
  for (;;) {
    const double next = x * (growth + vol * rng.gauss());
    if (next > 0.0) {
      x = next;
      return redraws;
    }
    if (++redraws >= kMaxRedraws)
      throw NumericalError(
          "step rejected too often; reduce sigma2*dt (contract: <= 1e-2)");
  }
}

void validate(const SimConfig& config, const SrgbmParams& params) {
  validate(params);
  if (!(config.dt > 0.0)) throw DomainError("SimConfig: dt must be > 0");
  if (!(config.horizon > 0.0))
    throw DomainError("SimConfig: horizon must be > 0");
  if (config.n_trajectories < 1)
    throw DomainError("SimConfig: need at least one trajectory");
  if (params.r * config.dt >= 1.0)
    throw DomainError("SimConfig: r*dt must be < 1 (reset probability)");
}

std::int64_t step_ensemble(std::vector<double>& incomes,
                           const SrgbmParams& params, double dt,
                           rng::EnsembleRng& streams, int threads) {
  validate(params);
  if (!(dt > 0.0)) throw DomainError("step_ensemble: dt must be > 0");
  if (params.r * dt >= 1.0)
    throw DomainError("step_ensemble: r*dt must be < 1");
  if (incomes.size() != streams.size())
    throw DomainError("step_ensemble: one stream per worker required");
  for (double x : incomes)
    if (!(x > 0.0)) throw DomainError("step_ensemble: incomes must be > 0");

  const StepKernel coeffs(params, dt);
  std::atomic<std::int64_t> redraws{0};
  parallel_for(incomes.size(), threads, [&](std::size_t lo, std::size_t hi) {
    std::int64_t local = 0;
    for (std::size_t i = lo; i < hi; ++i)
      local += coeffs(incomes[i], streams.worker(i));
    redraws += local;
  });
  return redraws.load();
}

FptSampleSet sample_fpt(const FptQuery& query, const SrgbmParams& params,
                        const SimConfig& config, int threads) {
  validate(config, params);
  if (!(query.x0 > 0.0) || !(query.y > 0.0))
    throw DomainError("sample_fpt: incomes must be > 0");

  const std::size_t n = static_cast<std::size_t>(config.n_trajectories);
  FptSampleSet out;
  if (query.x0 >= query.y) {
    out.hitting_times.assign(n, 0.0);
    out.degenerate = true;
    return out;
  }

  const StepKernel coeffs(params, config.dt);
  const std::int64_t max_steps = steps_for(config.horizon, config.dt);
  constexpr double censored = -1.0;
  std::vector<double> times(n, censored);

  parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      rng::WorkerRng rng(config.seed, rng::Stream::fpt_trajectory, i);
      double x = query.x0;
      for (std::int64_t step = 1; step <= max_steps; ++step) {
        coeffs(x, rng);
        if (x >= query.y) {
          times[i] = static_cast<double>(step) * config.dt;
          break;
        }
      }
    }
  });

  out.hitting_times.reserve(n);
  for (double t : times) {
    if (t == censored)
      ++out.n_censored;
    else
      out.hitting_times.push_back(t);
  }
  return out;
}

McEstimate estimate_mfpt_mc(const FptSampleSet& samples,
                            double max_censored_fraction) {
  if (samples.hitting_times.size() < 2)
    throw DomainError("estimate_mfpt_mc: need at least two hitting times");
  const double cf = samples.censored_fraction();
  if (cf > max_censored_fraction)
    throw CensoringError(
        "censored fraction " + std::to_string(cf) + " exceeds threshold " +
            std::to_string(max_censored_fraction),
        cf);

  const auto& t = samples.hitting_times;
  const double n = static_cast<double>(t.size());
  double sum = 0.0;
  for (double v : t) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : t) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, sd / std::sqrt(n), cf, static_cast<std::int64_t>(t.size())};
}

FractionResult fraction_reaching(const FptQuery& query,
                                 const SrgbmParams& params,
                                 double window_years, const SimConfig& config,
                                 int threads) {
  if (window_years < 0.0)
    throw DomainError("fraction_reaching: window must be >= 0");
  SimConfig cfg = config;
  cfg.horizon = std::max(window_years, config.dt);  // validation floor
  validate(cfg, params);

  const std::int64_t n = config.n_trajectories;
  std::int64_t hits = 0;
  if (query.x0 >= query.y) {
    hits = n;  // already at or past the target
  } else if (window_years > 0.0) {
    cfg.horizon = window_years;
    const FptSampleSet s = sample_fpt(query, params, cfg, threads);
    hits = static_cast<std::int64_t>(s.hitting_times.size());
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  const double se = std::sqrt(std::max(0.0, p * (1.0 - p) / n));
  return {p, se, hits, n};
}

IncomePanel generate_panel(const SrgbmParams& params, std::int64_t n_workers,
                           double burn_in, double delta,
                           const SimConfig& config, int threads,
                           PanelStart start) {
  validate(config, params);
  if (n_workers < 1) throw DomainError("generate_panel: need workers");
  if (burn_in < 0.0 || delta < 0.0)
    throw DomainError("generate_panel: burn_in and delta must be >= 0");
  // The stationary draw needs r > 0; the burn-in path has no stationary
  // state to relax to either, so reject both up front.
  const analytics::StationaryDistribution stat(params);

  const std::size_t n = static_cast<std::size_t>(n_workers);
  rng::EnsembleRng streams(config.seed, rng::Stream::panel_worker, 0, n);

  std::vector<double> x(n);
  parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (start == PanelStart::stationary_draw) {
        // First draw of worker i's stream is its stationary quantile.
        double u = streams.worker(i).uniform();
        while (u <= 0.0) u = streams.worker(i).uniform();
        x[i] = stat.quantile(u);
      } else {
        x[i] = params.x_r;
      }
    }
  });

  const StepKernel coeffs(params, config.dt);
  auto advance = [&](std::int64_t steps) {
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        auto& rng = streams.worker(i);
        double xi = x[i];
        for (std::int64_t s = 0; s < steps; ++s)
          coeffs(xi, rng);
        x[i] = xi;
      }
    });
  };

  IncomePanel panel;
  panel.worker_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) panel.worker_ids[i] = i;
  panel.delta = delta;

  advance(steps_for(burn_in, config.dt));
  panel.snapshots.push_back({burn_in, x});
  advance(steps_for(delta, config.dt));
  panel.snapshots.push_back({burn_in + delta, x});
  return panel;
}

double Histogram::integral() const {
  double acc = 0.0;
  for (std::size_t b = 0; b < density.size(); ++b)
    acc += density[b] * (edges[b + 1] - edges[b]);
  return acc;
}

Histogram stationary_histogram(const SrgbmParams& params,
                               const SimConfig& config,
                               const HistogramOptions& opts, int threads) {
  validate(config, params);
  if (opts.n_bins < 2) throw DomainError("histogram: need at least two bins");
  const analytics::StationaryDistribution stat(params);

  double lo = opts.x_lo, hi = opts.x_hi;
  if (lo <= 0.0) lo = stat.quantile(1e-4);
  if (hi <= 0.0) hi = stat.quantile(1.0 - 1e-4);
  if (!(hi > lo)) throw DomainError("histogram: x_hi must exceed x_lo");

  Histogram h;
  h.edges.resize(opts.n_bins + 1);
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (int b = 0; b <= opts.n_bins; ++b)
    h.edges[b] = std::exp(log_lo + (log_hi - log_lo) * b / opts.n_bins);
  h.counts.assign(opts.n_bins, 0);

  const std::size_t n = static_cast<std::size_t>(config.n_trajectories);
  const std::int64_t total_steps = steps_for(config.horizon, config.dt);
  const std::int64_t burn_steps =
      static_cast<std::int64_t>(opts.burn_fraction * total_steps);
  const std::int64_t stride =
      config.record_stride > 0 ? config.record_stride : total_steps;
  const StepKernel coeffs(params, config.dt);
  const double inv_bin = opts.n_bins / (log_hi - log_lo);

  // Integer bin counts merge associatively, so the merge order cannot
  // change the result.
  std::mutex merge_mutex;
  std::int64_t total_recorded = 0;

  parallel_for(n, threads, [&](std::size_t lo_i, std::size_t hi_i) {
    std::vector<std::int64_t> bins(opts.n_bins, 0);
    std::int64_t recorded = 0;
    for (std::size_t i = lo_i; i < hi_i; ++i) {
      rng::WorkerRng rng(config.seed, rng::Stream::histogram_worker, i);
      double x;
      if (opts.start == PanelStart::stationary_draw) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        x = stat.quantile(u);
      } else {
        x = params.x_r;
      }
      for (std::int64_t step = 1; step <= total_steps; ++step) {
        coeffs(x, rng);
        const bool record =
            step > burn_steps && (step % stride == 0 || step == total_steps);
        if (!record) continue;
        ++recorded;
        const double lx = std::log(x);
        if (lx < log_lo || lx >= log_hi) continue;
        const int b = std::min(opts.n_bins - 1,
                               static_cast<int>((lx - log_lo) * inv_bin));
        ++bins[b];
      }
    }
    const std::lock_guard<std::mutex> lock(merge_mutex);
    total_recorded += recorded;
    for (int b = 0; b < opts.n_bins; ++b) h.counts[b] += bins[b];
  });

  h.n_samples = total_recorded;
  h.density.resize(opts.n_bins);
  for (int b = 0; b < opts.n_bins; ++b) {
    const double width = h.edges[b + 1] - h.edges[b];
    h.density[b] =
        h.n_samples > 0
            ? static_cast<double>(h.counts[b]) / (h.n_samples * width)
            : 0.0;
  }
  return h;
}

}  // namespace srgbm::sim
