#include "srgbm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "srgbm/analytics.hpp"
#include "srgbm/parallel.hpp"
#include "srgbm/simulator.hpp"

namespace srgbm::estimation {

double sample_top_share(std::span<const double> incomes, double q) {
  const std::size_t n = incomes.size();
  if (n == 0) throw DomainError("sample_top_share: empty population");
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("sample_top_share: q must lie in (0, 1)");
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(q * n)));
  std::vector<double> copy(incomes.begin(), incomes.end());
  std::nth_element(copy.begin(), copy.end() - k, copy.end());
  double top = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += copy[i];
  for (std::size_t i = n - k; i < n; ++i) top += copy[i];
  return top / total;
}

namespace {

using analytics::StationaryDistribution;

// Analytic residual of the Step-1 constraints at (mu, sigma2).
double initial_residual(double mu, double sigma2, double r, double top_obs,
                        const double* aux_obs, double tail_ratio,
                        const FitConfig& cfg) {
  const SrgbmParams p{mu, sigma2, r, cfg.x_r};
  try {
    const StationaryDistribution stat(p);
    const double top = stat.top_income_share(0.01);
    double res = (top - top_obs) * (top - top_obs);
    if (aux_obs) {
      const double aux = stat.top_income_share(0.10);
      res += (aux - *aux_obs) * (aux - *aux_obs);
    } else {
      const double ratio = stat.quantile(0.99) / stat.quantile(0.90);
      const double rel = (ratio - tail_ratio) / tail_ratio;
      res += rel * rel * top_obs * top_obs;  // keep both terms on share scale
    }
    return res;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Pattern search on the unit square with an 8-direction poll (the diagonal
// moves matter: a single share constraint leaves a curved valley in
// (mu, sigma2) that axis-only polls stall in).
template <typename F>
void pattern_search_2d(F&& fn, double u[2], double& f_best, double step0,
                       double step_tol, int max_evals,
                       int* evals_out = nullptr) {
  static constexpr double kDirs[8][2] = {
      {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  double f = fn(u[0], u[1]);
  int evals = 1;
  double step = step0;
  while (step >= step_tol && evals < max_evals) {
    bool improved = false;
    for (const auto& dir : kDirs) {
      if (evals >= max_evals) break;
      const double trial[2] = {
          std::clamp(u[0] + dir[0] * step, 0.0, 1.0),
          std::clamp(u[1] + dir[1] * step, 0.0, 1.0)};
      if (trial[0] == u[0] && trial[1] == u[1]) continue;
      const double ft = fn(trial[0], trial[1]);
      ++evals;
      if (ft < f) {
        f = ft;
        u[0] = trial[0];
        u[1] = trial[1];
        improved = true;
        break;
      }
    }
    if (!improved) step *= 0.5;
  }
  f_best = f;
  if (evals_out) *evals_out = evals;
}

struct RepOutcome {
  bool ok = false;
  std::vector<double> mu, sigma2;
};

RepOutcome run_repetition(const ObservedSeries& series, const FitConfig& cfg,
                          double mu0, double sigma20, int rep) {
  RepOutcome out;
  const std::size_t n_years = series.size();
  out.mu.resize(n_years);
  out.sigma2.resize(n_years);
  out.mu[0] = mu0;
  out.sigma2[0] = sigma20;

  const std::size_t n = static_cast<std::size_t>(cfg.n_workers);
  const SrgbmParams p0{mu0, sigma20, series.reset_rate[0], cfg.x_r};
  const StationaryDistribution stat(p0);

  rng::EnsembleRng init_streams(
      cfg.seed, rng::Stream::fit_rep,
      static_cast<std::uint64_t>(rep) << 32, n);
  std::vector<double> ensemble(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = init_streams.worker(i).uniform();
    while (u <= 0.0) u = init_streams.worker(i).uniform();
    ensemble[i] = stat.quantile(u);
  }

  double mu_prev = mu0, sigma2_prev = sigma20;
  for (std::size_t year = 1; year < n_years; ++year) {
    const std::uint64_t step_seed =
        rng::stream_id(rng::Stream::fit_year,
                       (static_cast<std::uint64_t>(rep) << 20) | year) ^
        cfg.seed;
    const auto step =
        fit_year_step(ensemble, series.top_share[year],
                      series.reset_rate[year - 1], mu_prev, sigma2_prev, cfg,
                      step_seed);
    out.mu[year] = step.mu_hat;
    out.sigma2[year] = step.sigma2_hat;
    mu_prev = step.mu_hat;
    sigma2_prev = step.sigma2_hat;
  }
  out.ok = true;
  return out;
}

}  // namespace

void validate(const ObservedSeries& series) {
  const std::size_t n = series.size();
  if (n == 0) throw ValidationError("observed series is empty");
  if (series.top_share.size() != n || series.reset_rate.size() != n ||
      (series.has_aux() && series.aux_share.size() != n))
    throw ValidationError("observed series columns have unequal lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && series.years[i] <= series.years[i - 1])
      throw ValidationError("observed series: years must be strictly increasing");
    if (!(series.top_share[i] > 0.0 && series.top_share[i] < 1.0))
      throw ValidationError("observed series: top_share outside (0,1) at year " +
                            std::to_string(series.years[i]));
    if (series.has_aux() &&
        !(series.aux_share[i] > 0.0 && series.aux_share[i] < 1.0))
      throw ValidationError("observed series: aux_share outside (0,1) at year " +
                            std::to_string(series.years[i]));
    if (!(series.reset_rate[i] > 0.0 && series.reset_rate[i] < 1.0))
      throw ValidationError("observed series: reset_rate outside (0,1) at year " +
                            std::to_string(series.years[i]));
  }
}

std::pair<double, double> fit_initial(const ObservedSeries& series,
                                      const FitConfig& config) {
  validate(series);
  const double r0 = series.reset_rate.front();
  const double top_obs = series.top_share.front();
  const double* aux_obs =
      series.has_aux() ? &series.aux_share.front() : nullptr;

  const double mu_range = config.mu_hi - config.mu_lo;
  const double s2_range = config.sigma2_hi - config.sigma2_lo;
  auto fn = [&](double u0, double u1) {
    return initial_residual(config.mu_lo + u0 * mu_range,
                            config.sigma2_lo + u1 * s2_range, r0, top_obs,
                            aux_obs, config.default_tail_ratio, config);
  };

  // Multi-start over a coarse lattice, refined by pattern search.
  double best_u[2] = {0.5, 0.5};
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      double u[2] = {(i + 0.5) / 5.0, (j + 0.5) / 5.0};
      double f = 0.0;
      pattern_search_2d(fn, u, f, 0.25, 1.0 / 4096.0, 400);
      if (f < best_f) {
        best_f = f;
        best_u[0] = u[0];
        best_u[1] = u[1];
      }
    }
  }

  if (!(best_f < config.init_residual_tol * config.init_residual_tol)) {
    std::ostringstream msg;
    msg << "initial fit failed: best residual " << std::sqrt(best_f)
        << " (share scale) at mu=" << config.mu_lo + best_u[0] * mu_range
        << ", sigma2=" << config.sigma2_lo + best_u[1] * s2_range
        << " within bounds mu in [" << config.mu_lo << "," << config.mu_hi
        << "], sigma2 in [" << config.sigma2_lo << "," << config.sigma2_hi
        << "]";
    throw FitError(msg.str());
  }
  return {config.mu_lo + best_u[0] * mu_range,
          config.sigma2_lo + best_u[1] * s2_range};
}

YearStepResult fit_year_step(std::vector<double>& ensemble,
                             double observed_share_next, double r_hat,
                             double mu_start, double sigma2_start,
                             const FitConfig& config,
                             std::uint64_t step_seed) {
  if (ensemble.empty()) throw DomainError("fit_year_step: empty ensemble");
  for (double x : ensemble)
    if (!(x > 0.0))
      throw DomainError("fit_year_step: incomes must be positive");
  if (!(observed_share_next > 0.0 && observed_share_next < 1.0))
    throw DomainError("fit_year_step: observed share outside (0,1)");

  const std::size_t n = ensemble.size();
  const std::int64_t steps = std::llround(1.0 / config.dt);
  const double mu_range = config.mu_hi - config.mu_lo;
  const double s2_range = config.sigma2_hi - config.sigma2_lo;

  std::vector<double> work(n);
  // All candidates replay the same per-worker noise: common random numbers
  // keep the objective deterministic in (mu, sigma2).
  auto propagate = [&](double mu, double sigma2, std::vector<double>& state) {
    const SrgbmParams p{mu, sigma2, r_hat, config.x_r};
    const sim::StepKernel kernel(p, config.dt);
    rng::EnsembleRng streams(step_seed, rng::Stream::fit_year, 0, n);
    parallel_for(n, config.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        auto& rng = streams.worker(i);
        double x = state[i];
        for (std::int64_t s = 0; s < steps; ++s) kernel(x, rng);
        state[i] = x;
      }
    });
  };

  auto objective = [&](double u0, double u1) {
    work = ensemble;
    propagate(config.mu_lo + u0 * mu_range, config.sigma2_lo + u1 * s2_range,
              work);
    const double share = sample_top_share(work, 0.01);
    const double d = share - observed_share_next;
    return d * d;
  };

  double u[2] = {
      std::clamp((mu_start - config.mu_lo) / mu_range, 0.0, 1.0),
      std::clamp((sigma2_start - config.sigma2_lo) / s2_range, 0.0, 1.0)};
  double f_best = 0.0;
  int evals = 0;
  // Local tracker: a small initial step keeps the fit anchored to the warm
  // start unless the observation pulls it away.
  pattern_search_2d(objective, u, f_best, 1.0 / 16.0, config.step_tol,
                    config.max_evals_per_year, &evals);

  YearStepResult result;
  result.mu_hat = config.mu_lo + u[0] * mu_range;
  result.sigma2_hat = config.sigma2_lo + u[1] * s2_range;
  result.objective = f_best;
  result.budget_exhausted = evals >= config.max_evals_per_year;

  // Advance the caller's ensemble with the winning parameters.
  propagate(result.mu_hat, result.sigma2_hat, ensemble);
  return result;
}

ParamSeries fit_series(const ObservedSeries& series, const FitConfig& config) {
  validate(series);
  if (config.reps < 2)
    throw DomainError("fit_series: need reps >= 2 for standard errors");

  const auto [mu0, sigma20] = fit_initial(series, config);
  const std::size_t n_years = series.size();

  std::vector<RepOutcome> outcomes(config.reps);
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  // One repetition per task; repetitions are independent by seed.
  parallel_for(config.reps, config.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t rep = lo; rep < hi; ++rep) {
      try {
        FitConfig rep_cfg = config;
        rep_cfg.threads = 1;  // parallelism lives at the repetition level
        outcomes[rep] = run_repetition(series, rep_cfg, mu0, sigma20,
                                       static_cast<int>(rep));
      } catch (const Error& e) {
        const std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back(e.what());
      }
    }
  });

  ParamSeries out;
  out.years = series.years;
  out.x_r = config.x_r;
  out.r_hat = series.reset_rate;
  out.r_se.assign(n_years, 0.0);
  out.mu_hat.assign(n_years, 0.0);
  out.mu_se.assign(n_years, 0.0);
  out.sigma2_hat.assign(n_years, 0.0);
  out.sigma2_se.assign(n_years, 0.0);

  int ok = 0;
  for (const auto& o : outcomes) ok += o.ok ? 1 : 0;
  out.reps_succeeded = ok;
  out.reps_failed = config.reps - ok;
  if (ok < (config.reps + 1) / 2) {
    std::string detail = failures.empty() ? "" : ("; first: " + failures[0]);
    throw FitError("fit_series: " + std::to_string(out.reps_failed) + " of " +
                   std::to_string(config.reps) + " repetitions failed" +
                   detail);
  }

  for (std::size_t y = 0; y < n_years; ++y) {
    double mu_sum = 0.0, s2_sum = 0.0;
    for (const auto& o : outcomes)
      if (o.ok) {
        mu_sum += o.mu[y];
        s2_sum += o.sigma2[y];
      }
    const double mu_mean = mu_sum / ok;
    const double s2_mean = s2_sum / ok;
    double mu_ss = 0.0, s2_ss = 0.0;
    for (const auto& o : outcomes)
      if (o.ok) {
        mu_ss += (o.mu[y] - mu_mean) * (o.mu[y] - mu_mean);
        s2_ss += (o.sigma2[y] - s2_mean) * (o.sigma2[y] - s2_mean);
      }
    out.mu_hat[y] = mu_mean;
    out.sigma2_hat[y] = s2_mean;
    out.mu_se[y] = ok > 1 ? std::sqrt(mu_ss / (ok - 1) / ok) : 0.0;
    out.sigma2_se[y] = ok > 1 ? std::sqrt(s2_ss / (ok - 1) / ok) : 0.0;
  }
  return out;
}

double percentile_to_income(const SrgbmParams& params, double percentile) {
  return StationaryDistribution(params).quantile(percentile);
}

double midpoint_percentile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("midpoint_percentile: p must lie in (0, 1)");
  const int decile = std::clamp(static_cast<int>(std::ceil(p * 10.0)), 1, 10);
  return (decile - 0.5) / 10.0;
}

namespace {

struct MfptDrawStats {
  double sd = 0.0;
  int excluded = 0;
};

MfptDrawStats parameter_draw_sd(const ParamSeries& ps, std::size_t year,
                                double start_pct, double target_pct,
                                StartPosition position, const CiConfig& ci) {
  MfptDrawStats stats;
  std::vector<double> values;
  values.reserve(ci.draws);
  rng::WorkerRng rng(ci.seed, rng::Stream::ci_draw, year);
  for (int d = 0; d < ci.draws; ++d) {
    const double mu = ps.mu_hat[year] + ps.mu_se[year] * rng.gauss();
    const double s2 = ps.sigma2_hat[year] + ps.sigma2_se[year] * rng.gauss();
    const double r = ps.r_hat[year] + ps.r_se[year] * rng.gauss();
    try {
      const SrgbmParams p{mu, s2, r, ps.x_r};
      const StationaryDistribution stat(p);
      const double sp = position == StartPosition::midpoint
                            ? midpoint_percentile(start_pct)
                            : start_pct;
      const double x0 = stat.quantile(sp);
      const double y = stat.quantile(target_pct);
      if (x0 >= y) {
        values.push_back(0.0);
        continue;
      }
      values.push_back(analytics::mfpt({x0, y}, p));
    } catch (const Error&) {
      ++stats.excluded;
    }
  }
  if (values.size() > 1) {
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    stats.sd = std::sqrt(ss / (values.size() - 1));
  }
  return stats;
}

}  // namespace

std::vector<SeriesPoint> mfpt_series(const ParamSeries& params,
                                     double start_percentile,
                                     double target_percentile,
                                     StartPosition start_position,
                                     const CiConfig& ci) {
  if (!(start_percentile > 0.0 && start_percentile < 1.0) ||
      !(target_percentile > 0.0 && target_percentile < 1.0))
    throw DomainError("mfpt_series: percentiles must lie in (0, 1)");
  if (start_percentile > target_percentile)
    throw DomainError("mfpt_series: start percentile must not exceed target");

  std::vector<SeriesPoint> out;
  out.reserve(params.size());
  for (std::size_t y = 0; y < params.size(); ++y) {
    SeriesPoint pt;
    pt.year = params.years[y];
    if (start_percentile == target_percentile) {
      out.push_back(pt);  // already at the target: zero with a zero band
      continue;
    }
    const SrgbmParams p = params.params_at(y);
    const StationaryDistribution stat(p);
    const double sp = start_position == StartPosition::midpoint
                          ? midpoint_percentile(start_percentile)
                          : start_percentile;
    const double x0 = stat.quantile(sp);
    const double target_y = stat.quantile(target_percentile);
    pt.value = x0 >= target_y ? 0.0 : analytics::mfpt({x0, target_y}, p);

    double band = 0.0;
    if (ci.use_delta_method) {
      auto eval = [&](double mu, double s2) {
        const SrgbmParams q{mu, s2, p.r, p.x_r};
        const StationaryDistribution st(q);
        const double a = st.quantile(sp), b = st.quantile(target_percentile);
        return a >= b ? 0.0 : analytics::mfpt({a, b}, q);
      };
      const double h_mu = std::max(1e-6, 1e-3 * std::abs(p.mu));
      const double h_s2 = std::max(1e-7, 1e-3 * p.sigma2);
      const double g_mu = (eval(p.mu + h_mu, p.sigma2) -
                           eval(p.mu - h_mu, p.sigma2)) /
                          (2.0 * h_mu);
      const double g_s2 = (eval(p.mu, p.sigma2 + h_s2) -
                           eval(p.mu, p.sigma2 - h_s2)) /
                          (2.0 * h_s2);
      band = ci.z * std::sqrt(g_mu * g_mu * params.mu_se[y] * params.mu_se[y] +
                              g_s2 * g_s2 * params.sigma2_se[y] *
                                  params.sigma2_se[y]);
    } else {
      const auto stats = parameter_draw_sd(params, y, start_percentile,
                                           target_percentile, start_position,
                                           ci);
      band = ci.z * stats.sd;
      pt.n_excluded = stats.excluded;
    }
    pt.lo = std::max(0.0, pt.value - band);
    pt.hi = pt.value + band;
    out.push_back(pt);
  }
  return out;
}

std::vector<SeriesPoint> fraction_series(const ParamSeries& params,
                                         double start_percentile,
                                         double target_percentile,
                                         double window_years,
                                         const FractionSeriesConfig& config) {
  if (window_years < 0.0)
    throw DomainError("fraction_series: window must be >= 0");
  std::vector<SeriesPoint> out;
  out.reserve(params.size());
  for (std::size_t y = 0; y < params.size(); ++y) {
    const SrgbmParams p = params.params_at(y);
    const StationaryDistribution stat(p);
    const double x0 = stat.quantile(midpoint_percentile(start_percentile));
    const double target = stat.quantile(target_percentile);

    SeriesPoint pt;
    pt.year = params.years[y];
    if (window_years == 0.0) {
      pt.value = x0 >= target ? 1.0 : 0.0;
      out.push_back(pt);
      continue;
    }
    sim::SimConfig sc;
    sc.dt = config.dt;
    sc.n_trajectories = config.n_trajectories;
    sc.horizon = window_years;
    // Seed depends on the year only: windows and targets share trajectories.
    sc.seed = config.seed ^ rng::stream_id(rng::Stream::fraction_worker, y);
    const auto res =
        sim::fraction_reaching({x0, target}, p, window_years, sc,
                               config.threads);
    pt.value = res.fraction;
    pt.lo = std::max(0.0, res.fraction - 2.0 * res.se);
    pt.hi = std::min(1.0, res.fraction + 2.0 * res.se);
    out.push_back(pt);
  }
  return out;
}

std::vector<std::pair<double, double>> default_percentile_queries() {
  // Ten levels -> C(10,2) = 45 ordered start < target pairs.
  const std::vector<double> levels = {0.10, 0.20, 0.30, 0.40, 0.50,
                                      0.60, 0.70, 0.80, 0.90, 0.99};
  std::vector<std::pair<double, double>> queries;
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = i + 1; j < levels.size(); ++j)
      queries.emplace_back(levels[i], levels[j]);
  return queries;
}

std::vector<OptimalRateRow> optimal_rate_series(
    const ParamSeries& params,
    const std::vector<std::pair<double, double>>& queries, double r_max) {
  if (queries.empty())
    throw DomainError("optimal_rate_series: query set must be non-empty");
  std::vector<OptimalRateRow> out;
  out.reserve(params.size());
  for (std::size_t y = 0; y < params.size(); ++y) {
    const SrgbmParams p = params.params_at(y);
    const StationaryDistribution stat(p);
    OptimalRateRow row;
    row.year = params.years[y];
    row.r_hat = params.r_hat[y];
    row.min_r_star = std::numeric_limits<double>::infinity();
    row.max_r_star = 0.0;
    double sum = 0.0;
    for (const auto& [sp, tp] : queries) {
      if (!(sp < tp))
        throw DomainError("optimal_rate_series: need start < target");
      const double x0 = stat.quantile(sp);
      const double target = stat.quantile(tp);
      const auto res = analytics::optimal_resetting_rate(
          {x0, target}, p.mu, p.sigma2, p.x_r, r_max);
      sum += res.r_star;
      row.min_r_star = std::min(row.min_r_star, res.r_star);
      row.max_r_star = std::max(row.max_r_star, res.r_star);
    }
    row.mean_r_star = sum / static_cast<double>(queries.size());
    const double diff = row.r_hat - row.mean_r_star;
    row.sign = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
    out.push_back(row);
  }
  return out;
}

}  // namespace srgbm::estimation
