// srgbm: analytic and Monte Carlo first-passage statistics for income
// dynamics under multiplicative growth with stochastic resetting, plus the
// transition-matrix pipeline and year-by-year parameter estimation.
//
// Every artifact carries a '# key=value' metadata header (version, the
// reconstructed command line, seed, parameters). Results are independent of
// --threads; wall_clock_s is the only header field expected to change
// between reruns of the same command.
#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "srgbm/analytics.hpp"
#include "srgbm/estimation.hpp"
#include "srgbm/io.hpp"
#include "srgbm/markov.hpp"
#include "srgbm/simulator.hpp"
#include "srgbm/version.hpp"

namespace {

using namespace srgbm;
namespace fs = std::filesystem;

struct CommonOpts {
  std::string out_dir;
  std::string format = "csv";
  std::uint64_t seed = 12345;
  int threads = 0;
};

std::vector<std::string> g_argv;  // for the metadata header

std::string reconstruct_argv() {
  // --threads is an execution detail with no effect on results; keep it out
  // of the header so reruns under different parallelism compare equal.
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 1; i < g_argv.size(); ++i) {
    const std::string& a = g_argv[i];
    if (a == "--threads" || a == "-t") {
      ++i;  // skip its value
      continue;
    }
    if (a.rfind("--threads=", 0) == 0) continue;
    os << (first ? "" : " ") << a;
    first = false;
  }
  return os.str();
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

io::Metadata base_metadata(const std::string& command,
                           const CommonOpts& common) {
  io::Metadata meta;
  meta.set("version", kVersion);
  meta.set("command", command);
  meta.set("argv", reconstruct_argv());
  meta.set("seed", common.seed);
  meta.set("format", common.format);
  return meta;
}

fs::path out_path(const CommonOpts& common, const std::string& stem) {
  return fs::path(common.out_dir) / (stem + "." + common.format);
}

void emit(const CommonOpts& common, io::Metadata meta, const io::Table& table,
          const std::string& stem, const Timer& timer) {
  meta.set("wall_clock_s", timer.seconds());
  io::write_table(out_path(common, stem), meta,
                  table, io::format_from_string(common.format));
  std::cout << "wrote " << out_path(common, stem).string() << "\n";
}

void add_common(CLI::App* cmd, CommonOpts& common) {
  const char* env_out = std::getenv("SRGBM_OUT");
  common.out_dir = env_out ? env_out : ".";
  cmd->add_option("--out", common.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--format", common.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd->add_option("--seed", common.seed, "random seed recorded in artifacts")
      ->capture_default_str();
  cmd->add_option("--threads,-t", common.threads,
                  "worker threads (0 = all cores); never changes results");
}

struct ParamOpts {
  double mu = 0.10;
  double sigma2 = 0.03;
  double r = 0.041;
  double x_r = 1.0;

  SrgbmParams params() const { return {mu, sigma2, r, x_r}; }
};

void add_params(CLI::App* cmd, ParamOpts& p, bool with_r = true) {
  cmd->add_option("--mu", p.mu, "drift rate (1/year)")->capture_default_str();
  cmd->add_option("--sigma2", p.sigma2, "variance rate (1/year)")
      ->capture_default_str();
  if (with_r)
    cmd->add_option("--r", p.r, "resetting rate (1/year)")
        ->capture_default_str();
  cmd->add_option("--xr", p.x_r, "reset income")->capture_default_str();
}

void set_param_metadata(io::Metadata& meta, const SrgbmParams& p) {
  meta.set("mu", p.mu);
  meta.set("sigma2", p.sigma2);
  meta.set("r", p.r);
  meta.set("x_r", p.x_r);
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw ValidationError("empty list: '" + csv + "'");
  return out;
}

// ---------------------------------------------------------------------------

struct MfptCmd {
  CommonOpts common;
  ParamOpts p;
  double x0 = 1.0, y = 10.0;
  std::string r_grid;  // "lo:hi:n" emits an MFPT-vs-r curve table

  void run() const {
    Timer timer;
    io::Metadata meta = base_metadata("mfpt", common);
    set_param_metadata(meta, p.params());
    meta.set("x0", x0);
    meta.set("y", y);

    io::Table table;
    if (r_grid.empty()) {
      table.columns = {"x0", "y", "mfpt_years"};
      table.rows = {{x0, y, analytics::mfpt({x0, y}, p.params())}};
    } else {
      double lo = 0.0, hi = 0.0;
      int n = 0;
      if (std::sscanf(r_grid.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 ||
          !(lo > 0.0) || !(hi > lo) || n < 2)
        throw ValidationError("--r-grid expects lo:hi:n with 0 < lo < hi");
      meta.set("r_grid", r_grid);
      table.columns = {"r", "mfpt_years"};
      for (int i = 0; i < n; ++i) {
        SrgbmParams params = p.params();
        params.r = lo + (hi - lo) * i / (n - 1);
        table.rows.push_back({params.r, analytics::mfpt({x0, y}, params)});
      }
    }
    emit(common, meta, table, "mfpt", timer);
  }
};

struct SimulateCmd {
  CommonOpts common;
  ParamOpts p;
  double x0 = 1.0, y = 10.0;
  double dt = 1e-3;
  std::int64_t n = 10000;
  double horizon = 1000.0;
  double max_censored = 0.01;

  void run() const {
    Timer timer;
    sim::SimConfig cfg{dt, n, horizon, common.seed, 0};
    const auto samples =
        sim::sample_fpt({x0, y}, p.params(), cfg, common.threads);
    const auto est = sim::estimate_mfpt_mc(samples, max_censored);

    io::Metadata meta = base_metadata("simulate", common);
    set_param_metadata(meta, p.params());
    meta.set("x0", x0);
    meta.set("y", y);
    meta.set("dt", dt);
    meta.set("n_trajectories", n);
    meta.set("horizon", horizon);
    meta.set("n_censored", samples.n_censored);
    meta.set("degenerate", std::int64_t{samples.degenerate ? 1 : 0});

    io::Table samples_table;
    samples_table.columns = {"hitting_time_years"};
    for (double t : samples.hitting_times) samples_table.rows.push_back({t});
    emit(common, meta, samples_table, "fpt_samples", timer);

    double analytic = std::numeric_limits<double>::quiet_NaN();
    try {
      analytic = analytics::mfpt({x0, y}, p.params());
    } catch (const Error&) {
      // divergent closed form: report the MC side alone
    }
    io::Table summary;
    summary.columns = {"mc_mfpt_years", "mc_se_years", "censored_fraction",
                       "n_used", "analytic_mfpt_years"};
    summary.rows = {{est.mean, est.se, est.censored_fraction,
                     static_cast<double>(est.n_used), analytic}};
    emit(common, meta, summary, "simulate_summary", timer);
  }
};

struct FractionCmd {
  CommonOpts common;
  ParamOpts p;
  double x0 = 1.0, y = 10.0;
  double window = 20.0;
  double dt = 1e-2;
  std::int64_t n = 20000;

  void run() const {
    Timer timer;
    sim::SimConfig cfg{dt, n, std::max(window, dt), common.seed, 0};
    const auto res = sim::fraction_reaching({x0, y}, p.params(), window, cfg,
                                            common.threads);
    io::Metadata meta = base_metadata("fraction", common);
    set_param_metadata(meta, p.params());
    meta.set("x0", x0);
    meta.set("y", y);
    meta.set("window_years", window);
    meta.set("dt", dt);
    meta.set("n_trajectories", n);

    io::Table table;
    table.columns = {"window_years", "fraction", "se", "n_hit", "n_total"};
    table.rows = {{window, res.fraction, res.se,
                   static_cast<double>(res.n_hit),
                   static_cast<double>(res.n_total)}};
    emit(common, meta, table, "fraction", timer);
  }
};

struct OptimalRateCmd {
  CommonOpts common;
  ParamOpts p;  // r unused in the search
  double x0 = 1.0, y = 10.0;
  double r_max = 1.0;

  void run() const {
    Timer timer;
    const auto res = analytics::optimal_resetting_rate({x0, y}, p.mu,
                                                       p.sigma2, p.x_r, r_max);
    io::Metadata meta = base_metadata("optimal-rate", common);
    meta.set("mu", p.mu);
    meta.set("sigma2", p.sigma2);
    meta.set("x_r", p.x_r);
    meta.set("x0", x0);
    meta.set("y", y);
    meta.set("r_max", r_max);

    io::Table table;
    table.columns = {"r_star", "mfpt_years", "interior"};
    table.rows = {{res.r_star, res.mfpt_min, res.interior ? 1.0 : 0.0}};
    emit(common, meta, table, "optimal_rate", timer);
  }
};

struct TmatrixCmd {
  CommonOpts common;
  ParamOpts p;
  std::string panel_path;  // alternative input: existing panel
  std::int64_t n_workers = 100000;
  double delta = 10.0;
  double burn_in = 0.0;
  double dt = 0.01;
  int k = 10;
  std::string start = "stationary";
  bool save_panel = false;

  void run() const {
    Timer timer;
    io::Metadata meta = base_metadata("tmatrix", common);

    sim::IncomePanel panel;
    if (!panel_path.empty()) {
      panel = io::load_panel(panel_path);
      meta.set("panel", panel_path);
    } else {
      set_param_metadata(meta, p.params());
      meta.set("n_workers", n_workers);
      meta.set("delta", delta);
      meta.set("burn_in", burn_in);
      meta.set("dt", dt);
      meta.set("start", start);
      sim::SimConfig cfg{dt, n_workers, std::max(burn_in + delta, dt),
                         common.seed, 0};
      const auto mode = start == "reset" ? sim::PanelStart::fixed_at_reset
                                         : sim::PanelStart::stationary_draw;
      panel = sim::generate_panel(p.params(), n_workers, burn_in, delta, cfg,
                                  common.threads, mode);
      if (save_panel) {
        io::Metadata pm = meta;
        pm.set("wall_clock_s", timer.seconds());
        io::save_panel(out_path(common, "panel"), panel, pm,
                       io::format_from_string(common.format));
        std::cout << "wrote " << out_path(common, "panel").string() << "\n";
      }
    }

    const auto matrix = markov::transition_matrix(panel, k);
    meta.set("k", std::int64_t{k});
    meta.set("wall_clock_s", timer.seconds());
    io::save_matrix(out_path(common, "tmatrix"), matrix, meta,
                    io::format_from_string(common.format));
    std::cout << "wrote " << out_path(common, "tmatrix").string() << "\n";
  }
};

struct TmfptCmd {
  CommonOpts common;
  std::string matrix_path;
  bool renormalize = false;
  std::string variant = "diagonal";

  void run() const {
    Timer timer;
    const auto matrix = io::load_matrix(matrix_path, renormalize);
    io::Metadata meta = base_metadata("tmfpt", common);
    meta.set("matrix", matrix_path);
    meta.set("delta", matrix.delta());
    meta.set("k", std::int64_t(matrix.size()));
    meta.set("variant", variant);

    // Generator artifact honors --variant; the MFPT pipeline always uses
    // the diagonal construction (the entrywise form is generally not a
    // valid generator and is emitted for inspection only).
    const auto gen = markov::generator_matrix(
        matrix, markov::generator_variant_from_string(variant));
    if (!gen.valid())
      std::cerr << "warning: " << variant
                << " generator is not a valid rate matrix (max |row sum| = "
                << gen.max_abs_row_sum << ")\n";
    io::Table gen_table;
    gen_table.columns.push_back("from");
    for (std::size_t j = 0; j < matrix.size(); ++j)
      gen_table.columns.push_back("to_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      std::vector<double> row{static_cast<double>(i + 1)};
      for (std::size_t j = 0; j < matrix.size(); ++j)
        row.push_back(gen.entries(i, j));
      gen_table.rows.push_back(std::move(row));
    }
    io::Metadata gen_meta = meta;
    gen_meta.set("valid_generator", std::int64_t{gen.valid() ? 1 : 0});
    gen_meta.set("max_abs_row_sum", gen.max_abs_row_sum);
    emit(common, gen_meta, gen_table, "generator", timer);

    const auto discrete = markov::tmfpt(matrix);
    const auto continuous = markov::tmfpt_continuous(matrix);
    const auto jump = markov::tmfpt_continuous_jump(matrix);

    io::Table table;
    table.columns = {"from", "to", "tmfpt_periods", "tmfpt_years",
                     "tmfpt_years_jump"};
    for (std::size_t i = 0; i < matrix.size(); ++i)
      for (std::size_t j = 0; j < matrix.size(); ++j)
        table.rows.push_back({static_cast<double>(i + 1),
                              static_cast<double>(j + 1),
                              discrete.entries(i, j),
                              continuous.entries(i, j),
                              jump.entries(i, j)});
    emit(common, meta, table, "tmfpt", timer);
  }
};

struct FitMatrixCmd {
  CommonOpts common;
  std::string matrix_path;
  bool renormalize = false;
  markov::FitBounds bounds;
  std::int64_t n_workers = 50000;
  double dt = 0.02;
  int max_evals = 400;

  void run() const {
    Timer timer;
    const auto matrix = io::load_matrix(matrix_path, renormalize);
    markov::MatrixFitConfig cfg;
    cfg.n_workers = n_workers;
    cfg.dt = dt;
    cfg.seed = common.seed;
    cfg.max_evals = max_evals;
    cfg.threads = common.threads;
    const auto fit = markov::fit_srgbm_to_matrix(matrix, bounds, cfg);

    io::Metadata meta = base_metadata("fit-matrix", common);
    meta.set("matrix", matrix_path);
    meta.set("n_workers", n_workers);
    meta.set("dt", dt);
    meta.set("max_evals", std::int64_t{max_evals});

    io::Table table;
    table.columns = {"mu", "sigma2", "r", "frobenius", "explained_variance",
                     "n_evals", "converged", "resolution_mu",
                     "resolution_sigma2", "resolution_r"};
    table.rows = {{fit.params.mu, fit.params.sigma2, fit.params.r,
                   fit.frobenius, fit.explained_variance,
                   static_cast<double>(fit.n_evals),
                   fit.converged ? 1.0 : 0.0, fit.resolution_mu,
                   fit.resolution_sigma2, fit.resolution_r}};
    emit(common, meta, table, "fit_matrix", timer);
  }
};

struct FitSeriesCmd {
  CommonOpts common;
  std::string series_path;
  std::int64_t n_workers = 100000;
  int reps = 20;
  double dt = 0.01;
  double start_pct = 0.10;
  std::string targets = "0.5,0.75,0.9,0.95,0.99";
  std::string windows = "20,40";
  std::string position = "midpoint";
  double r_max = 1.0;
  std::int64_t fraction_n = 20000;
  int ci_draws = 200;
  bool skip_optimal = false;

  void run() const {
    Timer timer;
    const auto series = io::load_observed_series(series_path);
    estimation::FitConfig cfg;
    cfg.n_workers = n_workers;
    cfg.reps = reps;
    cfg.dt = dt;
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    const auto ps = estimation::fit_series(series, cfg);

    io::Metadata meta = base_metadata("fit-series", common);
    meta.set("series", series_path);
    meta.set("n_workers", n_workers);
    meta.set("reps", std::int64_t{reps});
    meta.set("dt", dt);
    meta.set("reps_succeeded", std::int64_t{ps.reps_succeeded});
    meta.set("reps_failed", std::int64_t{ps.reps_failed});

    io::Table params_table;
    params_table.columns = {"year",       "mu_hat",  "mu_se", "sigma2_hat",
                            "sigma2_se",  "r_hat",   "r_se"};
    for (std::size_t y = 0; y < ps.size(); ++y)
      params_table.rows.push_back({static_cast<double>(ps.years[y]),
                                   ps.mu_hat[y], ps.mu_se[y],
                                   ps.sigma2_hat[y], ps.sigma2_se[y],
                                   ps.r_hat[y], ps.r_se[y]});
    emit(common, meta, params_table, "param_series", timer);

    const auto target_list = parse_list(targets);
    const auto pos = position == "threshold"
                         ? estimation::StartPosition::threshold
                         : estimation::StartPosition::midpoint;
    estimation::CiConfig ci;
    ci.draws = ci_draws;
    ci.seed = common.seed + 1;

    io::Table mfpt_table;
    mfpt_table.columns = {"year", "target_pct", "mfpt_years", "lo", "hi",
                          "n_excluded"};
    for (double target : target_list) {
      const auto pts =
          estimation::mfpt_series(ps, start_pct, target, pos, ci);
      for (const auto& pt : pts)
        mfpt_table.rows.push_back({static_cast<double>(pt.year), target,
                                   pt.value, pt.lo, pt.hi,
                                   static_cast<double>(pt.n_excluded)});
    }
    emit(common, meta, mfpt_table, "mfpt_series", timer);

    estimation::FractionSeriesConfig fcfg;
    fcfg.n_trajectories = fraction_n;
    fcfg.dt = dt;
    fcfg.seed = common.seed + 2;
    fcfg.threads = common.threads;
    io::Table fraction_table;
    fraction_table.columns = {"year", "target_pct", "window_years",
                              "fraction", "lo", "hi"};
    for (double window : parse_list(windows)) {
      for (double target : target_list) {
        const auto pts = estimation::fraction_series(ps, start_pct, target,
                                                     window, fcfg);
        for (const auto& pt : pts)
          fraction_table.rows.push_back({static_cast<double>(pt.year), target,
                                         window, pt.value, pt.lo, pt.hi});
      }
    }
    emit(common, meta, fraction_table, "fraction_series", timer);

    if (!skip_optimal) {
      const auto rows = estimation::optimal_rate_series(
          ps, estimation::default_percentile_queries(), r_max);
      io::Table rate_table;
      rate_table.columns = {"year", "mean_r_star", "min_r_star", "max_r_star",
                            "r_hat", "sign"};
      for (const auto& row : rows)
        rate_table.rows.push_back({static_cast<double>(row.year),
                                   row.mean_r_star, row.min_r_star,
                                   row.max_r_star, row.r_hat,
                                   static_cast<double>(row.sign)});
      emit(common, meta, rate_table, "optimal_rate_series", timer);
    }
  }
};

struct GapReportCmd {
  CommonOpts common;
  ParamOpts p;
  int k = 10;
  double delta = 10.0;
  std::int64_t n_workers = 100000;
  double dt = 0.01;

  void run() const {
    Timer timer;
    markov::GapReportConfig cfg;
    cfg.n_workers = n_workers;
    cfg.dt = dt;
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    const auto rows = markov::mfpt_gap_report(p.params(), k, delta, cfg);

    io::Metadata meta = base_metadata("gap-report", common);
    set_param_metadata(meta, p.params());
    meta.set("k", std::int64_t{k});
    meta.set("delta", delta);
    meta.set("n_workers", n_workers);
    meta.set("dt", dt);

    io::Table table;
    table.columns = {"from", "to", "srgbm_mfpt_years", "tmfpt_years",
                     "difference"};
    for (const auto& row : rows)
      table.rows.push_back({static_cast<double>(row.from_q),
                            static_cast<double>(row.to_q),
                            row.srgbm_mfpt_years, row.tmfpt_years,
                            row.difference});
    emit(common, meta, table, "gap_report", timer);
  }
};

int classify_exit(const Error& e) {
  if (dynamic_cast<const FitError*>(&e)) return 4;
  if (dynamic_cast<const DivergenceError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const DomainError*>(&e)) return 2;
  return 2;
}

const char* classify_name(const Error& e) {
  if (dynamic_cast<const FitError*>(&e)) return "FitError";
  if (dynamic_cast<const CensoringError*>(&e)) return "CensoringError";
  if (dynamic_cast<const DivergenceError*>(&e)) return "DivergenceError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  return "Error";
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);

  CLI::App app{"first-passage statistics of income dynamics under "
               "multiplicative growth with stochastic resetting"};
  app.require_subcommand(1);

  MfptCmd mfpt_cmd;
  auto* mfpt = app.add_subcommand(
      "mfpt", "closed-form mean first passage time (optionally over an "
              "r-grid curve)");
  add_common(mfpt, mfpt_cmd.common);
  add_params(mfpt, mfpt_cmd.p);
  mfpt->add_option("--x0", mfpt_cmd.x0, "starting income")
      ->capture_default_str();
  mfpt->add_option("--y", mfpt_cmd.y, "target income")->capture_default_str();
  mfpt->add_option("--r-grid", mfpt_cmd.r_grid,
                   "lo:hi:n resetting-rate grid for a curve table");

  SimulateCmd sim_cmd;
  auto* simulate = app.add_subcommand(
      "simulate", "Monte Carlo first-passage sampling and MFPT estimate");
  add_common(simulate, sim_cmd.common);
  add_params(simulate, sim_cmd.p);
  simulate->add_option("--x0", sim_cmd.x0, "starting income")
      ->capture_default_str();
  simulate->add_option("--y", sim_cmd.y, "target income")
      ->capture_default_str();
  simulate->add_option("--dt", sim_cmd.dt, "time step (years)")
      ->capture_default_str();
  simulate->add_option("--n", sim_cmd.n, "number of trajectories")
      ->capture_default_str();
  simulate->add_option("--horizon", sim_cmd.horizon, "censoring time (years)")
      ->capture_default_str();
  simulate
      ->add_option("--max-censored", sim_cmd.max_censored,
                   "largest admissible censored fraction")
      ->capture_default_str();

  FractionCmd fraction_cmd;
  auto* fraction = app.add_subcommand(
      "fraction", "fraction of workers reaching the target within a window");
  add_common(fraction, fraction_cmd.common);
  add_params(fraction, fraction_cmd.p);
  fraction->add_option("--x0", fraction_cmd.x0, "starting income")
      ->capture_default_str();
  fraction->add_option("--y", fraction_cmd.y, "target income")
      ->capture_default_str();
  fraction->add_option("--window", fraction_cmd.window, "window (years)")
      ->capture_default_str();
  fraction->add_option("--dt", fraction_cmd.dt, "time step (years)")
      ->capture_default_str();
  fraction->add_option("--n", fraction_cmd.n, "number of trajectories")
      ->capture_default_str();

  OptimalRateCmd rate_cmd;
  auto* rate = app.add_subcommand(
      "optimal-rate", "resetting rate minimizing the MFPT for one query");
  add_common(rate, rate_cmd.common);
  add_params(rate, rate_cmd.p, /*with_r=*/false);
  rate->add_option("--x0", rate_cmd.x0, "starting income")
      ->capture_default_str();
  rate->add_option("--y", rate_cmd.y, "target income")->capture_default_str();
  rate->add_option("--r-max", rate_cmd.r_max, "upper search bound (1/year)")
      ->capture_default_str();

  TmatrixCmd tmatrix_cmd;
  auto* tmatrix = app.add_subcommand(
      "tmatrix", "decile transition matrix from a panel (given or simulated)");
  add_common(tmatrix, tmatrix_cmd.common);
  add_params(tmatrix, tmatrix_cmd.p);
  tmatrix->add_option("--panel", tmatrix_cmd.panel_path,
                      "existing panel CSV (worker_id,income_t0,income_t1)");
  tmatrix->add_option("--n-workers", tmatrix_cmd.n_workers, "panel size")
      ->capture_default_str();
  tmatrix->add_option("--delta", tmatrix_cmd.delta, "horizon (years)")
      ->capture_default_str();
  tmatrix->add_option("--burn-in", tmatrix_cmd.burn_in, "burn-in (years)")
      ->capture_default_str();
  tmatrix->add_option("--dt", tmatrix_cmd.dt, "time step (years)")
      ->capture_default_str();
  tmatrix->add_option("--k", tmatrix_cmd.k, "number of quantiles")
      ->capture_default_str();
  tmatrix
      ->add_option("--start", tmatrix_cmd.start,
                   "initial incomes: stationary or reset")
      ->check(CLI::IsMember({"stationary", "reset"}))
      ->capture_default_str();
  tmatrix->add_flag("--save-panel", tmatrix_cmd.save_panel,
                    "also write the generated panel");

  TmfptCmd tmfpt_cmd;
  auto* tmfpt = app.add_subcommand(
      "tmfpt", "first-passage times of a transition matrix (discrete steps "
               "and continuous-time years)");
  add_common(tmfpt, tmfpt_cmd.common);
  tmfpt->add_option("--matrix", tmfpt_cmd.matrix_path, "matrix CSV/JSON")
      ->required();
  tmfpt->add_flag("--renormalize", tmfpt_cmd.renormalize,
                  "rescale rows that do not sum to one");
  tmfpt
      ->add_option("--variant", tmfpt_cmd.variant,
                   "generator construction for the emitted generator "
                   "artifact: diagonal or entrywise")
      ->check(CLI::IsMember({"diagonal", "entrywise"}))
      ->capture_default_str();

  FitMatrixCmd fit_matrix_cmd;
  auto* fit_matrix = app.add_subcommand(
      "fit-matrix", "fit (mu, sigma2, r) to an observed transition matrix");
  add_common(fit_matrix, fit_matrix_cmd.common);
  fit_matrix
      ->add_option("--matrix", fit_matrix_cmd.matrix_path, "matrix CSV/JSON")
      ->required();
  fit_matrix->add_flag("--renormalize", fit_matrix_cmd.renormalize,
                       "rescale rows that do not sum to one");
  fit_matrix
      ->add_option("--n-workers", fit_matrix_cmd.n_workers,
                   "model panel size per evaluation")
      ->capture_default_str();
  fit_matrix->add_option("--dt", fit_matrix_cmd.dt, "time step (years)")
      ->capture_default_str();
  fit_matrix
      ->add_option("--max-evals", fit_matrix_cmd.max_evals,
                   "objective evaluation budget")
      ->capture_default_str();
  fit_matrix->add_option("--mu-lo", fit_matrix_cmd.bounds.mu_lo, "mu lower")
      ->capture_default_str();
  fit_matrix->add_option("--mu-hi", fit_matrix_cmd.bounds.mu_hi, "mu upper")
      ->capture_default_str();
  fit_matrix
      ->add_option("--sigma2-lo", fit_matrix_cmd.bounds.sigma2_lo,
                   "sigma2 lower")
      ->capture_default_str();
  fit_matrix
      ->add_option("--sigma2-hi", fit_matrix_cmd.bounds.sigma2_hi,
                   "sigma2 upper")
      ->capture_default_str();
  fit_matrix->add_option("--r-lo", fit_matrix_cmd.bounds.r_lo, "r lower")
      ->capture_default_str();
  fit_matrix->add_option("--r-hi", fit_matrix_cmd.bounds.r_hi, "r upper")
      ->capture_default_str();

  FitSeriesCmd fit_series_cmd;
  auto* fit_series = app.add_subcommand(
      "fit-series",
      "year-by-year parameter fit plus MFPT/fraction/optimal-rate reports");
  add_common(fit_series, fit_series_cmd.common);
  fit_series
      ->add_option("--series", fit_series_cmd.series_path,
                   "observed series CSV (year,top_share[,aux_share],"
                   "reset_rate)")
      ->required();
  fit_series
      ->add_option("--n-workers", fit_series_cmd.n_workers, "model economy "
                   "size")
      ->capture_default_str();
  fit_series->add_option("--reps", fit_series_cmd.reps,
                         "Monte Carlo repetitions")
      ->capture_default_str();
  fit_series->add_option("--dt", fit_series_cmd.dt, "time step (years)")
      ->capture_default_str();
  fit_series
      ->add_option("--start-pct", fit_series_cmd.start_pct,
                   "starting percentile for the reports")
      ->capture_default_str();
  fit_series
      ->add_option("--targets", fit_series_cmd.targets,
                   "comma-separated target percentiles")
      ->capture_default_str();
  fit_series
      ->add_option("--windows", fit_series_cmd.windows,
                   "comma-separated windows (years) for fraction reports")
      ->capture_default_str();
  fit_series
      ->add_option("--position", fit_series_cmd.position,
                   "start position: midpoint or threshold")
      ->check(CLI::IsMember({"midpoint", "threshold"}))
      ->capture_default_str();
  fit_series
      ->add_option("--r-max", fit_series_cmd.r_max,
                   "upper bound of the optimal-rate search")
      ->capture_default_str();
  fit_series
      ->add_option("--fraction-n", fit_series_cmd.fraction_n,
                   "trajectories per fraction estimate")
      ->capture_default_str();
  fit_series
      ->add_option("--ci-draws", fit_series_cmd.ci_draws,
                   "parameter draws per MFPT confidence band")
      ->capture_default_str();
  fit_series->add_flag("--skip-optimal", fit_series_cmd.skip_optimal,
                       "skip the optimal-rate report");

  GapReportCmd gap_cmd;
  auto* gap = app.add_subcommand(
      "gap-report", "closed-form vs transition-matrix MFPT between decile "
                    "midpoints");
  add_common(gap, gap_cmd.common);
  add_params(gap, gap_cmd.p);
  gap->add_option("--k", gap_cmd.k, "number of quantiles")
      ->capture_default_str();
  gap->add_option("--delta", gap_cmd.delta, "matrix horizon (years)")
      ->capture_default_str();
  gap->add_option("--n-workers", gap_cmd.n_workers, "panel size")
      ->capture_default_str();
  gap->add_option("--dt", gap_cmd.dt, "time step (years)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad usage is a validation error
  }

  try {
    if (*mfpt) mfpt_cmd.run();
    if (*simulate) sim_cmd.run();
    if (*fraction) fraction_cmd.run();
    if (*rate) rate_cmd.run();
    if (*tmatrix) tmatrix_cmd.run();
    if (*tmfpt) tmfpt_cmd.run();
    if (*fit_matrix) fit_matrix_cmd.run();
    if (*fit_series) fit_series_cmd.run();
    if (*gap) gap_cmd.run();
  } catch (const Error& e) {
    std::cerr << classify_name(e) << ": " << e.what() << "\n"
              << io::error_json(classify_name(e), e.what()) << "\n";
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << "\n"
              << io::error_json("Error", e.what()) << "\n";
    return 3;
  }
  return 0;
}
