#include "srgbm/markov.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "srgbm/analytics.hpp"

namespace srgbm::markov {

namespace {

using EMatrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

EMatrix to_eigen(const Matrix& m) {
  EMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

// Strongly connected components (iterative Tarjan) of the positive-entry
// digraph; used to report closed classes of reducible chains.
std::vector<std::vector<int>> strongly_connected_components(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int next_index = 0;

  struct Frame {
    int v;
    int next_child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call_stack{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call_stack.empty()) {
      auto& frame = call_stack.back();
      const int v = frame.v;
      bool descended = false;
      while (frame.next_child < n) {
        const int w = frame.next_child++;
        if (w == v || p(v, w) <= 0.0) continue;
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call_stack.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<int> comp;
        for (;;) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
          if (w == v) break;
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
      call_stack.pop_back();
      if (!call_stack.empty())
        low[call_stack.back().v] =
            std::min(low[call_stack.back().v], low[v]);
    }
  }
  return components;
}

void require_irreducible(const TransitionMatrix& p) {
  const auto components = strongly_connected_components(p.entries());
  if (components.size() <= 1) return;
  // Closed classes: SCCs with no edge leaving.
  std::ostringstream msg;
  msg << "chain is reducible; closed classes:";
  const auto& m = p.entries();
  for (const auto& comp : components) {
    bool closed = true;
    for (int v : comp) {
      for (std::size_t w = 0; w < m.cols(); ++w) {
        if (m(v, w) > 0.0 &&
            !std::binary_search(comp.begin(), comp.end(), (int)w)) {
          closed = false;
          break;
        }
      }
      if (!closed) break;
    }
    if (!closed) continue;
    msg << " {";
    for (std::size_t i = 0; i < comp.size(); ++i)
      msg << (i ? "," : "") << comp[i] + 1;
    msg << "}";
  }
  throw DomainError(msg.str());
}

std::vector<double> stationary_power_iteration(const Matrix& p, double tol) {
  const std::size_t n = p.rows();
  // Lazy chain (P + I)/2 shares the stationary vector and kills periodicity.
  std::vector<double> pi(n, 1.0 / n), next(n, 0.0);
  for (int iter = 0; iter < 200000; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.5 * pi[j];
      for (std::size_t i = 0; i < n; ++i) acc += 0.5 * pi[i] * p(i, j);
      next[j] = acc;
    }
    double norm = std::accumulate(next.begin(), next.end(), 0.0);
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= norm;
      diff = std::max(diff, std::abs(next[j] - pi[j]));
    }
    pi.swap(next);
    if (diff < tol) return pi;
  }
  throw NumericalError("stationary distribution: power iteration stalled");
}

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix entries, double delta,
                                   QuantileScheme scheme, double row_tol)
    : entries_(std::move(entries)), delta_(delta), scheme_(std::move(scheme)) {
  const std::size_t n = entries_.rows();
  if (n == 0 || entries_.cols() != n)
    throw ValidationError("transition matrix must be square and non-empty");
  if (delta_ < 0.0)
    throw ValidationError("transition matrix: delta must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = entries_(i, j);
      if (!std::isfinite(a) || a < 0.0 || a > 1.0 + 1e-12) {
        std::ostringstream msg;
        msg << "transition matrix entry (" << i + 1 << "," << j + 1
            << ") = " << a << " outside [0,1]";
        throw ValidationError(msg.str());
      }
      sum += a;
    }
    if (std::abs(sum - 1.0) > row_tol) {
      std::ostringstream msg;
      msg << "transition matrix row " << i + 1 << " sums to " << sum;
      throw ValidationError(msg.str());
    }
    for (std::size_t j = 0; j < n; ++j) entries_(i, j) /= sum;
  }
}

std::string to_string(GeneratorVariant v) {
  return v == GeneratorVariant::diagonal ? "diagonal" : "entrywise";
}

GeneratorVariant generator_variant_from_string(const std::string& name) {
  if (name == "diagonal") return GeneratorVariant::diagonal;
  if (name == "entrywise") return GeneratorVariant::entrywise;
  throw ValidationError("unknown generator variant: " + name);
}

std::vector<int> quantile_assign(std::span<const double> incomes, int k) {
  if (k < 2) throw DomainError("quantile_assign: need K >= 2");
  const std::size_t n = incomes.size();
  if (n < static_cast<std::size_t>(k))
    throw DomainError("quantile_assign: fewer workers than quantiles");
  for (double x : incomes)
    if (!(x > 0.0)) throw DomainError("quantile_assign: incomes must be > 0");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return incomes[a] < incomes[b];
  });
  std::vector<int> labels(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    labels[order[rank]] = static_cast<int>(rank * k / n) + 1;
  return labels;
}

TransitionMatrix transition_matrix(const sim::IncomePanel& panel, int k) {
  if (panel.snapshots.size() < 2)
    throw DomainError("transition_matrix: panel needs two snapshots");
  const auto& first = panel.snapshots.front().incomes;
  const auto& last = panel.snapshots.back().incomes;
  if (first.size() != last.size() ||
      first.size() != panel.worker_ids.size())
    throw DomainError("transition_matrix: snapshots are not aligned");

  const auto from = quantile_assign(first, k);
  const auto to = quantile_assign(last, k);
  Matrix counts(k, k, 0.0);
  for (std::size_t i = 0; i < from.size(); ++i)
    counts(from[i] - 1, to[i] - 1) += 1.0;
  for (int row = 0; row < k; ++row) {
    const double total = counts.row_sum(row);
    if (total <= 0.0)
      throw DomainError("transition_matrix: empty origin quantile");
    for (int col = 0; col < k; ++col) counts(row, col) /= total;
  }
  return TransitionMatrix(std::move(counts), panel.delta, QuantileScheme{k});
}

GeneratorMatrix generator_matrix(const TransitionMatrix& a,
                                 GeneratorVariant variant) {
  const auto& A = a.entries();
  const std::size_t n = a.size();
  GeneratorMatrix g;
  g.entries = Matrix(n, n, 0.0);
  g.delta = a.delta();
  g.variant = variant;

  for (std::size_t i = 0; i < n; ++i) {
    const double diag = A(i, i);
    if (diag <= 0.0)
      throw DomainError("generator_matrix: zero diagonal entry (row " +
                        std::to_string(i + 1) + ")");
    for (std::size_t j = 0; j < n; ++j) {
      const double a_ij = A(i, j);
      if (i == j) {
        g.entries(i, j) = std::log(diag);
      } else if (variant == GeneratorVariant::diagonal) {
        // A_kk = 1 forces a zero row (log(1) = 0 and no off-diagonal mass).
        g.entries(i, j) =
            diag == 1.0 ? 0.0 : a_ij * std::log(diag) / (diag - 1.0);
      } else {
        g.entries(i, j) =
            (a_ij == 0.0 || a_ij == 1.0)
                ? 0.0  // 0*ln(0) == 0 by convention
                : a_ij * std::log(a_ij) / (1.0 - a_ij);
      }
      if (i != j && g.entries(i, j) < 0.0) g.offdiag_nonnegative = false;
    }
    g.max_abs_row_sum =
        std::max(g.max_abs_row_sum, std::abs(g.entries.row_sum(i)));
  }
  return g;
}

TransitionMatrix embedded_chain(const GeneratorMatrix& q) {
  const auto& Q = q.entries;
  const std::size_t n = Q.rows();
  Matrix jump(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = Q(i, i);
    if (diag == 0.0)
      throw DomainError("embedded_chain: absorbing state (Q_kk = 0) at row " +
                        std::to_string(i + 1));
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) jump(i, j) = -Q(i, j) / diag;
  }
  // An invalid generator (entrywise variant) surfaces here as a row-sum
  // validation failure.
  return TransitionMatrix(std::move(jump), q.delta, QuantileScheme{(int)n},
                          1e-9);
}

std::vector<double> stationary_distribution(const TransitionMatrix& p) {
  require_irreducible(p);
  const std::size_t n = p.size();
  EMatrix m = to_eigen(p.entries()).transpose() - EMatrix::Identity(n, n);
  m.row(0).setOnes();
  EVector rhs = EVector::Zero(n);
  rhs(0) = 1.0;
  EVector pi = m.partialPivLu().solve(rhs);

  bool ok = pi.allFinite();
  if (ok)
    for (std::size_t i = 0; i < n; ++i)
      if (pi(i) <= 0.0) ok = false;
  if (ok) {
    // residual check of pi^T P = pi^T
    EVector res = to_eigen(p.entries()).transpose() * pi - pi;
    if (res.lpNorm<Eigen::Infinity>() > 1e-10) ok = false;
  }
  if (!ok) return stationary_power_iteration(p.entries(), 1e-12);

  pi /= pi.sum();
  return std::vector<double>(pi.data(), pi.data() + n);
}

MfptMatrix tmfpt(const TransitionMatrix& p) {
  const std::vector<double> pi = stationary_distribution(p);
  const std::size_t n = p.size();
  const EMatrix P = to_eigen(p.entries());
  EVector piv(n);
  for (std::size_t i = 0; i < n; ++i) piv(i) = pi[i];

  const EMatrix a =
      EMatrix::Identity(n, n) - P + EVector::Ones(n) * piv.transpose();
  Eigen::PartialPivLU<EMatrix> lu(a);
  const EMatrix z = lu.solve(EMatrix::Identity(n, n));
  if (!z.allFinite() ||
      (a * z - EMatrix::Identity(n, n)).lpNorm<Eigen::Infinity>() > 1e-8)
    throw NumericalError("tmfpt: fundamental matrix solve is ill-conditioned");

  MfptMatrix m;
  m.entries = Matrix(n, n, 0.0);
  m.unit = "periods";
  m.delta = p.delta();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l)
      m.entries(k, l) = (k == l) ? 0.0 : (z(l, l) - z(k, l)) / pi[l];
  return m;
}

namespace {

// First-passage times to each target state from the linear system
// sum_j Q_kj m_j = -1 over non-target states (delta-period units, scaled
// to years).
MfptMatrix solve_fpt_linear(const Matrix& q, double delta) {
  const std::size_t n = q.rows();
  MfptMatrix m;
  m.entries = Matrix(n, n, 0.0);
  m.unit = "years";
  m.delta = delta;
  const EMatrix Q = to_eigen(q);
  for (std::size_t target = 0; target < n; ++target) {
    EMatrix sub(n - 1, n - 1);
    EVector rhs = EVector::Constant(n - 1, -1.0);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == target) continue;
      std::size_t c = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == target) continue;
        sub(r, c++) = Q(i, j);
      }
      ++r;
    }
    const EVector sol = sub.partialPivLu().solve(rhs);
    if (!sol.allFinite())
      throw NumericalError("continuous MFPT solve failed (singular system)");
    r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == target) continue;
      m.entries(i, target) = sol(r++) * delta;
    }
  }
  return m;
}

}  // namespace

MfptMatrix tmfpt_continuous(const TransitionMatrix& a) {
  const GeneratorMatrix g = generator_matrix(a, GeneratorVariant::diagonal);
  const std::size_t n = g.entries.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (g.entries(i, i) == 0.0)
      throw NumericalError(
          "tmfpt_continuous: state with zero exit rate (A_kk = 1)");
  return solve_fpt_linear(g.entries, a.delta());
}

MfptMatrix tmfpt_continuous_jump(const TransitionMatrix& a) {
  const GeneratorMatrix g = generator_matrix(a, GeneratorVariant::diagonal);
  const TransitionMatrix jump = embedded_chain(g);
  const std::size_t n = g.entries.rows();

  // m_k = h_k + sum_{j != l} Jump_kj m_j with h_k = 1/|Q_kk|; rewrite as
  // (I - Jump_{-l}) m = h and solve per target.
  MfptMatrix m;
  m.entries = Matrix(n, n, 0.0);
  m.unit = "years";
  m.delta = a.delta();
  const EMatrix J = to_eigen(jump.entries());
  EVector h(n);
  for (std::size_t i = 0; i < n; ++i) h(i) = -1.0 / g.entries(i, i);

  for (std::size_t target = 0; target < n; ++target) {
    EMatrix sub(n - 1, n - 1);
    EVector rhs(n - 1);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == target) continue;
      std::size_t c = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == target) continue;
        sub(r, c) = (i == j ? 1.0 : 0.0) - J(i, j);
        ++c;
      }
      rhs(r++) = h(i);
    }
    const EVector sol = sub.partialPivLu().solve(rhs);
    if (!sol.allFinite())
      throw NumericalError("jump-chain MFPT solve failed");
    r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == target) continue;
      m.entries(i, target) = sol(r++) * a.delta();
    }
  }
  return m;
}

namespace {

struct PatternPoint {
  double u[3];
};

double frobenius_diff(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = a(i, j) - b(i, j);
      acc += d * d;
    }
  return std::sqrt(acc);
}

}  // namespace

MatrixFitResult fit_srgbm_to_matrix(const TransitionMatrix& a_emp,
                                    const FitBounds& bounds,
                                    const MatrixFitConfig& config) {
  if (!(bounds.mu_lo < bounds.mu_hi) ||
      !(bounds.sigma2_lo < bounds.sigma2_hi) || !(bounds.r_lo < bounds.r_hi))
    throw DomainError("fit bounds must be ordered");
  if (bounds.sigma2_lo <= 0.0 || bounds.r_lo <= 0.0)
    throw DomainError("fit bounds: sigma2 and r must stay positive");

  const int k = static_cast<int>(a_emp.size());
  const double range[3] = {bounds.mu_hi - bounds.mu_lo,
                           bounds.sigma2_hi - bounds.sigma2_lo,
                           bounds.r_hi - bounds.r_lo};
  const double lo[3] = {bounds.mu_lo, bounds.sigma2_lo, bounds.r_lo};

  int evals = 0;
  auto model_matrix = [&](const double u[3]) {
    const SrgbmParams p{lo[0] + u[0] * range[0], lo[1] + u[1] * range[1],
                        lo[2] + u[2] * range[2], 1.0};
    sim::SimConfig sc;
    sc.dt = config.dt;
    sc.n_trajectories = config.n_workers;
    sc.horizon = std::max(a_emp.delta(), config.dt);
    sc.seed = config.seed;  // common random numbers across candidates
    const auto panel = sim::generate_panel(p, config.n_workers, 0.0,
                                           a_emp.delta(), sc, config.threads);
    return transition_matrix(panel, k);
  };
  auto objective = [&](const double u[3]) {
    ++evals;
    return frobenius_diff(a_emp.entries(), model_matrix(u).entries());
  };

  // Compass pattern search on the unit box.
  double u[3] = {0.5, 0.5, 0.5};
  double f_best = objective(u);
  const double f_initial = f_best;
  double step = 0.25;
  bool improved_ever = false;
  while (step >= config.step_tol && evals < config.max_evals) {
    bool improved = false;
    for (int d = 0; d < 3 && evals < config.max_evals; ++d) {
      for (double sign : {+1.0, -1.0}) {
        double trial[3] = {u[0], u[1], u[2]};
        trial[d] = std::clamp(trial[d] + sign * step, 0.0, 1.0);
        if (trial[d] == u[d]) continue;
        const double f = objective(trial);
        if (f < f_best) {
          f_best = f;
          u[d] = trial[d];
          improved = true;
          improved_ever = true;
          break;
        }
        if (evals >= config.max_evals) break;
      }
    }
    if (!improved) step *= 0.5;
  }

  if (!improved_ever && f_best >= f_initial && evals >= config.max_evals)
    throw FitError("matrix fit: budget exhausted without improvement "
                   "(best Frobenius " + std::to_string(f_best) + ")");

  MatrixFitResult result;
  result.params = SrgbmParams{lo[0] + u[0] * range[0],
                              lo[1] + u[1] * range[1],
                              lo[2] + u[2] * range[2], 1.0};
  result.frobenius = f_best;
  result.n_evals = evals;
  result.converged = step < config.step_tol;
  result.resolution_mu = std::max(step, config.step_tol) * range[0];
  result.resolution_sigma2 = std::max(step, config.step_tol) * range[1];
  result.resolution_r = std::max(step, config.step_tol) * range[2];

  // Explained variance of the optimum relative to the empirical matrix.
  const Matrix model = model_matrix(u).entries();
  const auto& emp = a_emp.entries();
  double mean = 0.0;
  for (std::size_t i = 0; i < emp.rows(); ++i)
    for (std::size_t j = 0; j < emp.cols(); ++j) mean += emp(i, j);
  mean /= static_cast<double>(emp.rows() * emp.cols());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < emp.rows(); ++i)
    for (std::size_t j = 0; j < emp.cols(); ++j) {
      ss_res += (emp(i, j) - model(i, j)) * (emp(i, j) - model(i, j));
      ss_tot += (emp(i, j) - mean) * (emp(i, j) - mean);
    }
  result.explained_variance = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return result;
}

std::vector<GapRow> mfpt_gap_report(const SrgbmParams& params, int k,
                                    double delta,
                                    const GapReportConfig& config) {
  if (k < 2) throw DomainError("gap report: need K >= 2");
  if (!(delta > 0.0)) throw DomainError("gap report: delta must be > 0");
  validate(params);

  const analytics::StationaryDistribution stat(params);
  std::vector<double> midpoint_income(k);
  for (int q = 0; q < k; ++q)
    midpoint_income[q] = stat.quantile((q + 0.5) / k);

  sim::SimConfig sc;
  sc.dt = config.dt;
  sc.n_trajectories = config.n_workers;
  sc.horizon = std::max(delta, config.dt);
  sc.seed = config.seed;
  const auto panel = sim::generate_panel(params, config.n_workers, 0.0, delta,
                                         sc, config.threads);
  const auto a_model = transition_matrix(panel, k);
  const auto m_years = tmfpt_continuous(a_model);

  std::vector<GapRow> rows;
  rows.reserve(k * (k + 1) / 2);
  for (int from = 0; from < k; ++from) {
    for (int to = from; to < k; ++to) {
      GapRow row;
      row.from_q = from + 1;
      row.to_q = to + 1;
      if (from == to) {
        row.srgbm_mfpt_years = 0.0;
        row.tmfpt_years = 0.0;
      } else {
        row.srgbm_mfpt_years = analytics::mfpt(
            {midpoint_income[from], midpoint_income[to]}, params);
        row.tmfpt_years = m_years.entries(from, to);
      }
      row.difference = row.tmfpt_years - row.srgbm_mfpt_years;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace srgbm::markov
