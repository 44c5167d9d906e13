#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srgbm/matrix.hpp"
#include "srgbm/simulator.hpp"
#include "srgbm/types.hpp"

namespace srgbm::markov {

struct QuantileScheme {
  int k = 10;
  std::string boundary = "equal-population-rank";
};

// Row-stochastic quantile mobility matrix over a horizon of delta years.
class TransitionMatrix {
 public:
  // Validates shape, entry range and row sums (tolerance row_tol; rows
  // within tolerance are rescaled to sum to one exactly).
  TransitionMatrix(Matrix entries, double delta, QuantileScheme scheme,
                   double row_tol = 1e-12);

  const Matrix& entries() const { return entries_; }
  std::size_t size() const { return entries_.rows(); }
  double delta() const { return delta_; }
  const QuantileScheme& scheme() const { return scheme_; }

 private:
  Matrix entries_;
  double delta_;
  QuantileScheme scheme_;
};

enum class GeneratorVariant {
  diagonal,   // Q_kl = A_kl*ln(A_kk)/(A_kk - 1): valid generator by design
  entrywise,  // Q_kl = A_kl*ln(A_kl)/(1 - A_kl): may violate row sums
};

std::string to_string(GeneratorVariant v);
GeneratorVariant generator_variant_from_string(const std::string& name);

// Markov generator in units of 1/delta-period. valid() reports whether the
// result is a proper generator (nonnegative off-diagonals, zero row sums);
// the entrywise variant typically is not and is emitted with diagnostics.
struct GeneratorMatrix {
  Matrix entries;
  double delta = 0.0;
  GeneratorVariant variant = GeneratorVariant::diagonal;
  double max_abs_row_sum = 0.0;
  bool offdiag_nonnegative = true;

  bool valid(double tol = 1e-10) const {
    return offdiag_nonnegative && max_abs_row_sum <= tol;
  }
};

// K x K first-passage times; unit is either "periods" (steps of the chain /
// delta-periods) or "years".
struct MfptMatrix {
  Matrix entries;
  std::string unit;
  double delta = 0.0;
};

// Rank-based assignment into K equal-population groups; label 1 = poorest,
// ties broken by stable input order, group sizes differ by at most one.
std::vector<int> quantile_assign(std::span<const double> incomes, int k);

// A_kl = |S_k(t) cap S_l(t+delta)| / |S_k(t)| from the panel's two
// analysis snapshots (the first and last snapshot).
TransitionMatrix transition_matrix(const sim::IncomePanel& panel, int k);

GeneratorMatrix generator_matrix(
    const TransitionMatrix& a,
    GeneratorVariant variant = GeneratorVariant::diagonal);

// Jump chain A~ = I - diag(Q)^-1 Q (zero diagonal).
TransitionMatrix embedded_chain(const GeneratorMatrix& q);

// Stationary vector of an irreducible chain: direct solve of pi^T P = pi^T,
// power-iteration fallback at tolerance 1e-12.
std::vector<double> stationary_distribution(const TransitionMatrix& p);

// Discrete-chain MFPT via the fundamental matrix Z = [I - P + 1 pi^T]^-1,
// M_kl = (Z_ll - Z_kl)/pi_l, M_kk = 0. Unit: steps of P.
MfptMatrix tmfpt(const TransitionMatrix& p);

// Continuous-time MFPT in years: generator (diagonal variant) -> linear
// system Q m = -1 over non-target states, scaled by delta.
MfptMatrix tmfpt_continuous(const TransitionMatrix& a);

// Cross-check route via the embedded jump chain and per-state mean holding
// times 1/|Q_kk|.
MfptMatrix tmfpt_continuous_jump(const TransitionMatrix& a);

struct FitBounds {
  double mu_lo = -0.05, mu_hi = 0.25;
  double sigma2_lo = 0.005, sigma2_hi = 0.10;
  double r_lo = 0.005, r_hi = 0.15;
};

struct MatrixFitConfig {
  std::int64_t n_workers = 50000;
  double dt = 0.02;
  std::uint64_t seed = 1;
  int max_evals = 400;
  double step_tol = 1.0 / 64.0;  // pattern step floor, fraction of range
  int threads = 0;
};

struct MatrixFitResult {
  SrgbmParams params;          // x_r pinned to 1 (quantiles are scale-free)
  double frobenius = 0.0;
  double explained_variance = 0.0;
  int n_evals = 0;
  bool converged = false;
  // Search resolution per parameter: final pattern step times range.
  double resolution_mu = 0.0, resolution_sigma2 = 0.0, resolution_r = 0.0;
};

// Finds (mu, sigma2, r) minimizing ||A_emp - A_model||_F where A_model is
// the decile matrix of a model panel generated with a fixed seed.
MatrixFitResult fit_srgbm_to_matrix(const TransitionMatrix& a_emp,
                                    const FitBounds& bounds,
                                    const MatrixFitConfig& config);

struct GapRow {
  int from_q = 0, to_q = 0;
  double srgbm_mfpt_years = 0.0;
  double tmfpt_years = 0.0;
  double difference = 0.0;  // tmfpt - srgbm
};

struct GapReportConfig {
  std::int64_t n_workers = 100000;
  double dt = 0.01;
  std::uint64_t seed = 1;
  int threads = 0;
};

// Upward moves k <= l: closed-form MFPT between decile-midpoint incomes
// versus the transition-matrix MFPT of a model panel over the same horizon.
std::vector<GapRow> mfpt_gap_report(const SrgbmParams& params, int k,
                                    double delta,
                                    const GapReportConfig& config = {});

}  // namespace srgbm::markov
