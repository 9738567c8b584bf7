#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rwre/envmodel.hpp"
#include "rwre/exactdist.hpp"
#include "rwre/qmoments.hpp"

namespace rwre {

// ---------------------------------------------------------------------------
// Environment context shared by the experiments
// ---------------------------------------------------------------------------

/// A sampled environment over [-L, right] with its moment table. L is the
/// larger of the moment-truncation choice and the reflection certificate.
struct EnvContext {
  std::uint64_t seed = 0;
  std::int64_t L = 0;
  EnvironmentWindow env;
  QuenchedMomentTable table;
};

EnvContext make_context(const EnvDistribution& dist, std::uint64_t seed, std::int64_t right,
                        double trunc_tol = kDefaultTruncTol, double reflect_tol = 1e-12);

// ---------------------------------------------------------------------------
// Rate experiments
// ---------------------------------------------------------------------------

enum class RateTarget { Fbar, F, G };

std::string to_string(RateTarget t);
/// Accepts fbar, f, g (any case).
RateTarget parse_rate_target(const std::string& s);

struct RateTolerances {
  double slope_band = 0.15;           // two-sided band around -1/2
  double envelope_slack = 0.1;        // subtracted from the theory exponent
  double envelope_pass_fraction = 0.8;
  double tail_tol = kDefaultTailTol;
  double trunc_tol = kDefaultTruncTol;
  double reflect_tol = 1e-12;
};

struct RateExperimentConfig {
  EnvDistribution dist = Degenerate{2.0 / 3.0};
  std::vector<std::int64_t> n_grid;
  std::int64_t n_envs = 20;
  RateTarget target = RateTarget::Fbar;
  double epsilon = 0.1;
  double epsilon_prime = 0.05;
  std::uint64_t master_seed = 0;
  RateTolerances tol;
  unsigned threads = 0;
};

/// Throws ConfigError unless n_grid is strictly increasing with >= 4 points
/// (all >= 1) and n_envs >= 1.
void validate(const RateExperimentConfig& cfg);

/// Dyadic grid 2^lo..2^hi.
std::vector<std::int64_t> dyadic_grid(int lo, int hi);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// OLS fit of log(y) on log(x).
LineFit loglog_fit(const std::vector<std::int64_t>& x, const std::vector<double>& y);

/// Linear-interpolation quantile of unsorted data, q in [0,1].
double quantile(std::vector<double> v, double q);

struct TheoryRate {
  double exponent = 0.0;    // distance ~ n^{-exponent}
  bool two_sided = false;   // true when the slope is checked against a band
  std::string label;
};

TheoryRate theory_rate(RateTarget target, double kappa);

struct ReplicateFit {
  std::uint64_t seed = 0;
  std::vector<double> distances;
  std::vector<double> tail_bounds;
  LineFit fit;
  double envelope_C = 0.0;
  bool envelope_pass = false;
};

struct RateExperimentResult {
  RateExperimentConfig config;
  RegimeReport regime;
  TheoryRate theory;
  std::vector<ReplicateFit> replicates;
  double median_slope = 0.0;
  double slope_iqr = 0.0;
  double envelope_exponent = 0.0;
  double envelope_pass_fraction = 0.0;
  bool slope_in_band = false;
  bool envelope_ok = false;
  /// The check that applies to the law's regime (band or envelope).
  bool passed = false;
};

/// Exact Kolmogorov distance of the target law for one environment and n.
KolmogorovReport target_distance(const EnvContext& ctx, RateTarget target, std::int64_t n,
                                 const LawConstants& law, double tail_tol = kDefaultTailTol);

/// d(n) <= C n^{-e} for every grid point after the first, with C = d(n0) n0^e.
bool envelope_holds(const std::vector<std::int64_t>& n_grid, const std::vector<double>& d,
                    double e, double* C = nullptr);

RateExperimentResult rate_experiment(const RateExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Martingale identities
// ---------------------------------------------------------------------------

struct MartingaleValues {
  std::int64_t n = 0;
  double M_sum = 0.0, M_closed = 0.0;
  double L_sum = 0.0, L_closed = 0.0;
  double H_sum = 0.0, H_closed = 0.0;
};

struct MartingaleCheckReport {
  std::vector<std::int64_t> n_grid;
  std::vector<MartingaleValues> values;
  double residual_M = 0.0;
  double residual_L = 0.0;
  double residual_H = 0.0;
  /// max over the grid of W*_n / n^{1/min(alpha,2) + epsilon}, where alpha is
  /// the moment order available for the increments (kappa for M, kappa/2 for
  /// L and H).
  double normalized_W_M = 0.0;
  double normalized_W_L = 0.0;
  double normalized_W_H = 0.0;

  double max_residual() const;
};

/// Relative residual |a - b| / max(1, |a|, |b|).
double identity_residual(double a, double b);

/// Evaluates M_n, L_n, H_n from their defining sums and from the closed
/// re-representations. The table must cover sites -1..max(n_grid).
MartingaleCheckReport martingale_identity_check(const QuenchedMomentTable& table,
                                                const LawConstants& law, double kappa,
                                                const std::vector<std::int64_t>& n_grid,
                                                double epsilon = 0.1);

// ---------------------------------------------------------------------------
// Fluctuation experiments
// ---------------------------------------------------------------------------

struct FluctuationResult {
  std::vector<std::int64_t> n_grid;
  std::vector<std::uint64_t> seeds;
  /// raw[r][i], normalized[r][i]: replicate r at n_grid[i].
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> normalized;
  /// Second normalization (a.s. scale), empty for the variance experiment.
  std::vector<std::vector<double>> normalized_as;
  std::vector<double> median_normalized;
  std::vector<double> median_normalized_as;
  std::vector<bool> replicate_decreasing;  // last < first per replicate
  bool median_decreasing = false;          // median at largest n below smallest n
  bool median_as_decreasing = false;
};

/// Max of |E_w[T_k] - E_w[T_l] - (k - l)/v| over k, l in
/// [nv - n^{1/2+eps}, nv + n^{1/2+eps}], normalized by n^{1/4+eps/2+eps'} and by
/// n^{1/4+1/(2kappa)+eps(1/2-1/kappa)+eps'}.
FluctuationResult mean_fluctuation_experiment(const EnvDistribution& dist,
                                              const std::vector<std::int64_t>& n_grid,
                                              double epsilon, double epsilon_prime,
                                              std::int64_t n_envs, std::uint64_t seed,
                                              unsigned threads = 0);

/// |Var_w(T_n) - sigma^2 n| normalized by n^{2/min(4,kappa)+eps}.
FluctuationResult variance_fluctuation_experiment(const EnvDistribution& dist,
                                                  const std::vector<std::int64_t>& n_grid,
                                                  double epsilon, std::int64_t n_envs,
                                                  std::uint64_t seed, unsigned threads = 0);

/// Integer window [ceil(nv - n^{1/2+eps}), floor(nv + n^{1/2+eps})]. Throws
/// ConfigError if the lower end is negative.
std::pair<std::int64_t, std::int64_t> fluctuation_window(std::int64_t n, double speed,
                                                         double epsilon);

// ---------------------------------------------------------------------------
// Berry-Esseen bound and the transfer identity
// ---------------------------------------------------------------------------

inline constexpr double kDefaultA1 = 0.56;

/// E_w|tau_k - mu_k|^3 for the crossing time at site k, from the table's
/// moments and the crossing-time pmf below the mean.
double third_abs_central_moment(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                                std::int64_t k);

struct BerryEsseenReport {
  std::int64_t n = 0;
  double third_abs_sum = 0.0;
  double var_Tn = 0.0;
  double bound = 0.0;
  double distance = 0.0;
  double tail_mass_bound = 0.0;
  bool holds = false;
};

BerryEsseenReport berry_esseen_bound_eval(const EnvironmentWindow& env,
                                          const QuenchedMomentTable& table, std::int64_t n,
                                          double A1 = kDefaultA1,
                                          double tail_tol = kDefaultTailTol);

struct TransferPoint {
  double x = 0.0;
  std::int64_t k = 0;
  bool skipped = false;
  double G_star = 0.0;       // from the running-maximum DP
  double survival = 0.0;     // P_w(T_k > n) from the first-passage DP
  double residual = 0.0;
};

struct TransferReport {
  std::int64_t n = 0;
  std::vector<TransferPoint> points;
  std::int64_t skipped = 0;
  double max_residual = 0.0;
};

/// Compares G*_{n,w}(x) with P_w(T_{k(n,w,x)} > n) on x_grid.
TransferReport transfer_check(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                              const LawConstants& law, std::int64_t n,
                              const std::vector<double>& x_grid);

/// n_points equally spaced values on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int n_points);

}  // namespace rwre
