#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rwre/envmodel.hpp"
#include "rwre/exactdist.hpp"

namespace rwre {

/// Step budget per sample.
inline constexpr std::int64_t kDefaultStepCap = 1'000'000'000;
/// Value recorded for a sample that ran out of steps (stands for +inf).
inline constexpr std::int64_t kTruncatedSample = std::numeric_limits<std::int64_t>::max();

enum class SampleKind { hitting_time, position, backtrack };

std::string to_string(SampleKind kind);

/// Monte Carlo samples under P_w. For hitting_time, `param` is k; for
/// position and backtrack it is n. Backtrack samples hold X_n^* - X_n.
struct SimBatch {
  SampleKind kind = SampleKind::hitting_time;
  std::int64_t param = 0;
  std::vector<std::int64_t> samples;
  /// Running maxima, filled by simulate_position when requested.
  std::vector<std::int64_t> maxima;
  std::uint64_t seed = 0;
  std::int64_t cap = kDefaultStepCap;
  std::int64_t truncated_count = 0;

  std::size_t size() const noexcept { return samples.size(); }
  double truncated_fraction() const;
  /// Mean and variance over the samples that did not hit the cap.
  double mean() const;
  double variance() const;
};

/// i.i.d. samples of T_k for the walk from 0, reflected at the left edge of
/// the window. Sample i uses the stream derived from (seed, i).
SimBatch simulate_hitting_time(const EnvironmentWindow& env, std::int64_t k,
                               std::int64_t n_samples, std::uint64_t seed,
                               std::int64_t cap = kDefaultStepCap, unsigned threads = 0);

/// i.i.d. samples of X_n (and X_n^* in `maxima` when track_max is set).
/// The window must cover sites up to n - 1.
SimBatch simulate_position(const EnvironmentWindow& env, std::int64_t n, std::int64_t n_samples,
                           std::uint64_t seed, bool track_max = false, unsigned threads = 0);

struct ProportionEstimate {
  double B = 0.0;
  double threshold = 0.0;  // B log n
  std::int64_t hits = 0;
  std::int64_t trials = 0;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Wilson score interval at normal quantile z.
ProportionEstimate wilson_interval(std::int64_t hits, std::int64_t trials,
                                   double z = 1.959963984540054);

/// P_w(X_n^* - X_n >= B log n) for every B in B_grid, with Wilson 95% intervals.
/// All B share the same paths.
std::vector<ProportionEstimate> backtrack_probability(const EnvironmentWindow& env, std::int64_t n,
                                                      const std::vector<double>& B_grid,
                                                      std::int64_t n_samples, std::uint64_t seed,
                                                      unsigned threads = 0);

ProportionEstimate backtrack_probability(const EnvironmentWindow& env, std::int64_t n, double B,
                                         std::int64_t n_samples, std::uint64_t seed,
                                         unsigned threads = 0);

struct Sigma0Estimate {
  double estimate = 0.0;
  double se = 0.0;
  std::int64_t series_cutoff = 0;
  std::int64_t n_envs = 0;
  double mean_V0 = 0.0;   // plug-in E[V_0]
  double var_mu0 = 0.0;   // plug-in Var(mu_0)
  /// lag_terms[k-1] = 2 Cov(mu_0, mu_k) plug-in, k = 1..K.
  std::vector<double> lag_terms;
};

/// Plug-in estimate of E[V_0] + Var(mu_0) + 2 sum_{k=1}^K Cov(mu_0, mu_k) over
/// n_envs independent environments. Throws RegimeError unless kappa > 2.
Sigma0Estimate annealed_sigma0_estimate(const EnvDistribution& dist, std::int64_t n_envs,
                                        std::int64_t series_cutoff, std::uint64_t seed,
                                        unsigned threads = 0);

/// eps such that P(sup |F_N - F| > eps) <= delta.
double dkw_epsilon(std::size_t n, double delta);

struct EcdfDistance {
  double distance = 0.0;
  double arg_sup = 0.0;
  std::size_t n = 0;
  double dkw_epsilon = 0.0;
  bool within_band = false;
};

/// sup over sample atoms of |ECDF - ref|, both one-sided limits at each atom.
/// Truncated samples count as +inf. Throws ParameterError on empty input.
EcdfDistance ecdf_distance(const std::vector<std::int64_t>& samples,
                           const std::function<double(double)>& ref, double delta = 0.01);

/// Same against a lattice law, evaluated over the union of both supports so
/// the result is the sup over the whole line.
EcdfDistance ecdf_distance(const std::vector<std::int64_t>& samples, const LatticeCdf& ref,
                           double delta = 0.01);

}  // namespace rwre
