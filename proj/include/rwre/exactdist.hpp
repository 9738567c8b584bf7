#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rwre/envmodel.hpp"
#include "rwre/qmoments.hpp"

namespace rwre {

/// Mass below this threshold at the edge of the active band is dropped from
/// the dynamic programs and accounted for in tail_mass.
inline constexpr double kPruneThreshold = 1e-40;
/// Default certified horizon: uncaptured mass allowed beyond t_max.
inline constexpr double kDefaultTailTol = 1e-9;
/// Roundoff allowance for probabilities that come out of a subtraction.
inline constexpr double kNegativeClamp = 1e-15;

enum class LatticeKind { hitting_time, position, running_max };

std::string to_string(LatticeKind kind);

/// A distribution on the lattice {support_offset + step * i}. tail_mass is the
/// probability not captured by `probs` (beyond the horizon or pruned).
struct LatticeCdf {
  std::int64_t support_offset = 0;
  std::int64_t step = 1;
  Eigen::VectorXd probs;
  double tail_mass = 0.0;
  LatticeKind kind = LatticeKind::hitting_time;

  std::int64_t value(Eigen::Index i) const { return support_offset + step * static_cast<std::int64_t>(i); }
  Eigen::Index atoms() const { return probs.size(); }
  double total() const { return probs.sum() + tail_mass; }
  /// P(X <= x) over the captured mass.
  double cdf(std::int64_t x) const;
  Eigen::VectorXd cdf_values() const;
  double mean() const;
  double variance() const;
};

/// Clamps tiny negative roundoff to 0; throws NumericError below -kNegativeClamp.
double clamp_probability(double p);

/// Forward propagation of the walk started at `start`, absorbed at `target` > start
/// and reflected at `trunc_left` (w = 1 there). Can be advanced incrementally,
/// which is how horizons are doubled without recomputation.
class FirstPassagePropagator {
 public:
  FirstPassagePropagator(const EnvironmentWindow& env, std::int64_t start, std::int64_t target,
                         std::int64_t trunc_left, double prune = kPruneThreshold);

  void advance_to(std::int64_t t);
  std::int64_t time() const noexcept { return time_; }
  /// P(T > time) including pruned mass.
  double survival() const;
  /// Hitting-time law captured so far.
  LatticeCdf result() const;

 private:
  std::int64_t start_, target_, trunc_left_;
  double prune_;
  Eigen::ArrayXd w_, q_;
  Eigen::ArrayXd cur_, next_;
  Eigen::Index lo_, hi_;
  Eigen::Index next_dirty_lo_, next_dirty_hi_;
  std::int64_t time_ = 0;
  double pruned_ = 0.0;
  std::vector<double> hits_;  // hits_[t] = P(T = t)
};

/// Law of T_k for the walk from 0, on t = k, k+2, ..., t_max.
LatticeCdf first_passage_cdf(const EnvironmentWindow& env, std::int64_t k, std::int64_t t_max,
                             std::int64_t trunc_left);

/// Law of T_k with the default horizon ceil(E[T_k] + 12 sd), doubled until the
/// tail mass is below `tail_tol`. Throws HorizonError if that never happens
/// within `max_steps`.
LatticeCdf first_passage_auto(const EnvironmentWindow& env, const QuenchedMomentTable& table,
                              std::int64_t k, double tail_tol = kDefaultTailTol,
                              std::int64_t max_steps = std::int64_t{1} << 34);

/// Law of the crossing time from site k to k+1 with the tail below `tail_tol`.
LatticeCdf crossing_time_pmf(const EnvironmentWindow& env, std::int64_t k, std::int64_t trunc_left,
                             double tail_tol = 1e-10,
                             std::int64_t max_steps = std::int64_t{1} << 34);

struct PositionLaw {
  LatticeCdf cdf;
  /// Total mass that sat on the reflecting site over the run; an upper bound
  /// on the distortion caused by the reflection.
  double boundary_contamination = 0.0;
};

/// Exact law of X_n under P_w.
PositionLaw position_pmf(const EnvironmentWindow& env, std::int64_t n, std::int64_t trunc_left,
                         double prune = kPruneThreshold);

/// below[k] = P_w(X_n^* < k) = P_w(T_k > n) for k = 0..k_max, computed from
/// first-passage laws.
Eigen::VectorXd running_max_below(const EnvironmentWindow& env, std::int64_t n, std::int64_t k_max,
                                  std::int64_t trunc_left);

/// Law of X_n^* on 0..k_max-1 (tail = P(X_n^* >= k_max)) via the first-passage identity.
LatticeCdf running_max_cdf(const EnvironmentWindow& env, std::int64_t n, std::int64_t k_max,
                           std::int64_t trunc_left);

/// Independent route: dynamic program over (running max, gap below it).
/// Returns below[k] = P(X_n^* < k) for k = 0..n+1.
Eigen::VectorXd running_max_direct(const EnvironmentWindow& env, std::int64_t n,
                                   std::int64_t trunc_left, double prune = 1e-30);

/// P_w(T_left < T_right) for the walk from 0, left < 0 < right.
double ruin_probability(const EnvironmentWindow& env, std::int64_t left_site,
                        std::int64_t right_site);

/// Smallest L = 64 * 2^j with P_w(T_{-L} < T_target) < tol for the environment
/// (dist, seed).
std::int64_t certify_reflection(const EnvDistribution& dist, std::uint64_t seed,
                                std::int64_t target, double tol = 1e-12);

enum class Normalization { quenched_scaling, deterministic_scaling, position };

std::string to_string(Normalization n);

struct KolmogorovReport {
  std::int64_t n = 0;
  double distance = 0.0;
  double arg_sup = 0.0;  // normalized location of the supremum
  Normalization normalization = Normalization::quenched_scaling;
  double tail_mass_bound = 0.0;
};

struct LatticeSup {
  double distance = 0.0;
  double arg_sup = 0.0;
};

/// sup_x |F(x) - Phi((x - center)/scale)| for a lattice F, evaluating both
/// one-sided limits at every atom.
LatticeSup lattice_kolmogorov(const LatticeCdf& law, double center, double scale);

/// Distance of the normalized quenched law of T_n to Phi: quenched scaling uses
/// Var_w(T_n), deterministic scaling uses sigma^2 n.
KolmogorovReport kolmogorov_distance_T(const EnvironmentWindow& env,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       Normalization normalization, const LawConstants& law,
                                       double tail_tol = kDefaultTailTol);

/// Same for a hitting-time law that is already available.
KolmogorovReport kolmogorov_distance_T(const LatticeCdf& hitting_law,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       Normalization normalization, const LawConstants& law,
                                       double tail_tol = kDefaultTailTol);

/// Distance of (X_n - n v + Z_n) / (sigma v^{3/2} sqrt n) to Phi.
KolmogorovReport kolmogorov_distance_X(const EnvironmentWindow& env,
                                       const QuenchedMomentTable& table, std::int64_t n,
                                       const LawConstants& law, double tail_tol = kDefaultTailTol);

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

}  // namespace rwre
