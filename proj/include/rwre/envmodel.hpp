#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace rwre {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Environment laws. Each describes the distribution of the right-step
// probability w_0 of an i.i.d. environment; rho = (1 - w) / w.
// ---------------------------------------------------------------------------

/// w = a with probability q, w = b otherwise.
struct TwoPoint {
  double a;
  double b;
  double q;
};

struct BetaLaw {
  double alpha;
  double beta;
};

struct UniformInterval {
  double lo;
  double hi;
};

struct Degenerate {
  double p;
};

using EnvDistribution = std::variant<TwoPoint, BetaLaw, UniformInterval, Degenerate>;

/// Throws ParameterError unless every support point lies in (0,1) and the
/// variant-specific constraints hold.
void validate(const EnvDistribution& dist);

/// Short human-readable form, e.g. "beta(5,1)".
std::string describe(const EnvDistribution& dist);

/// Inverse CDF of w: maps u in (0,1) to a right-step probability.
double omega_quantile(const EnvDistribution& dist, double u);

/// Largest value rho_0 can take (+inf for unbounded laws).
double rho_ess_sup(const EnvDistribution& dist);

/// r_p = E[rho_0^p]. Closed form for two-point, beta and degenerate laws,
/// quadrature for the uniform law. Divergent moments return +inf.
double moment_rp(const EnvDistribution& dist, double p);

/// r_p by adaptive quadrature for the laws with a density (beta, uniform);
/// used to cross-check the closed forms. Throws ParameterError for atomic laws.
double moment_rp_quadrature(const EnvDistribution& dist, double p);

/// E[log rho_0].
double log_rho_mean(const EnvDistribution& dist);
double log_rho_mean_quadrature(const EnvDistribution& dist);

/// kappa = sup{p > 0 : r_p < 1}, by bisection to absolute tolerance `tol`.
/// Returns +inf for laws where r_p < 1 on the whole search bracket.
/// Throws RegimeError when E[log rho_0] >= 0.
double solve_kappa(const EnvDistribution& dist, double tol = 1e-9);

enum class RateTag {
  BETn_fast,     // kappa > 3
  BETn_slow,     // 2 < kappa <= 3
  BETnds_fast,   // kappa > 4
  BETnds_slow,   // 2 < kappa <= 4
  BEXn_as,       // kappa > 2
  BEXn_ip_fast,  // kappa >= 12/5
  BEXn_ip_slow,  // 2 < kappa < 12/5
  none,          // kappa <= 2
};

std::string to_string(RateTag tag);

std::vector<RateTag> classify_regime(double kappa);

struct RegimeReport {
  double kappa = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double log_rho_mean = 0.0;
  std::vector<RateTag> applicable_theorems;

  bool has(RateTag t) const;
};

/// Law-level summary. Throws RegimeError for recurrent or left-transient laws.
RegimeReport regime_report(const EnvDistribution& dist, double kappa_tol = 1e-9);

// ---------------------------------------------------------------------------
// Sampled environments
// ---------------------------------------------------------------------------

/// Right-step probability at site x of the environment determined by (dist, seed).
double site_omega(const EnvDistribution& dist, std::uint64_t seed, std::int64_t x);

/// Finite slice {w_x : left <= x <= right} of an i.i.d. environment. Site values
/// depend only on (dist, seed, x), so windows over different ranges agree on
/// their overlap.
class EnvironmentWindow {
 public:
  EnvironmentWindow(EnvDistribution dist, std::int64_t left, std::int64_t right,
                    std::uint64_t seed);

  std::int64_t left_index() const noexcept { return left_; }
  std::int64_t right_index() const noexcept { return left_ + size() - 1; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(omega_.size()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const EnvDistribution& distribution() const noexcept { return dist_; }

  bool contains(std::int64_t x) const noexcept { return x >= left_ && x <= right_index(); }

  double omega(std::int64_t x) const { return omega_[offset(x)]; }
  double rho(std::int64_t x) const { return rho_[offset(x)]; }

  /// Values indexed from left_index().
  const Eigen::VectorXd& omega_values() const noexcept { return omega_; }
  const Eigen::VectorXd& rho_values() const noexcept { return rho_; }

  /// Same environment over a different range.
  EnvironmentWindow resized(std::int64_t left, std::int64_t right) const;

 private:
  Eigen::Index offset(std::int64_t x) const;

  EnvDistribution dist_;
  std::int64_t left_;
  std::uint64_t seed_;
  Eigen::VectorXd omega_;
  Eigen::VectorXd rho_;
};

EnvironmentWindow sample_environment(const EnvDistribution& dist, std::int64_t left,
                                     std::int64_t right, std::uint64_t seed);

}  // namespace rwre
