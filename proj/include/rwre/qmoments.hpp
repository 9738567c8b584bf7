#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "rwre/envmodel.hpp"

namespace rwre {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Recursion kernels.
//
// All kernels take rho over a contiguous block of sites whose first entry is
// the reflecting site (w = 1 there, so its crossing time is exactly 1 and its
// own rho value is ignored). Entry i of every output is the quenched moment
// of the crossing time from site (first + i) to (first + i + 1).
// ---------------------------------------------------------------------------

namespace detail {

constexpr double multinomial3(int n, int k1, int k2) {
  double f[4] = {1.0, 1.0, 2.0, 6.0};
  return f[n] / (f[k1] * f[k2] * f[n - k1 - k2]);
}

}  // namespace detail

/// Forcing term f_m of the order-m crossing-time moment recursion
///   E_k[tau^m] = f_m + rho_k E_{k-1}[tau^m],
///   f_m = 1 + rho_k * sum_{0<=k1,k2<m, k1+k2<=m} C(m; k1,k2) E_{k-1}[tau^k1] E_k[tau^k2],
/// for m <= 3. `prev[j]` holds E_{k-1}[tau^j] and `cur[j]` holds E_k[tau^j]
/// (both with index 0 equal to 1); only cur[0..m-1] is read.
template <typename Scalar>
Scalar moment_forcing(int m, Scalar rho, const std::array<Scalar, 4>& prev,
                      const std::array<Scalar, 4>& cur) {
  Scalar sum(0);
  for (int k1 = 0; k1 < m; ++k1) {
    for (int k2 = 0; k2 < m && k1 + k2 <= m; ++k2) {
      sum += Scalar(detail::multinomial3(m, k1, k2)) * prev[k1] * cur[k2];
    }
  }
  return Scalar(1) + rho * sum;
}

/// mu_k = 1 + rho_k + rho_k mu_{k-1}, with mu = 1 at the reflecting site.
template <typename Derived>
VectorX<typename Derived::Scalar> mu_recursion(const Eigen::MatrixBase<Derived>& rho) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> mu(rho.size());
  if (rho.size() == 0) return mu;
  mu[0] = Scalar(1);
  for (Eigen::Index i = 1; i < rho.size(); ++i) mu[i] = Scalar(1) + rho[i] + rho[i] * mu[i - 1];
  return mu;
}

/// E_k[tau^2] = (1+rho)(1+2rho) + 4rho(1+rho) mu_{k-1} + 2rho^2 mu_{k-1}^2 + rho E_{k-1}[tau^2].
template <typename DerivedR, typename DerivedM>
VectorX<typename DerivedR::Scalar> m2_recursion(const Eigen::MatrixBase<DerivedR>& rho,
                                                const Eigen::MatrixBase<DerivedM>& mu) {
  using Scalar = typename DerivedR::Scalar;
  VectorX<Scalar> m2(rho.size());
  if (rho.size() == 0) return m2;
  m2[0] = Scalar(1);
  for (Eigen::Index i = 1; i < rho.size(); ++i) {
    const Scalar r = rho[i];
    const Scalar u = mu[i - 1];
    m2[i] = (1 + r) * (1 + 2 * r) + 4 * r * (1 + r) * u + 2 * r * r * u * u + r * m2[i - 1];
  }
  return m2;
}

/// Third moment through the multinomial expansion with m = 3.
template <typename DerivedR, typename DerivedM, typename DerivedM2>
VectorX<typename DerivedR::Scalar> m3_recursion(const Eigen::MatrixBase<DerivedR>& rho,
                                                const Eigen::MatrixBase<DerivedM>& mu,
                                                const Eigen::MatrixBase<DerivedM2>& m2) {
  using Scalar = typename DerivedR::Scalar;
  VectorX<Scalar> m3(rho.size());
  if (rho.size() == 0) return m3;
  m3[0] = Scalar(1);
  for (Eigen::Index i = 1; i < rho.size(); ++i) {
    const std::array<Scalar, 4> prev{Scalar(1), mu[i - 1], m2[i - 1], m3[i - 1]};
    const std::array<Scalar, 4> cur{Scalar(1), mu[i], m2[i], Scalar(0)};
    m3[i] = moment_forcing<Scalar>(3, rho[i], prev, cur) + rho[i] * m3[i - 1];
  }
  return m3;
}

/// V_k = rho_k (1+rho_k) (1+mu_{k-1})^2 + rho_k V_{k-1}, with V = 0 at the reflecting site.
/// `flip_sign_fault` negates the rho_k V_{k-1} term; it exists only so the
/// verification suite can prove that it detects a broken variance route.
template <typename DerivedR, typename DerivedM>
VectorX<typename DerivedR::Scalar> var_recursion(const Eigen::MatrixBase<DerivedR>& rho,
                                                 const Eigen::MatrixBase<DerivedM>& mu,
                                                 bool flip_sign_fault = false) {
  using Scalar = typename DerivedR::Scalar;
  const Scalar sign = flip_sign_fault ? Scalar(-1) : Scalar(1);
  VectorX<Scalar> v(rho.size());
  if (rho.size() == 0) return v;
  v[0] = Scalar(0);
  for (Eigen::Index i = 1; i < rho.size(); ++i) {
    const Scalar r = rho[i];
    const Scalar a = 1 + mu[i - 1];
    v[i] = r * (1 + r) * a * a + sign * r * v[i - 1];
  }
  return v;
}

// ---------------------------------------------------------------------------
// Per-environment tables
// ---------------------------------------------------------------------------

/// Default tolerance for the left truncation and the minimum reflection distance.
inline constexpr double kDefaultTruncTol = 1e-12;
inline constexpr std::int64_t kMinTruncation = 64;

/// Agreement required between the two variance routes, relative to E_k[tau^2].
inline constexpr double kVarianceRouteTol = 1e-10;

struct TableOptions {
  /// Compare against a table with the reflection twice as far away and store
  /// the largest relative change as trunc_error_bound.
  bool estimate_truncation_error = true;
  /// Test hook: corrupt the variance recursion (see var_recursion).
  bool inject_variance_fault = false;
  /// Throw NumericError when the variance routes disagree.
  bool enforce_variance_routes = true;
};

struct VarianceRoutes {
  Eigen::VectorXd recursion;
  Eigen::VectorXd subtraction;  // m2 - mu^2
  double max_disagreement = 0.0;  // max |recursion - subtraction| / m2
  Eigen::Index worst_index = 0;
};

/// Per-site quenched moments for sites reflect..right of a window.
Eigen::VectorXd mu_table(const EnvironmentWindow& env, std::int64_t trunc_left);
Eigen::VectorXd m2_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu);
Eigen::VectorXd m3_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& m2);
VarianceRoutes var_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& m2,
                         bool inject_fault = false);

/// Quenched moments of single-site crossing times over [trunc_left, right] of a
/// window, with prefix sums E_w[T_n] and Var_w(T_n) for 0 <= n <= right + 1.
class QuenchedMomentTable {
 public:
  QuenchedMomentTable(const EnvironmentWindow& env, std::int64_t trunc_left,
                      const TableOptions& opts = {});

  std::int64_t trunc_left() const noexcept { return trunc_left_; }
  std::int64_t right_site() const noexcept { return trunc_left_ + size() - 1; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(mu_.size()); }
  /// Largest n with prefix sums available.
  std::int64_t n_max() const noexcept { return static_cast<std::int64_t>(mean_T_.size()) - 1; }

  double mu(std::int64_t k) const { return mu_[index(k)]; }
  double m2(std::int64_t k) const { return m2_[index(k)]; }
  double m3(std::int64_t k) const { return m3_[index(k)]; }
  double var(std::int64_t k) const { return var_[index(k)]; }

  /// E_w[T_n] = sum_{k<n} mu_k and Var_w(T_n) = sum_{k<n} V_k.
  double mean_T(std::int64_t n) const;
  double var_T(std::int64_t n) const;

  const Eigen::VectorXd& mu_values() const noexcept { return mu_; }
  const Eigen::VectorXd& m2_values() const noexcept { return m2_; }
  const Eigen::VectorXd& m3_values() const noexcept { return m3_; }
  const Eigen::VectorXd& var_values() const noexcept { return var_; }
  const Eigen::VectorXd& mean_T_values() const noexcept { return mean_T_; }
  const Eigen::VectorXd& var_T_values() const noexcept { return var_T_; }

  double trunc_error_bound() const noexcept { return trunc_error_bound_; }
  double variance_route_disagreement() const noexcept { return variance_disagreement_; }

 private:
  Eigen::Index index(std::int64_t k) const;

  std::int64_t trunc_left_;
  Eigen::VectorXd mu_, m2_, m3_, var_;
  Eigen::VectorXd mean_T_, var_T_;
  double trunc_error_bound_ = 0.0;
  double variance_disagreement_ = 0.0;
};

struct PrefixSums {
  Eigen::VectorXd mean_T;
  Eigen::VectorXd var_T;
};

/// E_w[T_n], Var_w(T_n) for n = 0..n_max (n_max <= table.n_max()).
PrefixSums prefix_sums(const QuenchedMomentTable& table, std::int64_t n_max);

/// Z_n(w) = v (E_w[T_floor(nv)] - floor(nv)/v).
double centering_Zn(const QuenchedMomentTable& table, std::int64_t n, double speed);

struct LawConstants {
  double r1 = 0.0;
  double r2 = 0.0;
  double speed = 0.0;        // v_P = (1 - r1) / (1 + r1)
  double inv_speed = 0.0;    // E[mu_0]
  double mu0_sq_mean = 0.0;  // E[mu_0^2]
  double sigma2 = 0.0;       // E[V_0]
};

/// Closed forms in r1, r2. Throws RegimeError unless kappa > 2.
LawConstants law_constants(const EnvDistribution& dist);
LawConstants law_constants_from_moments(double r1, double r2);

struct TruncationChoice {
  std::int64_t L = kMinTruncation;
  double measured_change = 0.0;
};

/// Smallest L = 64 * 2^j such that moving the reflection from -L to -2L
/// changes every mu, E[tau^2], E[tau^3] entry on sites -1..right of the
/// environment by less than `tol` relative. Throws RegimeError for laws that
/// are not transient to the right.
TruncationChoice truncation_control(const EnvironmentWindow& env, double tol = kDefaultTruncTol);

}  // namespace rwre
