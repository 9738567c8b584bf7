#include "rwre/qmoments.hpp"

#include <cmath>
#include <string>

#include "rwre/error.hpp"

namespace rwre {

namespace {

Eigen::VectorXd rho_block(const EnvironmentWindow& env, std::int64_t trunc_left) {
  if (trunc_left < env.left_index() || trunc_left > env.right_index()) {
    throw RangeError("reflecting site " + std::to_string(trunc_left) +
                     " outside environment window");
  }
  const auto start = static_cast<Eigen::Index>(trunc_left - env.left_index());
  const auto len = static_cast<Eigen::Index>(env.right_index() - trunc_left + 1);
  return env.rho_values().segment(start, len);
}

void check_length(const Eigen::VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw RangeError(std::string(what) + " table does not match the window");
}

double max_relative_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return ((a - b).array().abs() / b.array().abs().max(1.0)).maxCoeff();
}

}  // namespace

Eigen::VectorXd mu_table(const EnvironmentWindow& env, std::int64_t trunc_left) {
  return mu_recursion(rho_block(env, trunc_left));
}

Eigen::VectorXd m2_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu) {
  const Eigen::VectorXd rho = rho_block(env, trunc_left);
  check_length(mu, rho.size(), "mu");
  return m2_recursion(rho, mu);
}

Eigen::VectorXd m3_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& m2) {
  const Eigen::VectorXd rho = rho_block(env, trunc_left);
  check_length(mu, rho.size(), "mu");
  check_length(m2, rho.size(), "m2");
  return m3_recursion(rho, mu, m2);
}

VarianceRoutes var_table(const EnvironmentWindow& env, std::int64_t trunc_left,
                         const Eigen::VectorXd& mu, const Eigen::VectorXd& m2, bool inject_fault) {
  const Eigen::VectorXd rho = rho_block(env, trunc_left);
  check_length(mu, rho.size(), "mu");
  check_length(m2, rho.size(), "m2");
  VarianceRoutes routes;
  routes.recursion = var_recursion(rho, mu, inject_fault);
  routes.subtraction = m2.array() - mu.array().square();
  const Eigen::ArrayXd gap = (routes.recursion - routes.subtraction).array().abs() / m2.array();
  routes.max_disagreement = gap.maxCoeff(&routes.worst_index);
  return routes;
}

QuenchedMomentTable::QuenchedMomentTable(const EnvironmentWindow& env, std::int64_t trunc_left,
                                         const TableOptions& opts)
    : trunc_left_(trunc_left) {
  if (trunc_left > 0) throw RangeError("moment table: reflecting site must be <= 0");
  if (env.right_index() < 0) throw RangeError("moment table: window must contain site 0");

  mu_ = mu_table(env, trunc_left);
  m2_ = m2_table(env, trunc_left, mu_);
  m3_ = m3_table(env, trunc_left, mu_, m2_);
  const VarianceRoutes routes = var_table(env, trunc_left, mu_, m2_, opts.inject_variance_fault);
  var_ = routes.recursion;
  variance_disagreement_ = routes.max_disagreement;
  if (opts.enforce_variance_routes && variance_disagreement_ > kVarianceRouteTol) {
    throw NumericError("variance routes disagree by " + std::to_string(variance_disagreement_) +
                       " at site " + std::to_string(trunc_left + routes.worst_index));
  }

  const auto origin = static_cast<Eigen::Index>(-trunc_left);
  const Eigen::Index sites = mu_.size() - origin;  // sites 0..right
  mean_T_.resize(sites + 1);
  var_T_.resize(sites + 1);
  mean_T_[0] = 0.0;
  var_T_[0] = 0.0;
  for (Eigen::Index k = 0; k < sites; ++k) {
    mean_T_[k + 1] = mean_T_[k] + mu_[origin + k];
    var_T_[k + 1] = var_T_[k] + var_[origin + k];
  }

  if (opts.estimate_truncation_error) {
    const std::int64_t far = trunc_left - std::max<std::int64_t>(-trunc_left, 1);
    const EnvironmentWindow wide = env.resized(far, env.right_index());
    const Eigen::VectorXd rho = rho_block(wide, far);
    const Eigen::VectorXd mu2 = mu_recursion(rho);
    const Eigen::VectorXd m22 = m2_recursion(rho, mu2);
    const Eigen::VectorXd m32 = m3_recursion(rho, mu2, m22);
    // Compare on sites >= -1 (or the first non-reflecting site).
    const std::int64_t first = std::max<std::int64_t>(trunc_left + 1, -1);
    if (first <= right_site()) {
      const auto n = static_cast<Eigen::Index>(right_site() - first + 1);
      const auto here = static_cast<Eigen::Index>(first - trunc_left);
      const auto there = static_cast<Eigen::Index>(first - far);
      trunc_error_bound_ = std::max({max_relative_change(mu_.segment(here, n), mu2.segment(there, n)),
                                     max_relative_change(m2_.segment(here, n), m22.segment(there, n)),
                                     max_relative_change(m3_.segment(here, n), m32.segment(there, n))});
    }
  }
}

Eigen::Index QuenchedMomentTable::index(std::int64_t k) const {
  if (k < trunc_left_ || k > right_site()) {
    throw RangeError("site " + std::to_string(k) + " outside moment table [" +
                     std::to_string(trunc_left_) + ", " + std::to_string(right_site()) + "]");
  }
  return static_cast<Eigen::Index>(k - trunc_left_);
}

double QuenchedMomentTable::mean_T(std::int64_t n) const {
  if (n < 0 || n > n_max()) throw RangeError("E[T_n]: n = " + std::to_string(n) + " out of range");
  return mean_T_[static_cast<Eigen::Index>(n)];
}

double QuenchedMomentTable::var_T(std::int64_t n) const {
  if (n < 0 || n > n_max()) throw RangeError("Var(T_n): n = " + std::to_string(n) + " out of range");
  return var_T_[static_cast<Eigen::Index>(n)];
}

PrefixSums prefix_sums(const QuenchedMomentTable& table, std::int64_t n_max) {
  if (n_max < 0 || n_max > table.n_max()) throw RangeError("prefix_sums: n_max out of range");
  const auto len = static_cast<Eigen::Index>(n_max + 1);
  return {table.mean_T_values().head(len), table.var_T_values().head(len)};
}

double centering_Zn(const QuenchedMomentTable& table, std::int64_t n, double speed) {
  if (n < 0) throw RangeError("centering_Zn: n must be nonnegative");
  const auto m = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * speed));
  if (m > table.n_max()) {
    throw RangeError("centering_Zn: floor(n v) = " + std::to_string(m) +
                     " exceeds table range " + std::to_string(table.n_max()));
  }
  return speed * (table.mean_T(m) - static_cast<double>(m) / speed);
}

LawConstants law_constants_from_moments(double r1, double r2) {
  if (!(r1 < 1.0) || !(r2 < 1.0)) throw RegimeError("law constants need r1 < 1 and r2 < 1");
  LawConstants c;
  c.r1 = r1;
  c.r2 = r2;
  c.speed = (1.0 - r1) / (1.0 + r1);
  c.inv_speed = (1.0 + r1) / (1.0 - r1);
  c.mu0_sq_mean = (1.0 + 3.0 * r1 + 3.0 * r2 + r1 * r2) / ((1.0 - r1) * (1.0 - r2));
  c.sigma2 = 4.0 * (1.0 + r1) * (r1 + r2) / ((1.0 - r2) * (1.0 - r1) * (1.0 - r1));
  return c;
}

LawConstants law_constants(const EnvDistribution& dist) {
  const double kappa = solve_kappa(dist);
  if (!(kappa > 2.0)) {
    throw RegimeError("law constants need kappa > 2 (kappa = " + std::to_string(kappa) + ")");
  }
  return law_constants_from_moments(moment_rp(dist, 1.0), moment_rp(dist, 2.0));
}

TruncationChoice truncation_control(const EnvironmentWindow& env, double tol) {
  if (!(log_rho_mean(env.distribution()) < 0.0)) {
    throw RegimeError("truncation_control: E[log rho] >= 0");
  }
  const std::int64_t right = std::max<std::int64_t>(env.right_index(), 0);
  constexpr std::int64_t kMaxL = std::int64_t{1} << 24;
  for (std::int64_t L = kMinTruncation; L <= kMaxL; L *= 2) {
    const EnvironmentWindow wide = env.resized(-2 * L, right);
    const Eigen::VectorXd& rho_all = wide.rho_values();
    const Eigen::VectorXd rho_far = rho_all;
    const Eigen::VectorXd rho_near = rho_all.tail(rho_all.size() - L);

    const Eigen::VectorXd mu_f = mu_recursion(rho_far);
    const Eigen::VectorXd m2_f = m2_recursion(rho_far, mu_f);
    const Eigen::VectorXd m3_f = m3_recursion(rho_far, mu_f, m2_f);
    const Eigen::VectorXd mu_n = mu_recursion(rho_near);
    const Eigen::VectorXd m2_n = m2_recursion(rho_near, mu_n);
    const Eigen::VectorXd m3_n = m3_recursion(rho_near, mu_n, m2_n);

    // Sites -1..right sit at offset (L - 1) in the near block and (2L - 1) in the far one.
    const auto n = static_cast<Eigen::Index>(right + 2);
    const auto a = static_cast<Eigen::Index>(L - 1);
    const auto b = static_cast<Eigen::Index>(2 * L - 1);
    const double change =
        std::max({max_relative_change(mu_n.segment(a, n), mu_f.segment(b, n)),
                  max_relative_change(m2_n.segment(a, n), m2_f.segment(b, n)),
                  max_relative_change(m3_n.segment(a, n), m3_f.segment(b, n))});
    if (change < tol) return {L, change};
  }
  throw NumericError("truncation_control: no reflection distance up to 2^24 meets tolerance");
}

}  // namespace rwre
