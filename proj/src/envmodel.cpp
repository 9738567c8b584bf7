#include "rwre/envmodel.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <sstream>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kQuadTol = 1e-10;
constexpr unsigned kQuadDepth = 20;

bool open_unit_interval(double x) { return x > 0.0 && x < 1.0; }

double rho_of(double w) { return (1.0 - w) / w; }

template <class F>
double gk(F f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, kQuadDepth,
                                                                       kQuadTol);
}

// Integral over (0,1) of w^(a-1) (1-w)^(b-1) h(w) dw with a, b > 0. The unit
// interval is split at 1/2 and each endpoint singularity is removed by a power
// substitution (w = u^(1/a) on the left, 1-w = s^(1/b) on the right), so the
// Gauss-Kronrod rule only ever sees integrands that are bounded at the ends.
template <class H>
double integrate_beta_kernel(double a, double b, H h) {
  const double left = gk(
      [&](double u) {
        const double w = std::pow(u, 1.0 / a);
        return std::pow(1.0 - w, b - 1.0) * h(w);
      },
      0.0, std::pow(0.5, a));
  const double right = gk(
      [&](double s) {
        const double one_minus_w = std::pow(s, 1.0 / b);
        const double w = 1.0 - one_minus_w;
        return std::pow(w, a - 1.0) * h(w);
      },
      0.0, std::pow(0.5, b));
  return left / a + right / b;
}

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace

void validate(const EnvDistribution& dist) {
  std::visit(overloaded{
                 [](const TwoPoint& d) {
                   if (!open_unit_interval(d.a) || !open_unit_interval(d.b))
                     throw ParameterError("two-point law: support points must lie in (0,1)");
                   if (!open_unit_interval(d.q))
                     throw ParameterError("two-point law: weight q must lie in (0,1)");
                 },
                 [](const BetaLaw& d) {
                   if (!(d.alpha > 0.0) || !(d.beta > 0.0) || !std::isfinite(d.alpha) ||
                       !std::isfinite(d.beta))
                     throw ParameterError("beta law: alpha and beta must be positive");
                 },
                 [](const UniformInterval& d) {
                   if (!open_unit_interval(d.lo) || !open_unit_interval(d.hi) || !(d.lo < d.hi))
                     throw ParameterError("uniform law: need 0 < lo < hi < 1");
                 },
                 [](const Degenerate& d) {
                   if (!open_unit_interval(d.p))
                     throw ParameterError("degenerate law: p must lie in (0,1)");
                 },
             },
             dist);
}

std::string describe(const EnvDistribution& dist) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const TwoPoint& d) { os << "twopoint(" << d.a << "," << d.b << "," << d.q << ")"; },
                 [&](const BetaLaw& d) { os << "beta(" << d.alpha << "," << d.beta << ")"; },
                 [&](const UniformInterval& d) { os << "uniform(" << d.lo << "," << d.hi << ")"; },
                 [&](const Degenerate& d) { os << "degenerate(" << d.p << ")"; },
             },
             dist);
  return os.str();
}

double omega_quantile(const EnvDistribution& dist, double u) {
  const double w = std::visit(
      overloaded{
          [u](const TwoPoint& d) { return u < d.q ? d.a : d.b; },
          [u](const BetaLaw& d) {
            if (d.beta == 1.0) return std::pow(u, 1.0 / d.alpha);
            if (d.alpha == 1.0) return -std::expm1(std::log1p(-u) / d.beta);
            return boost::math::ibeta_inv(d.alpha, d.beta, u);
          },
          [u](const UniformInterval& d) { return d.lo + (d.hi - d.lo) * u; },
          [](const Degenerate& d) { return d.p; },
      },
      dist);
  // Continuous laws can round onto the boundary; keep rho finite and positive.
  return std::clamp(w, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

double rho_ess_sup(const EnvDistribution& dist) {
  return std::visit(overloaded{
                        [](const TwoPoint& d) { return std::max(rho_of(d.a), rho_of(d.b)); },
                        [](const BetaLaw&) { return kInf; },
                        [](const UniformInterval& d) { return rho_of(d.lo); },
                        [](const Degenerate& d) { return rho_of(d.p); },
                    },
                    dist);
}

double moment_rp_quadrature(const EnvDistribution& dist, double p) {
  validate(dist);
  if (p < 0.0) throw ParameterError("moment_rp: p must be nonnegative");
  return std::visit(
      overloaded{
          [p](const BetaLaw& d) -> double {
            const double a = d.alpha - p;
            const double b = d.beta + p;
            if (a <= 0.0) return kInf;
            const double integral = integrate_beta_kernel(a, b, [](double) { return 1.0; });
            return integral * std::exp(-log_beta_fn(d.alpha, d.beta));
          },
          [p](const UniformInterval& d) -> double {
            const double integral =
                gk([p](double w) { return std::pow(rho_of(w), p); }, d.lo, d.hi);
            return integral / (d.hi - d.lo);
          },
          [](const auto&) -> double {
            throw ParameterError("moment_rp_quadrature: law has no density");
          },
      },
      dist);
}

double moment_rp(const EnvDistribution& dist, double p) {
  validate(dist);
  if (p < 0.0) throw ParameterError("moment_rp: p must be nonnegative");
  if (p == 0.0) return 1.0;
  return std::visit(
      overloaded{
          [p](const TwoPoint& d) {
            return d.q * std::pow(rho_of(d.a), p) + (1.0 - d.q) * std::pow(rho_of(d.b), p);
          },
          [p](const BetaLaw& d) {
            if (p >= d.alpha) return kInf;
            // Gamma(alpha-p) Gamma(beta+p) / (Gamma(alpha) Gamma(beta))
            return std::exp((std::lgamma(d.alpha - p) - std::lgamma(d.alpha)) +
                            (std::lgamma(d.beta + p) - std::lgamma(d.beta)));
          },
          [&dist, p](const UniformInterval&) { return moment_rp_quadrature(dist, p); },
          [p](const Degenerate& d) { return std::pow(rho_of(d.p), p); },
      },
      dist);
}

double log_rho_mean(const EnvDistribution& dist) {
  validate(dist);
  return std::visit(
      overloaded{
          [](const TwoPoint& d) {
            return d.q * std::log(rho_of(d.a)) + (1.0 - d.q) * std::log(rho_of(d.b));
          },
          [](const BetaLaw& d) {
            return boost::math::digamma(d.beta) - boost::math::digamma(d.alpha);
          },
          [](const UniformInterval& d) {
            // Antiderivative of log(1-w) - log(w).
            auto prim = [](double w) {
              return -(1.0 - w) * std::log1p(-w) - w * std::log(w) + 1.0;
            };
            return (prim(d.hi) - prim(d.lo)) / (d.hi - d.lo);
          },
          [](const Degenerate& d) { return std::log(rho_of(d.p)); },
      },
      dist);
}

double log_rho_mean_quadrature(const EnvDistribution& dist) {
  validate(dist);
  return std::visit(
      overloaded{
          [](const BetaLaw& d) -> double {
            const double integral = integrate_beta_kernel(
                d.alpha, d.beta, [](double w) { return std::log1p(-w) - std::log(w); });
            return integral * std::exp(-log_beta_fn(d.alpha, d.beta));
          },
          [](const UniformInterval& d) -> double {
            return gk([](double w) { return std::log(rho_of(w)); }, d.lo, d.hi) /
                   (d.hi - d.lo);
          },
          [](const auto&) -> double {
            throw ParameterError("log_rho_mean_quadrature: law has no density");
          },
      },
      dist);
}

double solve_kappa(const EnvDistribution& dist, double tol) {
  validate(dist);
  if (!(tol > 0.0)) throw ParameterError("solve_kappa: tolerance must be positive");
  if (!(log_rho_mean(dist) < 0.0))
    throw RegimeError("solve_kappa: E[log rho] >= 0, the walk is not transient to the right");
  if (rho_ess_sup(dist) < 1.0) return kInf;

  double hi = 64.0;
  while (moment_rp(dist, hi) < 1.0) {
    hi *= 2.0;
    if (hi > 512.0) return kInf;
  }
  double lo = 0.0;  // r_p < 1 just above 0 because E[log rho] < 0
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (moment_rp(dist, mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::string to_string(RateTag tag) {
  switch (tag) {
    case RateTag::BETn_fast: return "BETn_fast";
    case RateTag::BETn_slow: return "BETn_slow";
    case RateTag::BETnds_fast: return "BETnds_fast";
    case RateTag::BETnds_slow: return "BETnds_slow";
    case RateTag::BEXn_as: return "BEXn_as";
    case RateTag::BEXn_ip_fast: return "BEXn_ip_fast";
    case RateTag::BEXn_ip_slow: return "BEXn_ip_slow";
    case RateTag::none: return "none";
  }
  return "none";
}

std::vector<RateTag> classify_regime(double kappa) {
  if (!(kappa > 2.0)) return {RateTag::none};
  std::vector<RateTag> tags;
  tags.push_back(kappa > 3.0 ? RateTag::BETn_fast : RateTag::BETn_slow);
  tags.push_back(kappa > 4.0 ? RateTag::BETnds_fast : RateTag::BETnds_slow);
  tags.push_back(RateTag::BEXn_as);
  tags.push_back(kappa >= 12.0 / 5.0 ? RateTag::BEXn_ip_fast : RateTag::BEXn_ip_slow);
  return tags;
}

bool RegimeReport::has(RateTag t) const {
  return std::find(applicable_theorems.begin(), applicable_theorems.end(), t) !=
         applicable_theorems.end();
}

RegimeReport regime_report(const EnvDistribution& dist, double kappa_tol) {
  RegimeReport r;
  r.log_rho_mean = log_rho_mean(dist);
  r.kappa = solve_kappa(dist, kappa_tol);
  r.r1 = moment_rp(dist, 1.0);
  r.r2 = moment_rp(dist, 2.0);
  r.applicable_theorems = classify_regime(r.kappa);
  return r;
}

double site_omega(const EnvDistribution& dist, std::uint64_t seed, std::int64_t x) {
  return omega_quantile(dist, site_uniform(seed, x));
}

EnvironmentWindow::EnvironmentWindow(EnvDistribution dist, std::int64_t left, std::int64_t right,
                                     std::uint64_t seed)
    : dist_(dist), left_(left), seed_(seed) {
  validate(dist_);
  if (left > right) throw ParameterError("environment window: left > right");
  const Eigen::Index n = static_cast<Eigen::Index>(right - left + 1);
  omega_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) omega_[i] = site_omega(dist_, seed_, left_ + i);
  rho_ = (1.0 - omega_.array()) / omega_.array();
}

Eigen::Index EnvironmentWindow::offset(std::int64_t x) const {
  if (!contains(x)) {
    throw RangeError("site " + std::to_string(x) + " outside environment window [" +
                     std::to_string(left_) + ", " + std::to_string(right_index()) + "]");
  }
  return static_cast<Eigen::Index>(x - left_);
}

EnvironmentWindow EnvironmentWindow::resized(std::int64_t left, std::int64_t right) const {
  return EnvironmentWindow(dist_, left, right, seed_);
}

EnvironmentWindow sample_environment(const EnvDistribution& dist, std::int64_t left,
                                     std::int64_t right, std::uint64_t seed) {
  return EnvironmentWindow(dist, left, right, seed);
}

}  // namespace rwre
