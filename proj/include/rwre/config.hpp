#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/envmodel.hpp"
#include "rwre/ratelab.hpp"

namespace rwre {

/// Resolved settings for one CLI run. Defaults are overridden first by the
/// TOML file, then by command-line flags.
struct RunConfig {
  std::string command;
  EnvDistribution dist = Degenerate{2.0 / 3.0};
  RateTarget target = RateTarget::Fbar;
  std::vector<std::int64_t> n_grid = dyadic_grid(7, 10);
  std::int64_t n_envs = 20;
  double epsilon = 0.1;
  double epsilon_prime = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = "out";
  bool quick = false;
  RateTolerances tol;
  // verify
  double A1 = kDefaultA1;
  std::int64_t mc_samples = 20000;
  double dkw_delta = 0.01;
  std::int64_t verify_seeds = 3;
  std::string inject_fault;  // "" or "v-sign"
};

/// Law strings: "beta:5,1", "degenerate:2/3", "twopoint:a,b,q", "uniform:lo,hi".
/// Numbers may be written as fractions. Throws ConfigError.
EnvDistribution parse_law(const std::string& s);
std::string format_law(const EnvDistribution& dist);

/// "128..16384" (dyadic, both ends powers of two) or "100,200,400". Throws ConfigError.
std::vector<std::int64_t> parse_n_grid(const std::string& s);

/// Parses a number that may be a fraction "a/b". Throws ConfigError.
double parse_number(const std::string& s);

/// Applies a TOML file with optional [env], [experiment], [tolerances] and
/// [verify] tables on top of `cfg`. Throws ConfigError on unreadable files,
/// syntax errors, unknown keys or bad values.
void apply_config_file(RunConfig& cfg, const std::string& path);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace rwre
