#include "rwre/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <toml.hpp>

#include "rwre/error.hpp"

namespace rwre {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_plain(const std::string& s) {
  if (s.empty()) throw ConfigError("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("not a number: '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("not an integer: '" + s + "'");
  }
  return v;
}

bool is_power_of_two(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

std::string fmt(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Typed getters that reject wrong value types instead of silently ignoring them.
template <typename T>
T get(const toml::node& node, const std::string& where) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (node.is_integer()) return *node.value<std::int64_t>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (node.is_boolean()) return *node.value<bool>();
  } else {
    if (node.is_string()) return *node.value<std::string>();
  }
  throw ConfigError("config key " + where + " has the wrong type");
}

std::vector<std::int64_t> grid_from_node(const toml::node& node, const std::string& where) {
  if (node.is_string()) return parse_n_grid(*node.value<std::string>());
  if (const auto* arr = node.as_array()) {
    std::vector<std::int64_t> g;
    for (const auto& el : *arr) g.push_back(get<std::int64_t>(el, where));
    return g;
  }
  throw ConfigError("config key " + where + " must be a string or an integer array");
}

EnvDistribution law_from_table(const toml::table& env) {
  if (const auto* law = env.get("law")) {
    if (env.size() != 1) throw ConfigError("[env] takes either 'law' or 'type' with parameters");
    return parse_law(get<std::string>(*law, "env.law"));
  }
  const auto* type_node = env.get("type");
  if (!type_node) throw ConfigError("[env] needs 'law' or 'type'");
  const std::string type = get<std::string>(*type_node, "env.type");
  auto num = [&](const char* key) {
    const auto* n = env.get(key);
    if (!n) throw ConfigError(std::string("[env] missing '") + key + "' for type " + type);
    return get<double>(*n, std::string("env.") + key);
  };
  EnvDistribution dist;
  if (type == "beta") {
    dist = BetaLaw{num("alpha"), num("beta")};
  } else if (type == "degenerate") {
    dist = Degenerate{num("p")};
  } else if (type == "twopoint") {
    dist = TwoPoint{num("a"), num("b"), num("q")};
  } else if (type == "uniform") {
    dist = UniformInterval{num("lo"), num("hi")};
  } else {
    throw ConfigError("unknown [env] type '" + type + "'");
  }
  try {
    validate(dist);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return dist;
}

}  // namespace

double parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_plain(s);
  const double num = parse_plain(trim(s.substr(0, slash)));
  const double den = parse_plain(trim(s.substr(slash + 1)));
  if (den == 0.0) throw ConfigError("zero denominator in '" + s + "'");
  return num / den;
}

EnvDistribution parse_law(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("law '" + s + "' needs the form name:params");
  const std::string name = trim(s.substr(0, colon));
  std::vector<double> p;
  for (const auto& part : split(s.substr(colon + 1), ',')) p.push_back(parse_number(part));
  auto need = [&](std::size_t n) {
    if (p.size() != n) {
      throw ConfigError("law '" + name + "' takes " + std::to_string(n) + " parameter(s), got " +
                        std::to_string(p.size()));
    }
  };
  EnvDistribution dist;
  if (name == "beta") {
    need(2);
    dist = BetaLaw{p[0], p[1]};
  } else if (name == "degenerate") {
    need(1);
    dist = Degenerate{p[0]};
  } else if (name == "twopoint") {
    need(3);
    dist = TwoPoint{p[0], p[1], p[2]};
  } else if (name == "uniform") {
    need(2);
    dist = UniformInterval{p[0], p[1]};
  } else {
    throw ConfigError("unknown law '" + name + "' (beta, degenerate, twopoint, uniform)");
  }
  try {
    validate(dist);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return dist;
}

std::string format_law(const EnvDistribution& dist) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, BetaLaw>) return "beta:" + fmt(d.alpha) + "," + fmt(d.beta);
        if constexpr (std::is_same_v<T, Degenerate>) return "degenerate:" + fmt(d.p);
        if constexpr (std::is_same_v<T, TwoPoint>)
          return "twopoint:" + fmt(d.a) + "," + fmt(d.b) + "," + fmt(d.q);
        if constexpr (std::is_same_v<T, UniformInterval>) return "uniform:" + fmt(d.lo) + "," + fmt(d.hi);
      },
      dist);
}

std::vector<std::int64_t> parse_n_grid(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("empty n grid");
  std::vector<std::int64_t> g;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::int64_t lo = parse_int(trim(s.substr(0, dots)));
    const std::int64_t hi = parse_int(trim(s.substr(dots + 2)));
    if (!is_power_of_two(lo) || !is_power_of_two(hi) || hi < lo) {
      throw ConfigError("range grid '" + s + "' needs powers of two lo <= hi");
    }
    for (std::int64_t n = lo; n <= hi; n *= 2) g.push_back(n);
  } else {
    for (const auto& part : split(s, ',')) g.push_back(parse_int(part));
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 1) throw ConfigError("n grid entries must be >= 1");
    if (i > 0 && g[i] <= g[i - 1]) throw ConfigError("n grid must be strictly increasing");
  }
  return g;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "cannot parse " << path << ": " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }

  for (const auto& [key, node] : root) {
    const std::string section(key.str());
    const toml::table* tbl = node.as_table();
    if (!tbl) throw ConfigError("top-level key '" + section + "' must be a table");

    if (section == "env") {
      cfg.dist = law_from_table(*tbl);
      continue;
    }
    for (const auto& [k, v] : *tbl) {
      const std::string name(k.str());
      const std::string where = section + "." + name;
      if (section == "experiment") {
        if (name == "target") cfg.target = parse_rate_target(get<std::string>(v, where));
        else if (name == "n_grid") cfg.n_grid = grid_from_node(v, where);
        else if (name == "n_envs") cfg.n_envs = get<std::int64_t>(v, where);
        else if (name == "epsilon") cfg.epsilon = get<double>(v, where);
        else if (name == "epsilon_prime") cfg.epsilon_prime = get<double>(v, where);
        else if (name == "seed") cfg.seed = static_cast<std::uint64_t>(get<std::int64_t>(v, where));
        else throw ConfigError("unknown key " + where);
      } else if (section == "tolerances") {
        if (name == "slope_band") cfg.tol.slope_band = get<double>(v, where);
        else if (name == "envelope_slack") cfg.tol.envelope_slack = get<double>(v, where);
        else if (name == "envelope_pass_fraction") cfg.tol.envelope_pass_fraction = get<double>(v, where);
        else if (name == "tail_tol") cfg.tol.tail_tol = get<double>(v, where);
        else if (name == "trunc_tol") cfg.tol.trunc_tol = get<double>(v, where);
        else if (name == "reflect_tol") cfg.tol.reflect_tol = get<double>(v, where);
        else throw ConfigError("unknown key " + where);
      } else if (section == "verify") {
        if (name == "A1") cfg.A1 = get<double>(v, where);
        else if (name == "mc_samples") cfg.mc_samples = get<std::int64_t>(v, where);
        else if (name == "dkw_delta") cfg.dkw_delta = get<double>(v, where);
        else if (name == "seeds") cfg.verify_seeds = get<std::int64_t>(v, where);
        else if (name == "quick") cfg.quick = get<bool>(v, where);
        else throw ConfigError("unknown key " + where);
      } else {
        throw ConfigError("unknown table [" + section + "]");
      }
    }
  }
  if (cfg.n_envs < 1) throw ConfigError("experiment.n_envs must be >= 1");
  if (cfg.mc_samples < 1) throw ConfigError("verify.mc_samples must be >= 1");
  if (cfg.verify_seeds < 1) throw ConfigError("verify.seeds must be >= 1");
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["command"] = cfg.command;
  j["env"] = {{"law", format_law(cfg.dist)}};
  j["experiment"] = {{"target", to_string(cfg.target)}, {"n_grid", cfg.n_grid},
                     {"n_envs", cfg.n_envs},           {"epsilon", cfg.epsilon},
                     {"epsilon_prime", cfg.epsilon_prime}, {"seed", cfg.seed}};
  j["tolerances"] = {{"slope_band", cfg.tol.slope_band},
                     {"envelope_slack", cfg.tol.envelope_slack},
                     {"envelope_pass_fraction", cfg.tol.envelope_pass_fraction},
                     {"tail_tol", cfg.tol.tail_tol},
                     {"trunc_tol", cfg.tol.trunc_tol},
                     {"reflect_tol", cfg.tol.reflect_tol}};
  j["verify"] = {{"A1", cfg.A1},
                 {"mc_samples", cfg.mc_samples},
                 {"dkw_delta", cfg.dkw_delta},
                 {"seeds", cfg.verify_seeds},
                 {"quick", cfg.quick}};
  if (!cfg.inject_fault.empty()) j["inject_fault"] = cfg.inject_fault;
  return j;
}

}  // namespace rwre
