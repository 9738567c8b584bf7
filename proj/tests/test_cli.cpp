#include <doctest.h>

#include <filesystem>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/cli.hpp"
#include "rwre/config.hpp"
#include "rwre/io.hpp"

using namespace rwre;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rwre-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rwre");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path output_dir(const Run& r) {
  const auto pos = r.err.find("output: ");
  REQUIRE(pos != std::string::npos);
  auto line = r.err.substr(pos + 8);
  return line.substr(0, line.find('\n'));
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("law and grid parsing") {
  CHECK(std::get<BetaLaw>(parse_law("beta:7,1")).alpha == 7.0);
  CHECK(std::get<Degenerate>(parse_law("degenerate:2/3")).p == doctest::Approx(2.0 / 3.0).epsilon(1e-16));
  CHECK(std::get<TwoPoint>(parse_law("twopoint:0.4, 0.9, 0.3")).q == 0.3);
  CHECK(std::get<UniformInterval>(parse_law("uniform:0.55,0.95")).hi == 0.95);
  CHECK_THROWS_AS(parse_law("beta:7"), ConfigError);
  CHECK_THROWS_AS(parse_law("gamma:1,2"), ConfigError);
  CHECK_THROWS_AS(parse_law("beta"), ConfigError);
  CHECK_THROWS_AS(parse_law("degenerate:1.5"), ConfigError);
  CHECK_THROWS_AS(parse_law("degenerate:1/0"), ConfigError);
  CHECK_THROWS_AS(parse_law("beta:x,1"), ConfigError);

  for (const std::string s : {"beta:7,1", "degenerate:0.75", "twopoint:0.4,0.9,0.3", "uniform:0.55,0.95"})
    CHECK(format_law(parse_law(s)) == s);
  const auto d = parse_law(format_law(Degenerate{2.0 / 3.0}));
  CHECK(std::get<Degenerate>(d).p == 2.0 / 3.0);

  CHECK(parse_n_grid("128..1024") == std::vector<std::int64_t>{128, 256, 512, 1024});
  CHECK(parse_n_grid("100, 200,400") == std::vector<std::int64_t>{100, 200, 400});
  CHECK_THROWS_AS(parse_n_grid("100..1000"), ConfigError);
  CHECK_THROWS_AS(parse_n_grid("200,100"), ConfigError);
  CHECK_THROWS_AS(parse_n_grid("0,1"), ConfigError);
  CHECK_THROWS_AS(parse_n_grid(""), ConfigError);
}

TEST_CASE("config files") {
  TempDir tmp;
  const auto p = tmp.path / "c.toml";
  SUBCASE("full file") {
    write_file(p, R"([env]
type = "beta"
alpha = 5.0
beta = 1.0

[experiment]
target = "G"
n_grid = [64, 128, 256, 512]
n_envs = 4
seed = 99

[tolerances]
slope_band = 0.2

[verify]
seeds = 2
quick = true
)");
    RunConfig cfg;
    apply_config_file(cfg, p.string());
    CHECK(std::get<BetaLaw>(cfg.dist).alpha == 5.0);
    CHECK(cfg.target == RateTarget::G);
    CHECK(cfg.n_grid.size() == 4);
    CHECK(cfg.n_envs == 4);
    CHECK(cfg.seed == 99);
    CHECK(cfg.tol.slope_band == 0.2);
    CHECK(cfg.verify_seeds == 2);
    CHECK(cfg.quick);
    const auto j = to_json(cfg);
    CHECK(j["env"]["law"] == "beta:5,1");
    CHECK(j["experiment"]["seed"] == 99);
  }
  SUBCASE("law string and range grid") {
    write_file(p, "[env]\nlaw = \"degenerate:2/3\"\n[experiment]\nn_grid = \"32..256\"\n");
    RunConfig cfg;
    apply_config_file(cfg, p.string());
    CHECK(cfg.n_grid.front() == 32);
  }
  SUBCASE("errors") {
    RunConfig cfg;
    write_file(p, "[experiment]\nbogus = 1\n");
    CHECK_THROWS_AS(apply_config_file(cfg, p.string()), ConfigError);
    write_file(p, "[experiment]\nn_envs = \"four\"\n");
    CHECK_THROWS_AS(apply_config_file(cfg, p.string()), ConfigError);
    write_file(p, "[nowhere]\nx = 1\n");
    CHECK_THROWS_AS(apply_config_file(cfg, p.string()), ConfigError);
    write_file(p, "[env]\ntype = \"beta\"\nalpha = 5.0\n");
    CHECK_THROWS_AS(apply_config_file(cfg, p.string()), ConfigError);
    write_file(p, "[env\n");
    CHECK_THROWS_AS(apply_config_file(cfg, p.string()), ConfigError);
    CHECK_THROWS_AS(apply_config_file(cfg, (tmp.path / "missing.toml").string()), ConfigError);
  }
}

TEST_CASE("csv and digests") {
  CsvWriter csv({"a", "b"});
  csv.add_row({"1", "x,y"});
  csv.add_row({"say \"hi\"", ""});
  CHECK(csv.str() == "a,b\r\n1,\"x,y\"\r\n\"say \"\"hi\"\"\",\r\n");
  CHECK_THROWS(csv.add_row({"1"}));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(kInf) == "inf");
  CHECK(json_number(kInf) == "inf");
}

TEST_CASE("module exports") {
  const auto env = sample_environment(Degenerate{2.0 / 3.0}, -64, 10, 1);
  const QuenchedMomentTable t(env, -64);
  const auto tc = table_csv(t);
  CHECK(tc.rfind("k,mu,m2,m3,var\r\n-64,1,1,1,0\r\n", 0) == 0);
  CHECK(std::count(tc.begin(), tc.end(), '\n') == 76);
  const auto pc = prefix_csv(t, 3, 1.0 / 3.0);
  const auto last = pc.substr(pc.rfind("\r\n3,") + 2);
  double mean = 0, var = 0;
  REQUIRE(std::sscanf(last.c_str(), "3,%lf,%lf,", &mean, &var) == 2);
  CHECK(mean == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(var == doctest::Approx(72.0).epsilon(1e-12));

  const auto law = first_passage_cdf(env, 1, 3, -64);
  CHECK(lattice_csv(law) == "value,pmf,cdf\r\n1," + format_double(2.0 / 3.0) + "," + format_double(2.0 / 3.0) +
                                "\r\n3," + format_double(law.probs[1]) + "," +
                                format_double(2.0 / 3.0 + law.probs[1]) + "\r\n");
  SimBatch b;
  b.samples = {3, kTruncatedSample};
  CHECK(batch_csv(b) == "sample,value\r\n0,3\r\n1,inf\r\n");
}

TEST_CASE("exit codes") {
  TempDir tmp;
  const std::string out = tmp.path.string();
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"env-info", "--bogus"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"env-info", "--law", "beta:7", "--out", out}).code == kExitConfig);
  CHECK(run({"rates", "--n", "", "--out", out}).code == kExitConfig);
  CHECK(run({"rates", "--envs", "0", "--out", out}).code == kExitConfig);
  CHECK(run({"env-info", "--config", (tmp.path / "nope.toml").string(), "--out", out}).code == kExitConfig);
  CHECK(run({"env-info", "--law", "degenerate:0.4", "--out", out}).code == kExitRegime);
  CHECK(run({"rates", "--law", "beta:2.5,1", "--out", out}).code == kExitRegime);
  CHECK(run({"verify", "--law", "beta:5,1", "--inject-fault", "nonsense", "--out", out}).code == kExitConfig);
  CHECK(exit_code_for(ErrorKind::horizon) == kExitNumeric);
  CHECK(exit_code_for(ErrorKind::range) == kExitNumeric);
  CHECK(exit_code_for(ErrorKind::parameter) == kExitConfig);
}

TEST_CASE("env-info output") {
  TempDir tmp;
  const auto r = run({"env-info", "--law", "beta:5,1", "--out", tmp.path.string()});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["kappa"].get<double>() == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(j["speed"].get<double>() == doctest::Approx(0.6));
  CHECK(j["sigma2"].get<double>() == doctest::Approx(40.0 / 9.0));
  const auto dir = output_dir(r);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "data.csv"));
  CHECK(dir.parent_path().filename() == "env-info");
}

TEST_CASE("rates runs are reproducible and manifests carry digests") {
  TempDir tmp;
  const std::vector<std::string> args{"rates", "--law",  "beta:7,1", "--n",   "32..256", "--envs",
                                      "2",     "--seed", "5",        "--out", tmp.path.string()};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  const auto da = output_dir(a), db = output_dir(b);
  CHECK(da != db);
  const auto ma = read_json(da / "manifest.json"), mb = read_json(db / "manifest.json");
  CHECK(ma["status"] == "ok");
  CHECK(ma["master_seed"] == 5);
  CHECK(ma["command"] == "rates");
  CHECK(ma["config"] == mb["config"]);
  auto digest = [](const nlohmann::json& m, const std::string& name) {
    for (const auto& f : m["files"])
      if (f["name"] == name) return f["sha256"].get<std::string>();
    return std::string();
  };
  CHECK_FALSE(digest(ma, "data.csv").empty());
  CHECK(digest(ma, "data.csv") == digest(mb, "data.csv"));
  CHECK(digest(ma, "summary.json") == digest(mb, "summary.json"));
  for (const auto& f : ma["files"]) {
    CHECK(sha256_file(da / f["name"].get<std::string>()) == f["sha256"]);
    CHECK(fs::file_size(da / f["name"].get<std::string>()) == f["bytes"].get<std::uintmax_t>());
  }
  std::ifstream csv(da / "data.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "seed,n,statistic,normalized_statistic,distance,bound,tail_mass\r");
}

TEST_CASE("verify quick and the injected fault") {
  TempDir tmp;
  const auto ok = run({"verify", "--quick", "--law", "beta:5,1", "--out", tmp.path.string()});
  CHECK(ok.code == kExitOk);
  CHECK(ok.err.find("FAIL") == std::string::npos);
  const auto bad =
      run({"verify", "--quick", "--law", "beta:5,1", "--inject-fault", "v-sign", "--out", tmp.path.string()});
  CHECK(bad.code == kExitNumeric);
  CHECK(bad.err.find("check=variance_two_route") != std::string::npos);
  const auto m = read_json(output_dir(bad) / "manifest.json");
  CHECK(m["status"] == "failed");
}
