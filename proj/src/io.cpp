#include "rwre/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "rwre/error.hpp"

#ifndef RWRE_VERSION
#define RWRE_VERSION "0.0.0"
#endif

namespace rwre {

namespace fs = std::filesystem;

const char* version_tag() { return RWRE_VERSION; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

nlohmann::json json_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return nullptr;
  return x;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw NumericError("csv row width does not match header");
  rows_.push_back(std::move(row));
}

namespace {

void put_field(std::ostringstream& os, const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) {
    os << f;
    return;
  }
  os << '"';
  for (char c : f) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

void put_row(std::ostringstream& os, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    put_field(os, row[i]);
  }
  os << "\r\n";
}

}  // namespace

std::string CsvWriter::str() const {
  std::ostringstream os;
  put_row(os, header_);
  for (const auto& r : rows_) put_row(os, r);
  return os.str();
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw NumericError("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

std::string utc_timestamp(bool compact) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, compact ? "%Y%m%dT%H%M%SZ" : "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunDirectory::RunDirectory(const fs::path& root, const std::string& command, std::uint64_t seed)
    : command_(command), seed_(seed), started_(utc_timestamp(false)) {
  const fs::path base = root / command;
  const std::string stem = utc_timestamp(true) + "-" + std::to_string(seed);
  dir_ = base / stem;
  for (int i = 1; fs::exists(dir_); ++i) dir_ = base / (stem + "." + std::to_string(i));
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void RunDirectory::write(const std::string& name, const std::string& contents) {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
  out << contents;
  files_.push_back(name);
}

void RunDirectory::write_json(const std::string& name, const nlohmann::json& j) {
  write(name, j.dump(2) + "\n");
}

void RunDirectory::finish(const nlohmann::json& config, const std::string& status) {
  nlohmann::json m;
  m["command"] = command_;
  m["config"] = config;
  m["master_seed"] = seed_;
  m["version"] = version_tag();
  m["started"] = started_;
  m["finished"] = utc_timestamp(false);
  m["status"] = status;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : files_) {
    files.push_back({{"name", f}, {"sha256", sha256_file(dir_ / f)}, {"bytes", fs::file_size(dir_ / f)}});
  }
  m["files"] = files;
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest in " + dir_.string());
  out << m.dump(2) << "\n";
}

std::string table_csv(const QuenchedMomentTable& table) {
  CsvWriter csv({"k", "mu", "m2", "m3", "var"});
  for (std::int64_t k = table.trunc_left(); k <= table.right_site(); ++k) {
    csv.add_row({std::to_string(k), format_double(table.mu(k)), format_double(table.m2(k)),
                 format_double(table.m3(k)), format_double(table.var(k))});
  }
  return csv.str();
}

std::string prefix_csv(const QuenchedMomentTable& table, std::int64_t n_max, double speed) {
  CsvWriter csv({"n", "mean_Tn", "var_Tn", "Zn"});
  for (std::int64_t n = 0; n <= n_max; ++n) {
    csv.add_row({std::to_string(n), format_double(table.mean_T(n)), format_double(table.var_T(n)),
                 format_double(centering_Zn(table, n, speed))});
  }
  return csv.str();
}

std::string lattice_csv(const LatticeCdf& law) {
  CsvWriter csv({"value", "pmf", "cdf"});
  double acc = 0.0;
  for (Eigen::Index i = 0; i < law.atoms(); ++i) {
    acc += law.probs[i];
    csv.add_row({std::to_string(law.value(i)), format_double(law.probs[i]), format_double(acc)});
  }
  return csv.str();
}

std::string batch_csv(const SimBatch& batch) {
  CsvWriter csv({"sample", "value"});
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const std::int64_t v = batch.samples[i];
    csv.add_row({std::to_string(i), v == kTruncatedSample ? "inf" : std::to_string(v)});
  }
  return csv.str();
}

}  // namespace rwre
