#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwre/exactdist.hpp"
#include "rwre/mcsim.hpp"
#include "rwre/qmoments.hpp"

namespace rwre {

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double x);

/// Number for JSON output; infinities become the strings "inf" / "-inf".
nlohmann::json json_number(double x);

/// RFC 4180 CSV writer: quotes fields containing commas, quotes or newlines and
/// ends lines with CRLF.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Hex SHA-256 of a byte string / file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// UTC timestamp, ISO 8601 ("2024-01-31T12:00:00Z") or compact ("20240131T120000Z").
std::string utc_timestamp(bool compact);

/// Output directory out/<command>/<timestamp>-<seed>/ plus the manifest that
/// lists every file written through it.
class RunDirectory {
 public:
  RunDirectory(const std::filesystem::path& root, const std::string& command, std::uint64_t seed);

  const std::filesystem::path& path() const noexcept { return dir_; }
  void write(const std::string& name, const std::string& contents);
  void write_json(const std::string& name, const nlohmann::json& j);
  /// Writes manifest.json with the file list and digests.
  void finish(const nlohmann::json& config, const std::string& status);

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::uint64_t seed_;
  std::string started_;
  std::vector<std::string> files_;
};

/// Code version recorded in manifests.
const char* version_tag();

// CSV exports of module results.

/// k, mu, m2, m3, var for every site of the table.
std::string table_csv(const QuenchedMomentTable& table);
/// n, mean_Tn, var_Tn, Zn for n = 0..n_max (Zn needs floor(n v) <= table.n_max()).
std::string prefix_csv(const QuenchedMomentTable& table, std::int64_t n_max, double speed);
/// value, pmf, cdf per atom.
std::string lattice_csv(const LatticeCdf& law);
/// sample index, value ("inf" for truncated samples).
std::string batch_csv(const SimBatch& batch);

}  // namespace rwre
