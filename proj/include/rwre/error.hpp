#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

enum class ErrorKind { parameter, regime, range, horizon, numeric, config, usage };

/// Base of every library error; the kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid distribution or operation parameters.
struct ParameterError : Error {
  explicit ParameterError(const std::string& w) : Error(ErrorKind::parameter, w) {}
};

/// The environment law is outside the regime an operation needs (recurrent, kappa <= 2, ...).
struct RegimeError : Error {
  explicit RegimeError(const std::string& w) : Error(ErrorKind::regime, w) {}
};

/// A requested site or time lies outside the sampled window or table.
struct RangeError : Error {
  explicit RangeError(const std::string& w) : Error(ErrorKind::range, w) {}
};

/// Truncation horizon too short: uncaptured probability mass exceeds tolerance.
struct HorizonError : Error {
  explicit HorizonError(const std::string& w) : Error(ErrorKind::horizon, w) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

}  // namespace rwre
