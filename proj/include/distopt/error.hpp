#pragma once

#include <stdexcept>
#include <string>

namespace distopt {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorCode {
  kInternal = 1,
  kConfig = 2,
  kDivergence = 3,
  kIncompatible = 4,
  kContractViolation = 5,
  kNumeric = 6,
  kIo = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ContractViolation : Error {
  explicit ContractViolation(const std::string& what) : Error(ErrorCode::kContractViolation, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

// Algorithm / topology pairings that the algorithm class does not support.
struct CompatibilityError : Error {
  explicit CompatibilityError(const std::string& what) : Error(ErrorCode::kIncompatible, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

}  // namespace distopt
