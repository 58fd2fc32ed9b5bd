#pragma once

#include <stdexcept>
#include <string>

namespace thzrsma {

/// Coarse failure classes. The C API and the CLI map these one-to-one onto
/// status codes and exit codes.
enum class ErrorCategory {
  kConfig,
  kDimension,
  kIo,
  kFormat,
  kNumerical,
  kInternal,
};

const char* category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(ErrorCategory::kDimension, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::kFormat, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::kNumerical, what) {}
};

}  // namespace thzrsma
