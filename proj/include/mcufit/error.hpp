#pragma once

#include <stdexcept>
#include <string>

namespace mcufit {

// Base of every error thrown by the library. Messages are single-line so the
// CLI can prefix and print them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class CodegenError : public Error {
 public:
  using Error::Error;
};

class ToolchainError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public ToolchainError {
 public:
  using ToolchainError::ToolchainError;
};

}  // namespace mcufit
