#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace despca {

// Base of every error raised by the library. A pipeline stage may attach its
// label; what() then reads "[stage] message".
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message)
      : std::runtime_error(message), message_(message), full_(message) {}

  const char* what() const noexcept override { return full_.c_str(); }

  const std::string& stage() const noexcept { return stage_; }
  const std::string& message() const noexcept { return message_; }

  void set_stage(std::string stage) {
    stage_ = std::move(stage);
    full_ = "[" + stage_ + "] " + message_;
  }

 private:
  std::string stage_;
  std::string message_;
  std::string full_;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// tau_j^2 fell at or below the floor: the eigenvalue-gap assumption failed.
class DegenerateColumn : public NumericalError {
 public:
  DegenerateColumn(std::size_t column, double tau_sq)
      : NumericalError("degenerate nodewise column " + std::to_string(column) +
                       " (tau^2 = " + std::to_string(tau_sq) + ")"),
        column_(column),
        tau_sq_(tau_sq) {}

  std::size_t column() const noexcept { return column_; }
  double tau_sq() const noexcept { return tau_sq_; }

 private:
  std::size_t column_;
  double tau_sq_;
};

class DegenerateGap : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace despca
