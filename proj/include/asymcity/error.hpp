#pragma once

#include <stdexcept>
#include <string>

namespace asymcity {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kValidation; }
};

/// Invalid configuration value; the message names the offending field.
class ParameterError : public Error {
 public:
  ParameterError(const std::string& field, const std::string& what);
  const std::string& field() const noexcept { return field_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }

 private:
  std::string field_;
};

/// Argument outside the domain of an operation (point inside a building,
/// shape mismatch, coincident points, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A document did not match its schema. `path()` is a JSON-pointer-like
/// location of the offending field.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, const std::string& what);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Structurally valid input that breaks a semantic invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

}  // namespace asymcity
