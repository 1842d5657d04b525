#pragma once

#include <stdexcept>
#include <string>

namespace biasprobe {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  Success = 0,
  Usage = 1,
  Validation = 2,
  Backend = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::Validation)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what, ExitCode::Usage) {}
};

// Missing or malformed input file (path does not exist, unreadable).
class PathError : public Error {
 public:
  explicit PathError(const std::string& what) : Error(what, ExitCode::Usage) {}
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string column)
      : Error(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ValidationError : public Error {
 public:
  // row is 1-based over data rows; 0 when not row-specific.
  ValidationError(const std::string& what, std::size_t row = 0)
      : Error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class EmptyCorpusError : public Error {
 public:
  explicit EmptyCorpusError(const std::string& what) : Error(what) {}
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& what) : Error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BackendError : public Error {
 public:
  // http_status is 0 when no HTTP response was received.
  BackendError(const std::string& what, int http_status = 0)
      : Error(what, ExitCode::Backend), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

class CacheMissError : public BackendError {
 public:
  explicit CacheMissError(std::string fingerprint)
      : BackendError("replay cache miss for fingerprint " + fingerprint),
        fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class SimulatorConfigError : public Error {
 public:
  explicit SimulatorConfigError(const std::string& what) : Error(what) {}
};

// Numerical preconditions (degenerate samples, zero vectors, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

}  // namespace biasprobe
