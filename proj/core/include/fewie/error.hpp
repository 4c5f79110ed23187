#pragma once

#include <stdexcept>
#include <string>

namespace fewie {

enum class ErrorKind {
  kParse,
  kFormat,
  kCorruption,
  kIo,
  kMissingEmbedding,
  kAlignment,
  kPrecondition,
  kNumeric,
  kInfeasible,
  kConfig,
};

const char* to_string(ErrorKind kind);

// Base of every error raised by the library. The kind drives CLI exit codes
// and the structured per-scenario reports written by the harness.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(ErrorKind::kParse,
              line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  // 1-based; 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorKind::kFormat, m) {}
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& m) : Error(ErrorKind::kCorruption, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(const std::string& m)
      : Error(ErrorKind::kMissingEmbedding, m) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& m) : Error(ErrorKind::kAlignment, m) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& m) : Error(ErrorKind::kPrecondition, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorKind::kNumeric, m) {}
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& m, std::string failing_class)
      : Error(ErrorKind::kInfeasible, m), failing_class_(std::move(failing_class)) {}

  const std::string& failing_class() const noexcept { return failing_class_; }

 private:
  std::string failing_class_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

}  // namespace fewie
