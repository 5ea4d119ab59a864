#pragma once

#include <stdexcept>
#include <string>

namespace shotlog {

// Base for every failure the library reports. Each subclass maps onto one
// error category of the public contract; the CLI turns them into exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Unsupported or malformed file encoding (e.g. a WAV that is not PCM16/float32).
class FormatError : public Error {
public:
  using Error::Error;
};

// File could not be opened, read, written, or ended early.
class IoError : public Error {
public:
  using Error::Error;
};

// A record violates a field invariant. Carries the 1-based line number when
// the record came from a line-oriented file (0 otherwise).
class ValidationError : public Error {
public:
  ValidationError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// Inconsistent configuration (sample-rate mismatch, missing pools, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Model fitting could not proceed (degenerate data).
class FitError : public Error {
public:
  using Error::Error;
};

// Training data does not allow the requested classifier.
class TrainingError : public Error {
public:
  using Error::Error;
};

// Two series that must share the 0.125 s grid do not.
class AlignmentError : public Error {
public:
  using Error::Error;
};

} // namespace shotlog
