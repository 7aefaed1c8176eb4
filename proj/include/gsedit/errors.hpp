#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace gsedit {

/// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used: unreadable files, localization failure (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing stopped and,
/// for per-element failures, the element index.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset,
             std::optional<std::size_t> element = std::nullopt)
      : DataError(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset),
        element_(element) {}

  std::size_t offset() const { return offset_; }
  std::optional<std::size_t> element() const { return element_; }

 private:
  std::size_t offset_;
  std::optional<std::size_t> element_;
};

/// NaN/Inf appeared in a loss or gradient (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Socket or wire-protocol failure talking to a remote provider (exit code 5).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (mismatched shapes and the like).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gsedit
