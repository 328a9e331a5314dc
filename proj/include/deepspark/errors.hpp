#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deepspark {

// Precondition / dimension-contract violations.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// A computation produced NaN/Inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Text ingestion (CSV) failure; carries the 1-based offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Binary shard file is not a valid DSHD file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Wire-protocol violation. `code` matches the on-wire ERROR codes where one applies.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(uint16_t code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  uint16_t code() const { return code_; }

 private:
  uint16_t code_;
};

// Socket-level failure (connect/bind/send/recv).
class NetError : public std::runtime_error {
 public:
  explicit NetError(const std::string& what) : std::runtime_error(what) {}
};

// Local file I/O failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deepspark
