#pragma once

#include <stdexcept>
#include <string>

namespace synthgen {

// Exit-code mapping: ConfigError -> 2, TransportError -> 3, DataError -> 4.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class TransportError : public std::runtime_error {
public:
  explicit TransportError(const std::string& msg, bool retryable = true)
      : std::runtime_error(msg), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

private:
  bool retryable_;
};

class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file content; carries line number and byte offset.
class ParseError : public DataError {
public:
  ParseError(const std::string& msg, std::size_t line, std::size_t byte_offset)
      : DataError("line " + std::to_string(line) + " (byte " +
                  std::to_string(byte_offset) + "): " + msg),
        line_(line),
        byte_offset_(byte_offset) {}
  std::size_t line() const { return line_; }
  std::size_t byte_offset() const { return byte_offset_; }

private:
  std::size_t line_;
  std::size_t byte_offset_;
};

}  // namespace synthgen
