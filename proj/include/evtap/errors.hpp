#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evtap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. `offset` is a 1-based line number for text inputs and a
/// byte offset for binary inputs.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed data that violates a domain invariant (e.g. an event outside
/// the sensor). `index` is the offending record index.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace evtap
