#pragma once

#include <stdexcept>
#include <string>

namespace navguard {

// Base class for every domain error raised by the library. The CLI maps these
// to exit code 1.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected width " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected), actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

private:
  std::size_t expected_;
  std::size_t actual_;
};

// Malformed text document (bad header, missing tokens, unparsable number).
class FormatError : public Error {
public:
  using Error::Error;
};

// Well-formed document whose layer widths do not chain.
class ShapeError : public Error {
public:
  using Error::Error;
};

// NaN or infinity where a finite number is required.
class ValueError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace navguard
