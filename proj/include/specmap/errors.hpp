#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specmap {

/// Malformed input: bad file contents, out-of-domain values, bad flags.
/// The CLI maps this to exit status 1.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A parse failure tied to a location in a text file.
class FormatError : public InputError {
public:
  FormatError(const std::string &source, std::size_t line, const std::string &what)
      : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Required data is absent: a missing profile, an uncovered (variant, mapping)
/// pair, or a query outside the measured range. The CLI maps this to exit status 2.
class CoverageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Interpolation was asked to leave the measured sequence-length range.
class ExtrapolationError : public CoverageError {
public:
  using CoverageError::CoverageError;
};

} // namespace specmap
