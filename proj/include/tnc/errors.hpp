#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tnc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct InvalidPermutation : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a contraction plan cannot be built or executed as requested
/// (rank cap unreachable, non-nested reuse set, memory guard tripped).
struct PlanningError : Error {
  using Error::Error;
};

struct VerificationError : Error {
  using Error::Error;
};

}  // namespace tnc
