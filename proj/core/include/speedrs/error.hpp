#pragma once

#include <stdexcept>
#include <string>

namespace speedrs {

enum class Errc {
  InvalidArgument,
  InvalidPath,
  ZeroInitialValue,
  TooFewPoints,
  WindowTooShort,
  IndexOutOfRange,
  DimMismatch,
  EmptyBundle,
  NumericalOverflow,
  TooFewSamples,
  SingularSystem,
  WindowGridMismatch,
  OddPathCount,
  ShapeMismatch,
  PackingTooDense,
  NonFiniteLoss,
  IndivisibleCount,
  LengthMismatch,
  InvalidConfig,
  Io,
};

const char* to_string(Errc code) noexcept;

// Broad category used by the CLI to pick an exit code.
enum class ErrorCategory { Config, Numerical, Io };
ErrorCategory category(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace speedrs
