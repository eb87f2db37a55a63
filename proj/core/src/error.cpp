#include "speedrs/error.hpp"

namespace speedrs {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidPath: return "InvalidPath";
    case Errc::ZeroInitialValue: return "ZeroInitialValue";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::WindowTooShort: return "WindowTooShort";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyBundle: return "EmptyBundle";
    case Errc::NumericalOverflow: return "NumericalOverflow";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::WindowGridMismatch: return "WindowGridMismatch";
    case Errc::OddPathCount: return "OddPathCount";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::PackingTooDense: return "PackingTooDense";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::IndivisibleCount: return "IndivisibleCount";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

ErrorCategory category(Errc code) noexcept {
  switch (code) {
    case Errc::Io: return ErrorCategory::Io;
    case Errc::NumericalOverflow:
    case Errc::SingularSystem:
    case Errc::NonFiniteLoss:
    case Errc::PackingTooDense: return ErrorCategory::Numerical;
    default: return ErrorCategory::Config;
  }
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace speedrs
