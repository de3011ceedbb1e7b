#include "dls/error.hpp"

namespace dls {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::BadFormat: return "BadFormat";
    case Errc::Corrupt: return "Corrupt";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DegenerateNorm: return "DegenerateNorm";
    case Errc::EmptySeries: return "EmptySeries";
  }
  return "Unknown";
}

}  // namespace dls
