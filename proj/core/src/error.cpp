#include "predictchain/error.hpp"

namespace predictchain {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_found: return "not_found";
    case Errc::duplicate: return "duplicate";
    case Errc::unknown_account: return "unknown_account";
    case Errc::insufficient_funds: return "insufficient_funds";
    case Errc::oversize: return "oversize";
    case Errc::encoding: return "encoding";
    case Errc::decoding: return "decoding";
    case Errc::malformed_envelope: return "malformed_envelope";
    case Errc::schema: return "schema";
    case Errc::unknown_opcode: return "unknown_opcode";
    case Errc::integrity: return "integrity";
    case Errc::parse: return "parse";
    case Errc::out_of_range: return "out_of_range";
    case Errc::insufficient_rows: return "insufficient_rows";
    case Errc::diverged: return "diverged";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::single_step_only: return "single_step_only";
    case Errc::corrupt_model: return "corrupt_model";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::unsupported: return "unsupported";
    case Errc::transport: return "transport";
    case Errc::io: return "io";
    case Errc::quote_changed: return "quote_changed";
  }
  return "unknown";
}

std::optional<Errc> errc_from_string(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::quote_changed); ++i) {
    const auto code = static_cast<Errc>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

}  // namespace predictchain
