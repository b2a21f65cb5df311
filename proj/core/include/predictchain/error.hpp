#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace predictchain {

enum class Errc {
  invalid_argument,
  not_found,
  duplicate,
  unknown_account,
  insufficient_funds,
  oversize,
  encoding,
  decoding,
  malformed_envelope,
  schema,
  unknown_opcode,
  integrity,
  parse,
  out_of_range,
  insufficient_rows,
  diverged,
  shape_mismatch,
  single_step_only,
  corrupt_model,
  dimension_mismatch,
  unsupported,
  transport,
  io,
  quote_changed,
};

std::string_view to_string(Errc code) noexcept;
std::optional<Errc> errc_from_string(std::string_view name) noexcept;

// Every failure surfaced by the library carries one of the codes above so
// callers (and the HTTP layers) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace predictchain
