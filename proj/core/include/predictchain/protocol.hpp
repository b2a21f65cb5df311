#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/encoding.hpp"

namespace predictchain::protocol {

using Args = std::map<std::string, nlohmann::json, std::less<>>;

/// Decoded transaction note: "<OPCODE>" plus a named argument dictionary of
/// scalar values (string, number or bool).
struct NoteEnvelope {
  std::string op;
  Args args;

  friend bool operator==(const NoteEnvelope&, const NoteEnvelope&) = default;
};

/// Cap on the canonical JSON of one note, in bytes.
inline constexpr std::size_t kMaxNoteBytes = 1000;

namespace op {
inline constexpr std::string_view kUpDataset = "<UP_DATASET>";
inline constexpr std::string_view kDatasetUp = "<DATASET_UP>";
inline constexpr std::string_view kTrainModel = "<TRAIN_MODEL>";
inline constexpr std::string_view kModelTrained = "<MODEL_TRAINED>";
inline constexpr std::string_view kQueryModel = "<QUERY_MODEL>";
inline constexpr std::string_view kQueryResult = "<QUERY_RESULT>";
inline constexpr std::string_view kReward = "<REWARD>";
inline constexpr std::string_view kMultUpdate = "<MULT_UPDATE>";
}  // namespace op

enum class OpKind { request, response, reward, admin };

struct OpcodeInfo {
  std::string_view op;
  OpKind kind;
  std::string_view paired;  // response op for requests, request op for responses, else empty
};

const std::vector<OpcodeInfo>& opcode_registry();
const OpcodeInfo* find_opcode(std::string_view op) noexcept;
/// Throws Errc::unknown_opcode when `request_op` is not a request.
std::string_view response_for(std::string_view request_op);

/// "<" [A-Z_]+ ">"
bool is_well_formed_opcode(std::string_view op) noexcept;

/// Sorted keys, no insignificant whitespace. Throws Errc::encoding for
/// malformed opcodes, non-scalar argument values or invalid UTF-8.
std::string canonical_json(const NoteEnvelope& envelope);

/// base64(canonical_json). Throws Errc::oversize when the JSON exceeds
/// kMaxNoteBytes.
Bytes encode_note(const NoteEnvelope& envelope);

/// Throws Errc::decoding for invalid base64 and Errc::malformed_envelope for
/// anything that is not {"op": "<...>", "args": {scalar...}}. Any other
/// input is a typed error, never a crash.
NoteEnvelope decode_note(std::span<const std::uint8_t> raw);
NoteEnvelope decode_note(std::string_view raw);

/// Checks the per-opcode schema and returns normalized arguments: integer
/// fields become JSON integers, everything else stays a string. Unknown extra
/// keys pass through untouched. Throws Errc::schema naming the offending key,
/// Errc::unknown_opcode for ops outside the registry.
Args validate_args(std::string_view op, const Args& args);

// Accessors for normalized arguments.
std::string arg_string(const Args& args, std::string_view key);
std::optional<std::string> arg_optional_string(const Args& args, std::string_view key);
std::int64_t arg_int(const Args& args, std::string_view key);
std::optional<std::int64_t> arg_optional_int(const Args& args, std::string_view key);

}  // namespace predictchain::protocol
