#include "predictchain/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <initializer_list>

#include "predictchain/error.hpp"

namespace predictchain::protocol {

namespace {

using nlohmann::json;

enum class FieldType { text, integer, decimal, archetype, reward_reason, schedule_field, link };

struct Field {
  std::string_view name;
  FieldType type;
  bool required = true;
};

struct Schema {
  std::string_view op;
  std::vector<Field> fields;
};

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> table = {
      {op::kUpDataset,
       {{"ds_name", FieldType::text},
        {"ds_link", FieldType::link},
        {"ds_size", FieldType::integer},
        {"time_attrib", FieldType::text, false},
        {"sub_split_attrib", FieldType::text, false}}},
      {op::kDatasetUp, {{"ds_name", FieldType::text}, {"status", FieldType::text}}},
      {op::kTrainModel,
       {{"raw_model", FieldType::archetype},
        {"ds_name", FieldType::text},
        {"new_model_name", FieldType::text},
        {"num_epochs", FieldType::integer},
        {"target_attrib", FieldType::text},
        {"hidden_dim", FieldType::integer},
        {"num_hidden_layers", FieldType::integer},
        {"time_lag", FieldType::integer},
        {"training_lookback", FieldType::integer},
        {"sub_split_value", FieldType::integer, false}}},
      {op::kModelTrained,
       {{"model_name", FieldType::text},
        {"loss", FieldType::decimal},
        {"accuracy", FieldType::decimal}}},
      {op::kQueryModel, {{"model_name", FieldType::text}, {"input", FieldType::text}}},
      {op::kQueryResult, {{"model_name", FieldType::text}, {"output", FieldType::text}}},
      {op::kReward,
       {{"reason", FieldType::reward_reason},
        {"ref_name", FieldType::text},
        {"accuracy", FieldType::decimal}}},
      {op::kMultUpdate,
       {{"calc", FieldType::schedule_field},
        {"old", FieldType::decimal},
        {"new", FieldType::decimal}}},
  };
  return table;
}

bool is_decimal_text(std::string_view s) {
  if (!s.empty() && s.front() == '-') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto dot = s.find('.');
  auto digits = [](std::string_view d) {
    return !d.empty() && std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (dot == std::string_view::npos) return digits(s);
  return digits(s.substr(0, dot)) && digits(s.substr(dot + 1));
}

bool one_of(std::string_view v, std::initializer_list<std::string_view> options) {
  return std::find(options.begin(), options.end(), v) != options.end();
}

[[noreturn]] void schema_error(std::string_view op, std::string_view key, std::string_view what) {
  throw Error(Errc::schema, std::string(op) + ": argument '" + std::string(key) + "' " + std::string(what));
}

json normalize_field(std::string_view op, const Field& f, const json& value) {
  if (f.type == FieldType::integer) {
    if (value.is_number_integer()) return value;
    if (!value.is_string()) schema_error(op, f.name, "must be an integer string");
    const auto& s = value.get_ref<const std::string&>();
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      schema_error(op, f.name, "must be an integer string, got '" + s + "'");
    }
    return v;
  }
  if (!value.is_string()) schema_error(op, f.name, "must be a string");
  const auto& s = value.get_ref<const std::string&>();
  switch (f.type) {
    case FieldType::text:
      if (s.empty()) schema_error(op, f.name, "must not be empty");
      break;
    case FieldType::decimal:
      if (!is_decimal_text(s)) schema_error(op, f.name, "must be a decimal string, got '" + s + "'");
      break;
    case FieldType::archetype:
      if (!one_of(s, {"mlp", "rnn", "lstm", "gru"})) {
        schema_error(op, f.name, "must be one of mlp|rnn|lstm|gru, got '" + s + "'");
      }
      break;
    case FieldType::reward_reason:
      if (!one_of(s, {"dataset_usage", "model_training"})) {
        schema_error(op, f.name, "must be dataset_usage or model_training");
      }
      break;
    case FieldType::schedule_field:
      if (!one_of(s, {"dataset", "training", "fee_fraction", "dataset_upload_per_byte",
                      "training_per_complexity", "query_per_complexity"})) {
        schema_error(op, f.name, "names no schedule field: '" + s + "'");
      }
      break;
    case FieldType::link:
      if (s.find("://") == std::string::npos) schema_error(op, f.name, "must be a <scheme>://... link");
      break;
    case FieldType::integer:
      break;
  }
  return value;
}

}  // namespace

const std::vector<OpcodeInfo>& opcode_registry() {
  static const std::vector<OpcodeInfo> registry = {
      {op::kUpDataset, OpKind::request, op::kDatasetUp},
      {op::kTrainModel, OpKind::request, op::kModelTrained},
      {op::kQueryModel, OpKind::request, op::kQueryResult},
      {op::kDatasetUp, OpKind::response, op::kUpDataset},
      {op::kModelTrained, OpKind::response, op::kTrainModel},
      {op::kQueryResult, OpKind::response, op::kQueryModel},
      {op::kReward, OpKind::reward, {}},
      {op::kMultUpdate, OpKind::admin, {}},
  };
  return registry;
}

const OpcodeInfo* find_opcode(std::string_view name) noexcept {
  for (const auto& info : opcode_registry()) {
    if (info.op == name) return &info;
  }
  return nullptr;
}

std::string_view response_for(std::string_view request_op) {
  const auto* info = find_opcode(request_op);
  if (!info || info->kind != OpKind::request) {
    throw Error(Errc::unknown_opcode, "'" + std::string(request_op) + "' is not a request opcode");
  }
  return info->paired;
}

bool is_well_formed_opcode(std::string_view op) noexcept {
  if (op.size() < 3 || op.front() != '<' || op.back() != '>') return false;
  return std::all_of(op.begin() + 1, op.end() - 1,
                     [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

std::string canonical_json(const NoteEnvelope& envelope) {
  if (!is_well_formed_opcode(envelope.op)) {
    throw Error(Errc::encoding, "malformed opcode '" + envelope.op + "'");
  }
  json args = json::object();
  for (const auto& [key, value] : envelope.args) {
    if (!value.is_primitive() || value.is_null()) {
      throw Error(Errc::encoding, "argument '" + key + "' is not a scalar value");
    }
    if (value.is_number_float() && !std::isfinite(value.get<double>())) {
      throw Error(Errc::encoding, "argument '" + key + "' is not finite");
    }
    args[key] = value;
  }
  const json doc = {{"args", std::move(args)}, {"op", envelope.op}};
  try {
    return doc.dump();
  } catch (const json::exception& e) {
    throw Error(Errc::encoding, std::string("note is not valid UTF-8: ") + e.what());
  }
}

Bytes encode_note(const NoteEnvelope& envelope) {
  const std::string text = canonical_json(envelope);
  if (text.size() > kMaxNoteBytes) {
    throw Error(Errc::oversize, "note is " + std::to_string(text.size()) +
                                    " bytes; the limit is " + std::to_string(kMaxNoteBytes));
  }
  const std::string b64 = base64_encode(to_bytes(text));
  return to_bytes(b64);
}

NoteEnvelope decode_note(std::string_view raw) {
  const Bytes decoded = base64_decode(raw);
  const json doc = json::parse(decoded.begin(), decoded.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(Errc::malformed_envelope, "note payload is not JSON");
  if (!doc.is_object()) throw Error(Errc::malformed_envelope, "note payload is not a JSON object");
  const auto op_it = doc.find("op");
  if (op_it == doc.end() || !op_it->is_string()) {
    throw Error(Errc::malformed_envelope, "note has no \"op\" string");
  }
  NoteEnvelope env;
  env.op = op_it->get<std::string>();
  if (!is_well_formed_opcode(env.op)) {
    throw Error(Errc::malformed_envelope, "malformed opcode in note");
  }
  if (const auto args_it = doc.find("args"); args_it != doc.end()) {
    if (!args_it->is_object()) throw Error(Errc::malformed_envelope, "note \"args\" is not an object");
    for (const auto& [key, value] : args_it->items()) {
      if (!value.is_primitive() || value.is_null()) {
        throw Error(Errc::malformed_envelope, "note argument '" + key + "' is not a scalar");
      }
      env.args.emplace(key, value);
    }
  }
  return env;
}

NoteEnvelope decode_note(std::span<const std::uint8_t> raw) {
  return decode_note(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
}

Args validate_args(std::string_view op, const Args& args) {
  const auto& table = schemas();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Schema& s) { return s.op == op; });
  if (it == table.end()) {
    throw Error(Errc::unknown_opcode, "opcode '" + std::string(op) + "' is not in the registry");
  }
  Args out = args;
  for (const auto& field : it->fields) {
    const auto found = args.find(field.name);
    if (found == args.end()) {
      if (field.required) schema_error(op, field.name, "is missing");
      continue;
    }
    out[std::string(field.name)] = normalize_field(op, field, found->second);
  }
  return out;
}

std::string arg_string(const Args& args, std::string_view key) {
  const auto it = args.find(key);
  if (it == args.end() || !it->second.is_string()) {
    throw Error(Errc::schema, "argument '" + std::string(key) + "' is missing or not a string");
  }
  return it->second.get<std::string>();
}

std::optional<std::string> arg_optional_string(const Args& args, std::string_view key) {
  const auto it = args.find(key);
  if (it == args.end()) return std::nullopt;
  return arg_string(args, key);
}

std::int64_t arg_int(const Args& args, std::string_view key) {
  const auto it = args.find(key);
  if (it == args.end() || !it->second.is_number_integer()) {
    throw Error(Errc::schema, "argument '" + std::string(key) + "' is missing or not an integer");
  }
  return it->second.get<std::int64_t>();
}

std::optional<std::int64_t> arg_optional_int(const Args& args, std::string_view key) {
  const auto it = args.find(key);
  if (it == args.end()) return std::nullopt;
  return arg_int(args, key);
}

}  // namespace predictchain::protocol
