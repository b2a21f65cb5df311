#include "predictchain/tokenomics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <sstream>

#include "fsutil.hpp"
#include "predictchain/error.hpp"
#include "predictchain/protocol.hpp"

namespace predictchain::tokenomics {

namespace {

struct FieldNames {
  ScheduleField field;
  std::string_view wire;
  std::string_view key;
};

constexpr FieldNames kNames[] = {
    {ScheduleField::dataset_mult, "dataset", "dataset_mult"},
    {ScheduleField::training_mult, "training", "training_mult"},
    {ScheduleField::fee_fraction, "fee_fraction", "fee_fraction"},
    {ScheduleField::dataset_upload_per_byte, "dataset_upload_per_byte", "dataset_upload_per_byte"},
    {ScheduleField::training_per_complexity, "training_per_complexity", "training_per_complexity"},
    {ScheduleField::query_per_complexity, "query_per_complexity", "query_per_complexity"},
};

const FieldNames& names_of(ScheduleField field) {
  return *std::find_if(std::begin(kNames), std::end(kNames),
                       [&](const FieldNames& n) { return n.field == field; });
}

void check_accuracy(Decimal accuracy) {
  if (accuracy < Decimal{} || accuracy > Decimal::from_int(1)) {
    throw Error(Errc::out_of_range, "accuracy " + accuracy.to_string() + " is outside [0, 1]");
  }
}

Decimal& slot(RewardSchedule& s, ScheduleField field) {
  switch (field) {
    case ScheduleField::dataset_mult: return s.dataset_mult;
    case ScheduleField::training_mult: return s.training_mult;
    case ScheduleField::fee_fraction: return s.fee_fraction;
    case ScheduleField::dataset_upload_per_byte: return s.dataset_upload_per_byte;
    case ScheduleField::training_per_complexity: return s.training_per_complexity;
    case ScheduleField::query_per_complexity: return s.query_per_complexity;
  }
  throw Error(Errc::invalid_argument, "unknown schedule field");
}

struct MultUpdate {
  std::int64_t round;
  ScheduleField field;
  Decimal old_value;
  Decimal new_value;
};

std::vector<MultUpdate> mult_updates(const std::vector<ledger::Transaction>& chain,
                                     const ledger::Address& oracle) {
  std::vector<MultUpdate> out;
  for (const auto& txn : chain) {
    if (txn.sender != oracle || txn.receiver != oracle) continue;
    protocol::NoteEnvelope env;
    try {
      env = protocol::decode_note(txn.note);
      if (env.op != protocol::op::kMultUpdate) continue;
      const auto args = protocol::validate_args(env.op, env.args);
      out.push_back({txn.round, parse_field(protocol::arg_string(args, "calc")),
                     Decimal::parse(protocol::arg_string(args, "old")),
                     Decimal::parse(protocol::arg_string(args, "new"))});
    } catch (const Error& e) {
      spdlog::warn("ignoring unreadable schedule update {}: {}", txn.id, e.what());
    }
  }
  return out;
}

}  // namespace

std::string_view wire_name(ScheduleField field) noexcept { return names_of(field).wire; }
std::string_view key_name(ScheduleField field) noexcept { return names_of(field).key; }

ScheduleField parse_field(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.wire == name || n.key == name) return n.field;
  }
  throw Error(Errc::invalid_argument, "unknown schedule field '" + std::string(name) + "'");
}

Decimal RewardSchedule::get(ScheduleField field) const noexcept {
  return slot(const_cast<RewardSchedule&>(*this), field);
}

void RewardSchedule::set(ScheduleField field, Decimal value) {
  RewardSchedule next = *this;
  slot(next, field) = value;
  next.validate();
  *this = next;
}

void RewardSchedule::validate() const {
  for (const auto field : kAllFields) {
    if (get(field) < Decimal{}) {
      throw Error(Errc::invalid_argument, std::string(key_name(field)) + " must be non-negative");
    }
  }
  if (fee_fraction >= Decimal::from_int(1)) {
    throw Error(Errc::invalid_argument, "fee_fraction must be below 1");
  }
}

std::string RewardSchedule::to_text() const {
  std::string out;
  for (const auto field : kAllFields) {
    out += key_name(field);
    out += '=';
    out += get(field).to_string();
    out += '\n';
  }
  return out;
}

RewardSchedule RewardSchedule::from_text(std::string_view text) {
  RewardSchedule s;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::parse, "schedule line " + std::to_string(lineno) + " has no '='");
    }
    try {
      slot(s, parse_field(line.substr(0, eq))) = Decimal::parse(line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(Errc::parse, "schedule line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(Errc::parse, e.what());
  }
  return s;
}

nlohmann::json RewardSchedule::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto field : kAllFields) j[std::string(key_name(field))] = get(field).to_string();
  return j;
}

MicroAlgos dataset_reward(std::int64_t ds_size, Decimal mult, Decimal accuracy) {
  check_accuracy(accuracy);
  if (ds_size < 0) throw Error(Errc::invalid_argument, "ds_size must be non-negative");
  if (mult < Decimal{}) throw Error(Errc::invalid_argument, "mult must be non-negative");
  return floor_mul(ds_size, mult, accuracy);
}

MicroAlgos training_reward(Decimal mult, Decimal accuracy) {
  check_accuracy(accuracy);
  if (mult < Decimal{}) throw Error(Errc::invalid_argument, "mult must be non-negative");
  return floor_mul(mult, accuracy);
}

std::string_view to_string(PriceKind kind) noexcept {
  switch (kind) {
    case PriceKind::dataset_upload: return "dataset_upload";
    case PriceKind::train_model: return "train_model";
    case PriceKind::query_model: return "query_model";
  }
  return "?";
}

PriceKind parse_price_kind(std::string_view name) {
  for (const auto k : {PriceKind::dataset_upload, PriceKind::train_model, PriceKind::query_model}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::invalid_argument,
              "unknown price kind '" + std::string(name) + "' (dataset_upload|train_model|query_model)");
}

MicroAlgos price(PriceKind kind, const PriceContext& context, const RewardSchedule& schedule) {
  MicroAlgos quote = 0;
  if (kind == PriceKind::dataset_upload) {
    if (!context.ds_size || *context.ds_size < 0) {
      throw Error(Errc::invalid_argument, "dataset_upload price needs a non-negative ds_size");
    }
    quote = ceil_mul(Decimal::from_int(*context.ds_size), schedule.dataset_upload_per_byte);
  } else {
    if (!context.complexity || *context.complexity < Decimal{}) {
      throw Error(Errc::invalid_argument, std::string(to_string(kind)) + " price needs a model complexity");
    }
    const Decimal per = kind == PriceKind::train_model ? schedule.training_per_complexity
                                                       : schedule.query_per_complexity;
    quote = ceil_mul(*context.complexity, per);
  }
  return std::max<MicroAlgos>(quote, 1);
}

MicroAlgos oracle_fee(MicroAlgos amount, Decimal fee_fraction) {
  if (amount < 0) throw Error(Errc::invalid_argument, "amount must be non-negative");
  return floor_mul(amount, fee_fraction);
}

Settlement settle(MicroAlgos paid, Decimal fee_fraction, MicroAlgos rewards) {
  Settlement s;
  s.paid = paid;
  s.fee = oracle_fee(paid, fee_fraction);
  s.available = paid - s.fee;
  s.rewards = rewards;
  s.shortfall = std::max<MicroAlgos>(0, rewards - s.available);
  return s;
}

ScheduleBook::ScheduleBook(RewardSchedule initial, std::optional<std::filesystem::path> schedule_file)
    : file_(std::move(schedule_file)) {
  initial.validate();
  history_.push_back({0, initial});
}

RewardSchedule load_schedule_file(const std::filesystem::path& file, const RewardSchedule& fallback) {
  if (std::filesystem::exists(file)) return RewardSchedule::from_text(detail::read_text(file));
  fallback.validate();
  detail::write_file_atomic(file, fallback.to_text());
  return fallback;
}

RewardSchedule ScheduleBook::current() const {
  std::lock_guard lock(mutex_);
  return history_.back().schedule;
}

RewardSchedule ScheduleBook::at_round(std::int64_t round) const {
  std::lock_guard lock(mutex_);
  const auto it = std::upper_bound(history_.begin(), history_.end(), round,
                                   [](std::int64_t r, const Entry& e) { return r < e.from_round; });
  return std::prev(it)->schedule;
}

void ScheduleBook::persist_locked() const {
  if (file_) detail::write_file_atomic(*file_, history_.back().schedule.to_text());
}

std::string ScheduleBook::log_mult_update(ScheduleField field, Decimal new_value,
                                          ledger::ChainAdapter& chain, const ledger::Address& oracle) {
  std::lock_guard lock(mutex_);
  RewardSchedule next = history_.back().schedule;
  const Decimal old_value = next.get(field);
  next.set(field, new_value);

  const protocol::NoteEnvelope note{std::string(protocol::op::kMultUpdate),
                                    {{"calc", std::string(wire_name(field))},
                                     {"old", old_value.to_string()},
                                     {"new", new_value.to_string()}}};
  const std::string id = chain.submit({oracle, oracle, 0, protocol::encode_note(note)});

  std::int64_t round = history_.back().from_round;
  const auto log = chain.transactions();
  const auto hit = std::find_if(log.rbegin(), log.rend(), [&](const auto& t) { return t.id == id; });
  if (hit != log.rend()) round = hit->round;
  history_.push_back({round + 1, next});
  persist_locked();
  spdlog::info("schedule {} {} -> {} ({})", key_name(field), old_value.to_string(),
               new_value.to_string(), id);
  return id;
}

void ScheduleBook::rebuild_history(const std::vector<ledger::Transaction>& chain,
                                   const ledger::Address& oracle) {
  std::lock_guard lock(mutex_);
  const auto updates = mult_updates(chain, oracle);
  RewardSchedule s = history_.back().schedule;
  std::vector<Entry> rebuilt;
  rebuilt.push_back({0, s});
  for (auto it = updates.rbegin(); it != updates.rend(); ++it) {
    rebuilt.back().from_round = it->round + 1;
    slot(s, it->field) = it->old_value;
    rebuilt.push_back({0, s});
  }
  std::reverse(rebuilt.begin(), rebuilt.end());
  history_ = std::move(rebuilt);
}

RewardSchedule ScheduleBook::replay(RewardSchedule genesis, const std::vector<ledger::Transaction>& chain,
                                    const ledger::Address& oracle) {
  for (const auto& u : mult_updates(chain, oracle)) slot(genesis, u.field) = u.new_value;
  return genesis;
}

}  // namespace predictchain::tokenomics
