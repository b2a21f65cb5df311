#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/decimal.hpp"
#include "predictchain/ledger.hpp"

namespace predictchain::tokenomics {

using ledger::MicroAlgos;

// On-chain names follow the <MULT_UPDATE> "calc" argument.
enum class ScheduleField {
  dataset_mult,
  training_mult,
  fee_fraction,
  dataset_upload_per_byte,
  training_per_complexity,
  query_per_complexity,
};

inline constexpr ScheduleField kAllFields[] = {
    ScheduleField::dataset_mult,            ScheduleField::training_mult,
    ScheduleField::fee_fraction,            ScheduleField::dataset_upload_per_byte,
    ScheduleField::training_per_complexity, ScheduleField::query_per_complexity,
};

/// "dataset", "training", "fee_fraction", ...
std::string_view wire_name(ScheduleField field) noexcept;
/// Schedule-file key: "dataset_mult", "training_mult", "fee_fraction", ...
std::string_view key_name(ScheduleField field) noexcept;
/// Accepts either spelling. Throws Errc::invalid_argument.
ScheduleField parse_field(std::string_view name);

struct RewardSchedule {
  Decimal dataset_mult = Decimal::from_int(2);
  Decimal training_mult = Decimal::from_int(10'000'000);
  Decimal fee_fraction = Decimal::parse("0.01");
  Decimal dataset_upload_per_byte = Decimal::from_int(1);
  Decimal training_per_complexity = Decimal::from_int(10'000);
  Decimal query_per_complexity = Decimal::from_int(100);

  Decimal get(ScheduleField field) const noexcept;
  /// Throws Errc::invalid_argument if the value breaks an invariant.
  void set(ScheduleField field, Decimal value);
  /// Every value >= 0 and fee_fraction < 1.
  void validate() const;

  /// key=value lines for all fields.
  std::string to_text() const;
  /// Missing keys keep their defaults; unknown keys and bad values throw Errc::parse.
  static RewardSchedule from_text(std::string_view text);
  nlohmann::json to_json() const;

  friend bool operator==(const RewardSchedule&, const RewardSchedule&) = default;
};

/// floor(ds_size * mult * accuracy). Throws Errc::out_of_range unless accuracy is in [0, 1].
MicroAlgos dataset_reward(std::int64_t ds_size, Decimal mult, Decimal accuracy);
/// floor(mult * accuracy).
MicroAlgos training_reward(Decimal mult, Decimal accuracy);

enum class PriceKind { dataset_upload, train_model, query_model };
std::string_view to_string(PriceKind kind) noexcept;
PriceKind parse_price_kind(std::string_view name);

struct PriceContext {
  std::optional<std::int64_t> ds_size;
  std::optional<Decimal> complexity;
};

/// Ceiling of size or complexity times the per-unit multiplier, at least 1.
/// Throws Errc::invalid_argument when the context lacks what `kind` needs.
MicroAlgos price(PriceKind kind, const PriceContext& context, const RewardSchedule& schedule);

/// floor(amount * fee_fraction).
MicroAlgos oracle_fee(MicroAlgos amount, Decimal fee_fraction);

// How a paid request funds its rewards. The oracle tops up any shortfall
// from its own balance.
struct Settlement {
  MicroAlgos paid = 0;
  MicroAlgos fee = 0;
  MicroAlgos available = 0;
  MicroAlgos rewards = 0;
  MicroAlgos shortfall = 0;
};
Settlement settle(MicroAlgos paid, Decimal fee_fraction, MicroAlgos rewards);

/// Reads the schedule file when it exists, otherwise writes `fallback` to it.
RewardSchedule load_schedule_file(const std::filesystem::path& file, const RewardSchedule& fallback = {});

// The oracle's live schedule. Every change is a zero-amount self-payment
// with a <MULT_UPDATE> note; requests are priced with the schedule in force
// at their commit round.
class ScheduleBook {
 public:
  explicit ScheduleBook(RewardSchedule initial = {},
                        std::optional<std::filesystem::path> schedule_file = std::nullopt);

  RewardSchedule current() const;
  /// Schedule in force for a transaction committed at `round`.
  RewardSchedule at_round(std::int64_t round) const;

  /// Commits the log transaction first; the schedule changes only if the
  /// ledger accepted it.
  std::string log_mult_update(ScheduleField field, Decimal new_value, ledger::ChainAdapter& chain,
                              const ledger::Address& oracle);

  /// Rebuilds the round-indexed history from the <MULT_UPDATE> notes in
  /// `chain`, walking back from the current schedule.
  void rebuild_history(const std::vector<ledger::Transaction>& chain, const ledger::Address& oracle);

  /// Folds every <MULT_UPDATE> self-payment of `oracle` over `genesis`.
  static RewardSchedule replay(RewardSchedule genesis, const std::vector<ledger::Transaction>& chain,
                               const ledger::Address& oracle);

 private:
  struct Entry {
    std::int64_t from_round;  // first round priced with `schedule`
    RewardSchedule schedule;
  };
  void persist_locked() const;

  mutable std::mutex mutex_;
  std::vector<Entry> history_;  // ascending from_round; front().from_round == 0
  std::optional<std::filesystem::path> file_;
};

}  // namespace predictchain::tokenomics
