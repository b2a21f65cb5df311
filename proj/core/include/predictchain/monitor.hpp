#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "predictchain/ledger.hpp"
#include "predictchain/protocol.hpp"

namespace predictchain::monitor {

inline constexpr std::int64_t kDefaultLatenessWindowMs = 60'000;
inline constexpr std::chrono::milliseconds kDefaultPollInterval{1000};

struct MonitorState {
  ledger::Address watched_address;
  std::int64_t min_timestamp = 0;
  std::unordered_set<std::string> seen_ids;
  /// Commit timestamps of seen ids, where known; drives compaction. Ids
  /// restored from a state file have no entry until the indexer returns them again.
  std::unordered_map<std::string, std::int64_t> seen_timestamps;

  /// "min_timestamp=<int>" then one id per line.
  std::string serialize() const;
  static MonitorState parse(std::string_view text, ledger::Address watched_address);

  /// Forgets ids whose commit timestamp is below min_timestamp; the indexer
  /// can no longer return those.
  void compact();
};

struct Event {
  ledger::Transaction txn;
  protocol::NoteEnvelope envelope;
};

struct PollOutcome {
  std::vector<Event> events;  // (timestamp, id) order, each id once
  MonitorState state;
  std::size_t undecodable = 0;
  bool adapter_failed = false;
};

/// One indexer round trip. Pure with respect to `state`: the returned state
/// marks every new id seen (undecodable notes included) and trails
/// min_timestamp `lateness_window_ms` behind the newest timestamp seen.
PollOutcome poll_once(const MonitorState& state, ledger::ChainAdapter& adapter,
                      std::int64_t lateness_window_ms = kDefaultLatenessWindowMs);

struct MonitorOptions {
  std::chrono::milliseconds poll_interval = kDefaultPollInterval;
  std::int64_t lateness_window_ms = kDefaultLatenessWindowMs;
  std::optional<std::filesystem::path> state_file;
};

using Dispatcher = std::function<void(const Event&)>;

// Polling loop for one watched address. An id is marked seen only after the
// dispatcher returned (or threw), and the mark is appended to the state file
// immediately, so a restart never re-dispatches an acknowledged event.
class Monitor {
 public:
  Monitor(ledger::Address address, ledger::ChainAdapter& adapter, MonitorOptions options = {});

  /// Polls once and dispatches new events. Returns the number dispatched.
  std::size_t poll_and_dispatch(const Dispatcher& dispatcher);

  /// Calls poll_and_dispatch every poll_interval until stop is requested.
  void run(const Dispatcher& dispatcher, std::stop_token stop);

  const MonitorState& state() const noexcept { return state_; }
  const MonitorOptions& options() const noexcept { return options_; }
  void persist() const;

 private:
  void mark_seen(const ledger::Transaction& txn);

  ledger::ChainAdapter& adapter_;
  MonitorOptions options_;
  MonitorState state_;
};

}  // namespace predictchain::monitor
