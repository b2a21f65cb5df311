#include "predictchain/monitor.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <mutex>
#include <sstream>

#include "fsutil.hpp"
#include "predictchain/error.hpp"

namespace predictchain::monitor {

std::string MonitorState::serialize() const {
  std::vector<std::string_view> ids(seen_ids.begin(), seen_ids.end());
  std::sort(ids.begin(), ids.end());
  std::string out = "min_timestamp=" + std::to_string(min_timestamp) + "\n";
  for (const auto id : ids) {
    out += id;
    out += '\n';
  }
  return out;
}

MonitorState MonitorState::parse(std::string_view text, ledger::Address watched_address) {
  MonitorState state;
  state.watched_address = std::move(watched_address);
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      constexpr std::string_view key = "min_timestamp=";
      if (line.rfind(key, 0) != 0) throw Error(Errc::parse, "monitor state lacks min_timestamp line");
      const std::string_view value = std::string_view(line).substr(key.size());
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), state.min_timestamp);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(Errc::parse, "bad min_timestamp in monitor state");
      }
      header = true;
      continue;
    }
    // Appended marks may repeat the header after a compaction race; ignore them.
    if (line.rfind("min_timestamp=", 0) == 0) continue;
    state.seen_ids.insert(line);
  }
  return state;
}

void MonitorState::compact() {
  for (auto it = seen_timestamps.begin(); it != seen_timestamps.end();) {
    if (it->second < min_timestamp) {
      seen_ids.erase(it->first);
      it = seen_timestamps.erase(it);
    } else {
      ++it;
    }
  }
}

PollOutcome poll_once(const MonitorState& state, ledger::ChainAdapter& adapter,
                      std::int64_t lateness_window_ms) {
  PollOutcome outcome;
  outcome.state = state;
  std::vector<ledger::Transaction> batch;
  try {
    batch = adapter.lookup(state.watched_address, state.min_timestamp);
  } catch (const std::exception& e) {
    spdlog::warn("monitor {}: indexer lookup failed: {}", state.watched_address, e.what());
    outcome.adapter_failed = true;
    return outcome;
  }

  std::sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.id) < std::tie(b.timestamp, b.id);
  });
  batch.erase(std::unique(batch.begin(), batch.end(),
                          [](const auto& a, const auto& b) { return a.id == b.id; }),
              batch.end());

  MonitorState& next = outcome.state;
  std::int64_t newest = std::numeric_limits<std::int64_t>::min();
  for (auto& txn : batch) {
    if (next.seen_ids.contains(txn.id)) {
      next.seen_timestamps.try_emplace(txn.id, txn.timestamp);
      continue;
    }
    next.seen_ids.insert(txn.id);
    next.seen_timestamps[txn.id] = txn.timestamp;
    newest = std::max(newest, txn.timestamp);
    try {
      auto envelope = protocol::decode_note(txn.note);
      outcome.events.push_back({std::move(txn), std::move(envelope)});
    } catch (const Error& e) {
      // Plain transfers such as faucet mints carry no note at all.
      spdlog::log(txn.note.empty() ? spdlog::level::debug : spdlog::level::warn,
                  "monitor {}: skipping {} with undecodable note: {}", state.watched_address, txn.id,
                  e.what());
      ++outcome.undecodable;
    }
  }
  if (newest != std::numeric_limits<std::int64_t>::min()) {
    next.min_timestamp = std::max(next.min_timestamp, newest - lateness_window_ms);
  }
  return outcome;
}

Monitor::Monitor(ledger::Address address, ledger::ChainAdapter& adapter, MonitorOptions options)
    : adapter_(adapter), options_(std::move(options)) {
  if (options_.state_file && std::filesystem::exists(*options_.state_file)) {
    state_ = MonitorState::parse(detail::read_text(*options_.state_file), address);
  }
  state_.watched_address = std::move(address);
}

void Monitor::persist() const {
  if (options_.state_file) detail::write_file_atomic(*options_.state_file, state_.serialize());
}

void Monitor::mark_seen(const ledger::Transaction& txn) {
  state_.seen_ids.insert(txn.id);
  state_.seen_timestamps[txn.id] = txn.timestamp;
  if (options_.state_file) detail::append_line(*options_.state_file, txn.id);
}

std::size_t Monitor::poll_and_dispatch(const Dispatcher& dispatcher) {
  PollOutcome outcome = poll_once(state_, adapter_, options_.lateness_window_ms);
  if (outcome.adapter_failed) return 0;

  // Undecodable ids are final as soon as they are observed.
  for (const auto& id : outcome.state.seen_ids) {
    if (!state_.seen_ids.contains(id)) {
      const bool dispatched = std::any_of(outcome.events.begin(), outcome.events.end(),
                                          [&](const Event& e) { return e.txn.id == id; });
      if (!dispatched) {
        ledger::Transaction stub;
        stub.id = id;
        stub.timestamp = outcome.state.seen_timestamps.at(id);
        mark_seen(stub);
      }
    }
  }
  for (const auto& [id, ts] : outcome.state.seen_timestamps) state_.seen_timestamps.try_emplace(id, ts);

  std::size_t dispatched = 0;
  for (const Event& event : outcome.events) {
    try {
      dispatcher(event);
    } catch (const std::exception& e) {
      spdlog::error("monitor {}: dispatcher failed on {}: {}", state_.watched_address, event.txn.id,
                    e.what());
    }
    mark_seen(event.txn);
    ++dispatched;
  }
  state_.min_timestamp = std::max(state_.min_timestamp, outcome.state.min_timestamp);
  state_.compact();
  persist();
  return dispatched;
}

void Monitor::run(const Dispatcher& dispatcher, std::stop_token stop) {
  std::mutex mutex;
  std::condition_variable_any wake;
  while (!stop.stop_requested()) {
    poll_and_dispatch(dispatcher);
    std::unique_lock lock(mutex);
    wake.wait_for(lock, stop, options_.poll_interval, [] { return false; });
  }
  persist();
}

}  // namespace predictchain::monitor
