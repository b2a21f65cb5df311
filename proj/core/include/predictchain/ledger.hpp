#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/encoding.hpp"

namespace predictchain::ledger {

using Address = std::string;
/// Integer microALGO; 1 ALGO = 1'000'000 microALGO.
using MicroAlgos = std::int64_t;

inline constexpr MicroAlgos kMicroAlgosPerAlgo = 1'000'000;
inline constexpr MicroAlgos kFlatFee = 1'000;

inline const Address kGenesisAddress = "GENESIS";
inline const Address kFeeSinkAddress = "FEE_SINK";

struct Transaction {
  std::string id;
  Address sender;
  Address receiver;
  MicroAlgos amount = 0;
  Bytes note;
  std::int64_t round = 0;
  std::int64_t timestamp = 0;  // milliseconds

  /// Commit-log record; the note travels base64 encoded.
  nlohmann::json to_json() const;
  static Transaction from_json(const nlohmann::json& j);

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct PaymentRequest {
  Address sender;
  Address receiver;
  MicroAlgos amount = 0;
  Bytes note;
};

/// Returns "now" in milliseconds.
using Clock = std::function<std::int64_t()>;
Clock system_clock();

/// Deterministic clock for tests: every read advances by `step`.
class ManualClock {
 public:
  explicit ManualClock(std::int64_t start = 0, std::int64_t step = 1) : now_(start), step_(step) {}
  std::int64_t operator()() {
    std::lock_guard lock(mutex_);
    const auto t = now_;
    now_ += step_;
    return t;
  }
  void advance(std::int64_t ms) {
    std::lock_guard lock(mutex_);
    now_ += ms;
  }

 private:
  std::mutex mutex_;
  std::int64_t now_;
  std::int64_t step_;
};

/// Indexer flakiness knobs. Skips are transient: every lookup draws afresh,
/// so a skipped transaction shows up on a later poll. After each returned
/// copy another copy follows with duplicate_probability. Both lie in [0, 1).
struct FaultInjection {
  double duplicate_probability = 0.0;
  double skip_probability = 0.0;
  bool reorder = false;
  std::uint64_t seed = 0;
};

class ChainAdapter {
 public:
  virtual ~ChainAdapter() = default;

  /// Commits a payment (instantly final) and returns its id.
  virtual std::string submit(const PaymentRequest& request) = 0;

  /// Every committed transaction to `recipient` with timestamp >=
  /// `min_timestamp`, at least once, in no guaranteed order.
  virtual std::vector<Transaction> lookup(const Address& recipient, std::int64_t min_timestamp) = 0;

  virtual MicroAlgos balance(const Address& address) = 0;

  /// Full commit log in commit order.
  virtual std::vector<Transaction> transactions() = 0;

  /// Mints funds through the genesis account. Simulated chains only.
  virtual std::string faucet(const Address& address, MicroAlgos amount);
};

// In-memory chain with instant finality. With a commit-log path it replays
// the log on construction and appends every commit; the log is guarded with
// flock(2) and re-read before each operation, so several processes can share
// one chain through the same file.
class SimulatedLedger final : public ChainAdapter {
 public:
  explicit SimulatedLedger(Clock clock = system_clock(), FaultInjection faults = {},
                           std::optional<std::filesystem::path> commit_log = std::nullopt);
  ~SimulatedLedger() override;

  SimulatedLedger(const SimulatedLedger&) = delete;
  SimulatedLedger& operator=(const SimulatedLedger&) = delete;

  std::string submit(const PaymentRequest& request) override;
  std::vector<Transaction> lookup(const Address& recipient, std::int64_t min_timestamp) override;
  MicroAlgos balance(const Address& address) override;
  std::vector<Transaction> transactions() override;
  std::string faucet(const Address& address, MicroAlgos amount) override;

  void set_fault_injection(const FaultInjection& faults);

  bool has_account(const Address& address);
  MicroAlgos total_minted();
  /// Every account with a balance entry, fee sink included, genesis excluded.
  std::map<Address, MicroAlgos> balances();

  /// Balances produced by applying `log` from genesis.
  static std::map<Address, MicroAlgos> replay(const std::vector<Transaction>& log);

 private:
  std::string commit_locked(const PaymentRequest& request, bool mint);
  void apply_locked(const Transaction& txn);
  void sync_locked();

  class FileLock;

  Clock clock_;
  std::mutex mutex_;
  std::mt19937_64 fault_rng_;
  FaultInjection faults_;

  std::vector<Transaction> log_;
  std::unordered_set<std::string> ids_;
  std::unordered_map<Address, std::vector<std::size_t>> inbound_;
  std::map<Address, MicroAlgos> balances_;
  MicroAlgos minted_ = 0;

  std::optional<std::filesystem::path> log_path_;
  int log_fd_ = -1;
  std::uint64_t log_offset_ = 0;
  std::string partial_line_;
};

}  // namespace predictchain::ledger
