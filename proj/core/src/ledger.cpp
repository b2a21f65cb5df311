#include "predictchain/ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>

#include "predictchain/error.hpp"

namespace predictchain::ledger {

namespace {

std::string make_id(std::int64_t round, const PaymentRequest& req, std::int64_t timestamp) {
  std::string material = req.sender + '|' + req.receiver + '|' + std::to_string(req.amount) + '|' +
                         std::to_string(timestamp) + '|';
  material.append(req.note.begin(), req.note.end());
  char prefix[32];
  std::snprintf(prefix, sizeof(prefix), "%012lld", static_cast<long long>(round));
  return std::string("TX") + prefix + "-" + sha256_hex(material).substr(0, 12);
}

FaultInjection checked(const FaultInjection& f) {
  if (!(f.duplicate_probability >= 0.0 && f.duplicate_probability < 1.0)) {
    throw Error(Errc::invalid_argument, "duplicate probability must lie in [0, 1)");
  }
  if (!(f.skip_probability >= 0.0 && f.skip_probability < 1.0)) {
    throw Error(Errc::invalid_argument, "skip probability must lie in [0, 1)");
  }
  return f;
}

}  // namespace

nlohmann::json Transaction::to_json() const {
  return {{"id", id},
          {"sender", sender},
          {"receiver", receiver},
          {"amount", amount},
          {"note", base64_encode(note)},
          {"round", round},
          {"timestamp", timestamp}};
}

Transaction Transaction::from_json(const nlohmann::json& j) {
  Transaction t;
  t.id = j.at("id").get<std::string>();
  t.sender = j.at("sender").get<std::string>();
  t.receiver = j.at("receiver").get<std::string>();
  t.amount = j.at("amount").get<MicroAlgos>();
  t.note = base64_decode(j.at("note").get<std::string>());
  t.round = j.at("round").get<std::int64_t>();
  t.timestamp = j.at("timestamp").get<std::int64_t>();
  return t;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

std::string ChainAdapter::faucet(const Address&, MicroAlgos) {
  throw Error(Errc::unsupported, "this chain adapter cannot mint funds");
}

// RAII flock on the commit log; a no-op when the ledger is memory-only.
class SimulatedLedger::FileLock {
 public:
  FileLock(int fd, bool exclusive) : fd_(fd) {
    if (fd_ < 0) return;
    while (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      if (errno != EINTR) throw Error(Errc::io, std::string("flock failed: ") + std::strerror(errno));
    }
  }
  ~FileLock() {
    if (fd_ >= 0) ::flock(fd_, LOCK_UN);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

SimulatedLedger::SimulatedLedger(Clock clock, FaultInjection faults,
                                 std::optional<std::filesystem::path> commit_log)
    : clock_(std::move(clock)), fault_rng_(faults.seed), faults_(checked(faults)), log_path_(std::move(commit_log)) {
  if (log_path_) {
    if (log_path_->has_parent_path()) std::filesystem::create_directories(log_path_->parent_path());
    log_fd_ = ::open(log_path_->c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (log_fd_ < 0) {
      throw Error(Errc::io, "cannot open commit log '" + log_path_->string() + "': " + std::strerror(errno));
    }
    std::lock_guard lock(mutex_);
    FileLock flock(log_fd_, false);
    sync_locked();
  }
}

SimulatedLedger::~SimulatedLedger() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void SimulatedLedger::sync_locked() {
  if (log_fd_ < 0) return;
  char buf[1 << 16];
  for (;;) {
    const ssize_t n = ::pread(log_fd_, buf, sizeof(buf), static_cast<off_t>(log_offset_));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io, std::string("commit log read failed: ") + std::strerror(errno));
    }
    if (n == 0) break;
    log_offset_ += static_cast<std::uint64_t>(n);
    partial_line_.append(buf, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; (nl = partial_line_.find('\n', start)) != std::string::npos; start = nl + 1) {
      const std::string_view line(partial_line_.data() + start, nl - start);
      if (line.empty()) continue;
      Transaction txn;
      try {
        txn = Transaction::from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io, std::string("corrupt commit log record: ") + e.what());
      }
      if (ids_.contains(txn.id)) continue;
      apply_locked(txn);
    }
    partial_line_.erase(0, start);
  }
}

void SimulatedLedger::apply_locked(const Transaction& txn) {
  if (!log_.empty() && (txn.round <= log_.back().round || txn.timestamp < log_.back().timestamp)) {
    throw Error(Errc::io, "commit log out of order at " + txn.id);
  }
  if (txn.sender == kGenesisAddress) {
    minted_ += txn.amount;
  } else {
    balances_[txn.sender] -= txn.amount + kFlatFee;
    balances_[kFeeSinkAddress] += kFlatFee;
  }
  balances_[txn.receiver] += txn.amount;
  ids_.insert(txn.id);
  inbound_[txn.receiver].push_back(log_.size());
  log_.push_back(txn);
}

std::string SimulatedLedger::commit_locked(const PaymentRequest& req, bool mint) {
  if (req.receiver.empty()) throw Error(Errc::invalid_argument, "receiver address is empty");
  if (req.amount < 0) throw Error(Errc::invalid_argument, "amount must be non-negative");
  if (req.receiver == kGenesisAddress) {
    throw Error(Errc::invalid_argument, "the genesis account cannot receive payments");
  }
  if (!mint) {
    if (req.sender == kGenesisAddress) {
      throw Error(Errc::unknown_account, "the genesis account only mints through the faucet");
    }
    const auto it = balances_.find(req.sender);
    if (it == balances_.end()) {
      throw Error(Errc::unknown_account, "unknown sender '" + req.sender + "'");
    }
    if (it->second < req.amount + kFlatFee) {
      throw Error(Errc::insufficient_funds,
                  "sender '" + req.sender + "' holds " + std::to_string(it->second) +
                      " microALGO, needs " + std::to_string(req.amount + kFlatFee));
    }
  }
  Transaction txn;
  txn.round = log_.empty() ? 1 : log_.back().round + 1;
  txn.timestamp = clock_();
  if (!log_.empty()) txn.timestamp = std::max(txn.timestamp, log_.back().timestamp);
  txn.sender = mint ? kGenesisAddress : req.sender;
  txn.receiver = req.receiver;
  txn.amount = req.amount;
  txn.note = req.note;
  txn.id = make_id(txn.round, {txn.sender, txn.receiver, txn.amount, txn.note}, txn.timestamp);

  if (log_fd_ >= 0) {
    std::string line = txn.to_json().dump();
    line += '\n';
    std::string_view rest = line;
    while (!rest.empty()) {
      const ssize_t n = ::write(log_fd_, rest.data(), rest.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::io, std::string("commit log append failed: ") + std::strerror(errno));
      }
      rest.remove_prefix(static_cast<std::size_t>(n));
    }
    ::fdatasync(log_fd_);
    log_offset_ += line.size();
  }
  apply_locked(txn);
  return txn.id;
}

std::string SimulatedLedger::submit(const PaymentRequest& request) {
  std::lock_guard lock(mutex_);
  FileLock flock(log_fd_, true);
  sync_locked();
  return commit_locked(request, false);
}

std::string SimulatedLedger::faucet(const Address& address, MicroAlgos amount) {
  if (amount < 0) throw Error(Errc::invalid_argument, "faucet amount must be non-negative");
  std::lock_guard lock(mutex_);
  FileLock flock(log_fd_, true);
  sync_locked();
  return commit_locked({kGenesisAddress, address, amount, {}}, true);
}

std::vector<Transaction> SimulatedLedger::lookup(const Address& recipient, std::int64_t min_timestamp) {
  std::lock_guard lock(mutex_);
  {
    FileLock flock(log_fd_, false);
    sync_locked();
  }
  std::vector<Transaction> out;
  const auto it = inbound_.find(recipient);
  if (it == inbound_.end()) return out;
  const auto& idx = it->second;
  auto first = std::lower_bound(idx.begin(), idx.end(), min_timestamp,
                                [&](std::size_t i, std::int64_t t) { return log_[i].timestamp < t; });
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (; first != idx.end(); ++first) {
    const Transaction& txn = log_[*first];
    if (faults_.skip_probability > 0.0 && coin(fault_rng_) < faults_.skip_probability) continue;
    out.push_back(txn);
    while (faults_.duplicate_probability > 0.0 && coin(fault_rng_) < faults_.duplicate_probability) {
      out.push_back(txn);
    }
  }
  if (faults_.reorder) std::shuffle(out.begin(), out.end(), fault_rng_);
  return out;
}

MicroAlgos SimulatedLedger::balance(const Address& address) {
  std::lock_guard lock(mutex_);
  {
    FileLock flock(log_fd_, false);
    sync_locked();
  }
  const auto it = balances_.find(address);
  return it == balances_.end() ? 0 : it->second;
}

std::vector<Transaction> SimulatedLedger::transactions() {
  std::lock_guard lock(mutex_);
  {
    FileLock flock(log_fd_, false);
    sync_locked();
  }
  return log_;
}

void SimulatedLedger::set_fault_injection(const FaultInjection& faults) {
  std::lock_guard lock(mutex_);
  faults_ = checked(faults);
  fault_rng_.seed(faults.seed);
}

bool SimulatedLedger::has_account(const Address& address) {
  std::lock_guard lock(mutex_);
  return balances_.contains(address);
}

MicroAlgos SimulatedLedger::total_minted() {
  std::lock_guard lock(mutex_);
  {
    FileLock flock(log_fd_, false);
    sync_locked();
  }
  return minted_;
}

std::map<Address, MicroAlgos> SimulatedLedger::balances() {
  std::lock_guard lock(mutex_);
  {
    FileLock flock(log_fd_, false);
    sync_locked();
  }
  return balances_;
}

std::map<Address, MicroAlgos> SimulatedLedger::replay(const std::vector<Transaction>& log) {
  std::map<Address, MicroAlgos> out;
  for (const auto& txn : log) {
    if (txn.sender != kGenesisAddress) {
      out[txn.sender] -= txn.amount + kFlatFee;
      out[kFeeSinkAddress] += kFlatFee;
    }
    out[txn.receiver] += txn.amount;
  }
  return out;
}

}  // namespace predictchain::ledger
