#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/config.hpp"
#include "predictchain/ledger.hpp"
#include "predictchain/monitor.hpp"
#include "predictchain/oracle.hpp"
#include "predictchain/protocol.hpp"

namespace predictchain::client {

using ledger::Address;
using ledger::MicroAlgos;

/// User name -> ledger address, persisted as name=address lines.
class AccountStore {
 public:
  AccountStore() = default;
  explicit AccountStore(std::filesystem::path file);

  /// Registers the user on first use. Names are [A-Za-z0-9_.-]{1,64}.
  Address ensure(const std::string& user);
  std::optional<Address> find(std::string_view user) const;
  std::map<std::string, Address> all() const;

  /// Deterministic address derived from the user name.
  static Address address_for(std::string_view user);

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> file_;
  std::map<std::string, Address, std::less<>> accounts_;
};

struct Update {
  std::string txn_id;
  std::int64_t timestamp = 0;
  std::string op;
  protocol::Args args;

  nlohmann::json to_json() const;
  static Update from_json(const nlohmann::json& j);
};

// Per-user FIFO, drained at most once per update. With a directory each
// user's queue is mirrored to <dir>/<user>.jsonl.
class UpdateQueue {
 public:
  UpdateQueue() = default;
  explicit UpdateQueue(std::filesystem::path dir);

  void push(const std::string& user, const Update& update);
  std::vector<Update> drain(const std::string& user);
  std::size_t size(const std::string& user) const;

 private:
  std::filesystem::path file_for(const std::string& user) const;

  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> dir_;
  std::map<std::string, std::deque<Update>> queues_;
};

struct NameList {
  std::vector<std::string> names;
  bool stale = false;
  std::int64_t last_refresh = 0;  // ms since epoch; 0 = never
};

enum class NameKind { datasets, models };
NameKind parse_name_kind(std::string_view text);

struct SubmitResult {
  std::string txn_id;
  MicroAlgos price = 0;
  Address oracle;
};

struct HistoryEntry {
  ledger::Transaction txn;
  std::optional<protocol::NoteEnvelope> note;

  nlohmann::json to_json() const;
};

struct ClientConfig {
  std::string oracle_url = "http://127.0.0.1:8750";
  Address oracle_address = "ORACLE";
  config::LedgerConfig ledger;
  std::filesystem::path state_dir = "client-state";
  std::chrono::milliseconds poll_interval{250};
  std::string http_host = "127.0.0.1";
  int http_port = 8760;
  /// Allows POST /api/faucet on simulated ledgers.
  bool faucet_enabled = true;

  static ClientConfig from(const config::KeyValues& kv);
};

// Reaches the oracle's read-only HTTP endpoints.
class HttpOracleDirectory final : public oracle::OracleDirectory {
 public:
  explicit HttpOracleDirectory(std::string base_url);
  oracle::PriceQuote quote(const oracle::PriceQuery& query) override;
  std::vector<datastore::DatasetMeta> datasets() override;
  std::vector<models::ModelMeta> models() override;

 private:
  std::string base_url_;
};

class Client {
 public:
  Client(ClientConfig config, ledger::ChainAdapter& chain, oracle::OracleDirectory& directory);
  ~Client();

  /// Never touches the chain. Throws Errc::invalid_argument for an unknown kind.
  oracle::PriceQuote get_price(const std::map<std::string, std::string>& params);

  /// Validates, quotes and pays the oracle exactly the quote. With
  /// `max_price`, a quote above it raises Errc::quote_changed before any spend.
  SubmitResult submit(const std::string& user, std::string_view op, const protocol::Args& args,
                      std::optional<MicroAlgos> max_price = std::nullopt);

  std::vector<Update> fetch_updates(const std::string& user);
  NameList list_names(NameKind kind);
  std::vector<HistoryEntry> history(const Address& address);

  Address register_user(const std::string& user);
  std::optional<Address> address_of(std::string_view user) const { return accounts_.find(user); }
  MicroAlgos balance(const Address& address) { return chain_.balance(address); }
  std::string faucet(const std::string& user, MicroAlgos amount);

  /// Polls every user's monitor once. Returns updates queued.
  std::size_t poll();
  /// poll() every poll_interval until stop is requested.
  void run(std::stop_token stop);

  const ClientConfig& config() const noexcept { return config_; }

 private:
  void refresh_names();
  monitor::Monitor& monitor_for(const std::string& user, const Address& address);

  ClientConfig config_;
  ledger::ChainAdapter& chain_;
  oracle::OracleDirectory& directory_;
  AccountStore accounts_;
  UpdateQueue updates_;

  std::mutex poll_mutex_;
  std::mutex monitors_mutex_;
  std::map<std::string, std::unique_ptr<monitor::Monitor>> monitors_;

  std::mutex names_mutex_;
  NameList datasets_;
  NameList models_;
};

// GET /api/price, /api/names, /api/updates, /api/history, /api/account;
// POST /api/submit, /api/faucet.
class ClientHttpServer {
 public:
  ClientHttpServer(Client& client, std::string host, int port);
  ~ClientHttpServer();
  ClientHttpServer(const ClientHttpServer&) = delete;
  ClientHttpServer& operator=(const ClientHttpServer&) = delete;

  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace predictchain::client
