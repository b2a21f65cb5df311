#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/config.hpp"
#include "predictchain/datastore.hpp"
#include "predictchain/ledger.hpp"
#include "predictchain/models.hpp"
#include "predictchain/monitor.hpp"
#include "predictchain/protocol.hpp"
#include "predictchain/tokenomics.hpp"

namespace predictchain::oracle {

using ledger::Address;
using ledger::MicroAlgos;

enum class JobStatus { queued, running, done, failed };
std::string_view to_string(JobStatus status) noexcept;
JobStatus parse_job_status(std::string_view text);

/// An outbound payment a job owes: a reward or the single response.
struct Effect {
  Address to;
  MicroAlgos amount = 0;
  protocol::NoteEnvelope note;

  nlohmann::json to_json() const;
  static Effect from_json(const nlohmann::json& j);
};

struct PendingJob {
  std::string request_txn_id;
  std::string op;
  protocol::Args args;  // as decoded from the note
  Address payer;
  MicroAlgos paid = 0;
  std::int64_t round = 0;
  std::int64_t timestamp = 0;
  JobStatus status = JobStatus::queued;
  /// Filled once the handler ran; the response is always the last effect.
  std::optional<std::vector<Effect>> effects;
  std::size_t effects_sent = 0;
  std::string outcome;  // "ok" or the error status sent back
  nlohmann::json settlement;

  nlohmann::json to_json() const;
  static PendingJob from_json(const nlohmann::json& j);
};

// One JSON file per request transaction id; writes are atomic renames.
class JobStore {
 public:
  explicit JobStore(std::filesystem::path dir);

  bool contains(std::string_view request_txn_id) const;
  std::optional<PendingJob> get(std::string_view request_txn_id) const;
  void put(const PendingJob& job);
  /// Queued and running jobs in request commit order.
  std::vector<PendingJob> unfinished() const;
  std::vector<PendingJob> all() const;

 private:
  std::filesystem::path path_for(std::string_view id) const;

  mutable std::mutex mutex_;
  std::filesystem::path dir_;
};

struct PriceQuery {
  tokenomics::PriceKind kind = tokenomics::PriceKind::dataset_upload;
  std::optional<std::int64_t> ds_size;
  std::optional<std::string> model_name;
  // train_model: archetype and dims; input_dim comes from ds_name when given.
  std::optional<models::Archetype> archetype;
  std::optional<std::string> ds_name;
  std::optional<std::size_t> input_dim;
  models::Hyperparams hyperparams;

  /// From HTTP query parameters (kind, ds_size, model_name, raw_model,
  /// ds_name, input_dim, hidden_dim, num_hidden_layers, training_lookback,
  /// target_attrib). Throws Errc::invalid_argument.
  static PriceQuery from_params(const std::map<std::string, std::string>& params);
  std::map<std::string, std::string> to_params() const;
};

struct PriceQuote {
  tokenomics::PriceKind kind = tokenomics::PriceKind::dataset_upload;
  MicroAlgos price = 0;
  std::optional<Decimal> complexity;

  nlohmann::json to_json() const;
  static PriceQuote from_json(const nlohmann::json& j);
};

// The read side a client needs: quotes and registries. Served over HTTP by
// OracleHttpServer and consumed through client::HttpOracleDirectory.
class OracleDirectory {
 public:
  virtual ~OracleDirectory() = default;
  virtual PriceQuote quote(const PriceQuery& query) = 0;
  virtual std::vector<datastore::DatasetMeta> datasets() = 0;
  virtual std::vector<models::ModelMeta> models() = 0;
};

struct OracleConfig {
  Address address = "ORACLE";
  config::LedgerConfig ledger;
  std::filesystem::path schedule_file = "schedule.conf";
  std::filesystem::path storage_root = "storage";
  std::filesystem::path state_dir = "oracle-state";
  std::string dataset_environment = "cas";
  std::chrono::milliseconds poll_interval{250};
  int worker_count = 1;
  std::string http_host = "127.0.0.1";
  int http_port = 8750;
  /// Minted through the faucet at startup when the balance is lower.
  MicroAlgos initial_funding = 0;
  std::uint64_t train_seed = 0;

  static OracleConfig from(const config::KeyValues& kv);
};

class Oracle final : public OracleDirectory {
 public:
  Oracle(OracleConfig config, ledger::ChainAdapter& chain);

  PriceQuote quote(const PriceQuery& query) override;
  std::vector<datastore::DatasetMeta> datasets() override;
  std::vector<models::ModelMeta> models() override;

  /// Monitor dispatcher: persists a queued job for each paid request.
  void enqueue(const monitor::Event& event);
  /// Runs every unfinished job to completion. Returns the number finished.
  std::size_t work(std::stop_token stop = {});
  /// One monitor poll followed by work().
  std::size_t step();
  /// Monitor loop and worker loop until stop is requested.
  void run(std::stop_token stop);

  std::string update_schedule(tokenomics::ScheduleField field, Decimal value);
  tokenomics::RewardSchedule schedule() const { return schedule_.current(); }

  const Address& address() const noexcept { return config_.address; }
  const OracleConfig& config() const noexcept { return config_; }
  const JobStore& jobs() const noexcept { return jobs_; }
  monitor::Monitor& inbound_monitor() noexcept { return monitor_; }

 private:
  std::vector<Effect> execute(const PendingJob& job, bool recovering);
  std::vector<Effect> handle_up_dataset(const PendingJob& job, const protocol::Args& args,
                                        const tokenomics::RewardSchedule& schedule, bool recovering);
  std::vector<Effect> handle_train_model(const PendingJob& job, const protocol::Args& args,
                                         const tokenomics::RewardSchedule& schedule, bool recovering);
  std::vector<Effect> handle_query_model(const PendingJob& job, const protocol::Args& args,
                                         const tokenomics::RewardSchedule& schedule);
  void send_effects(PendingJob& job);
  bool effect_on_chain(const std::string& request_id, std::size_t index);

  const models::TrainedModel& cached_model(const models::ModelMeta& meta);
  const datastore::TableFrame& cached_frame(const datastore::DatasetMeta& meta);

  OracleConfig config_;
  ledger::ChainAdapter& chain_;
  tokenomics::ScheduleBook schedule_;
  datastore::StorageHub storage_;
  datastore::DatasetRegistry dataset_registry_;
  datastore::DatasetStore dataset_store_;
  models::ModelRegistry model_registry_;
  JobStore jobs_;
  monitor::Monitor monitor_;

  std::mutex work_mutex_;
  std::set<std::pair<std::string, std::size_t>> sent_before_start_;
  std::map<std::string, models::TrainedModel, std::less<>> model_cache_;
  std::map<std::string, datastore::TableFrame, std::less<>> frame_cache_;
};

// GET /price, /datasets, /models, /schedule, /health; POST /schedule.
class OracleHttpServer {
 public:
  OracleHttpServer(Oracle& oracle, std::string host, int port);
  ~OracleHttpServer();
  OracleHttpServer(const OracleHttpServer&) = delete;
  OracleHttpServer& operator=(const OracleHttpServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Registries and request/response pairing rebuilt from the chain alone.
struct ChainDataset {
  std::string ds_name;
  Address uploader;
  std::string source_link;
  std::string ds_link;  // where the oracle stored it
  std::int64_t ds_size = 0;
  std::string request_txn_id;
};
struct ChainModel {
  std::string model_name;
  std::string model_link;
  Address trainer;
  std::string archetype;
  std::string ds_name;
  std::string loss;
  std::string accuracy;
  std::string request_txn_id;
};
struct ChainReward {
  std::string txn_id;
  Address to;
  MicroAlgos amount = 0;
  std::string reason;
  std::string ref_name;
  std::string accuracy;
  std::string request_txn_id;
};
struct ChainAudit {
  std::map<std::string, ChainDataset> datasets;
  std::map<std::string, ChainModel> models;
  std::vector<ChainReward> rewards;
  /// Every request paid to the oracle, with the number of responses it got.
  std::map<std::string, int> responses_per_request;
  /// Sum of requests paid minus refunds returned, per payer.
  std::map<Address, MicroAlgos> net_paid;
};
ChainAudit audit_chain(const std::vector<ledger::Transaction>& chain, const Address& oracle);

}  // namespace predictchain::oracle
