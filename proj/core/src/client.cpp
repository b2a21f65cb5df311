#include "predictchain/client.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <sstream>

#include "fsutil.hpp"
#include "http_util.hpp"
#include "predictchain/error.hpp"

namespace predictchain::client {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool valid_user_name(std::string_view user) {
  if (user.empty() || user.size() > 64) return false;
  return std::all_of(user.begin(), user.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

/// "<TRAIN_MODEL>", "TRAIN_MODEL" and "train_model" all name the same op.
std::string normalize_op(std::string_view op) {
  std::string s(op);
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') s = s.substr(1, s.size() - 2);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return "<" + s + ">";
}

json args_json(const protocol::Args& args) {
  json j = json::object();
  for (const auto& [k, v] : args) j[k] = v;
  return j;
}

}  // namespace

AccountStore::AccountStore(fs::path file) : file_(std::move(file)) {
  for (const auto& line : detail::read_lines(*file_)) {
    const auto eq = line.find('=');
    if (line.empty() || eq == std::string::npos) continue;
    accounts_.insert_or_assign(line.substr(0, eq), line.substr(eq + 1));
  }
}

Address AccountStore::address_for(std::string_view user) { return "USR-" + sha256_hex(user).substr(0, 20); }

Address AccountStore::ensure(const std::string& user) {
  if (!valid_user_name(user)) {
    throw Error(Errc::invalid_argument, "user names are 1-64 characters of [A-Za-z0-9_.-], got '" + user + "'");
  }
  std::lock_guard lock(mutex_);
  if (const auto it = accounts_.find(user); it != accounts_.end()) return it->second;
  Address address = address_for(user);
  if (file_) detail::append_line(*file_, user + "=" + address);
  accounts_.emplace(user, address);
  return address;
}

std::optional<Address> AccountStore::find(std::string_view user) const {
  std::lock_guard lock(mutex_);
  const auto it = accounts_.find(user);
  if (it == accounts_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, Address> AccountStore::all() const {
  std::lock_guard lock(mutex_);
  return {accounts_.begin(), accounts_.end()};
}

json Update::to_json() const {
  return {{"txn_id", txn_id}, {"timestamp", timestamp}, {"op", op}, {"args", args_json(args)}};
}

Update Update::from_json(const json& j) {
  Update u;
  u.txn_id = j.at("txn_id").get<std::string>();
  u.timestamp = j.at("timestamp").get<std::int64_t>();
  u.op = j.at("op").get<std::string>();
  for (const auto& [k, v] : j.at("args").items()) u.args.emplace(k, v);
  return u;
}

UpdateQueue::UpdateQueue(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(*dir_);
  for (const auto& entry : fs::directory_iterator(*dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    auto& q = queues_[entry.path().stem().string()];
    for (const auto& line : detail::read_lines(entry.path())) {
      if (!line.empty()) q.push_back(Update::from_json(json::parse(line)));
    }
  }
}

fs::path UpdateQueue::file_for(const std::string& user) const { return *dir_ / (user + ".jsonl"); }

void UpdateQueue::push(const std::string& user, const Update& update) {
  std::lock_guard lock(mutex_);
  if (dir_) detail::append_line(file_for(user), update.to_json().dump());
  queues_[user].push_back(update);
}

std::vector<Update> UpdateQueue::drain(const std::string& user) {
  std::lock_guard lock(mutex_);
  auto it = queues_.find(user);
  if (it == queues_.end() || it->second.empty()) return {};
  std::vector<Update> out(it->second.begin(), it->second.end());
  it->second.clear();
  if (dir_) detail::write_file_atomic(file_for(user), "");
  return out;
}

std::size_t UpdateQueue::size(const std::string& user) const {
  std::lock_guard lock(mutex_);
  const auto it = queues_.find(user);
  return it == queues_.end() ? 0 : it->second.size();
}

NameKind parse_name_kind(std::string_view text) {
  if (text == "datasets") return NameKind::datasets;
  if (text == "models") return NameKind::models;
  throw Error(Errc::invalid_argument, "name kind must be datasets or models, got '" + std::string(text) + "'");
}

json HistoryEntry::to_json() const {
  json j = txn.to_json();
  if (note) j["decoded"] = {{"op", note->op}, {"args", args_json(note->args)}};
  return j;
}

ClientConfig ClientConfig::from(const config::KeyValues& kv) {
  ClientConfig c;
  c.oracle_url = kv.get("oracle_url", c.oracle_url);
  c.oracle_address = kv.get("oracle_address", c.oracle_address);
  c.ledger = config::LedgerConfig::from(kv);
  c.state_dir = kv.get_path("state_dir", c.state_dir);
  c.poll_interval = std::chrono::milliseconds(kv.get_int("poll_interval_ms", c.poll_interval.count()));
  c.http_host = kv.get("http_host", c.http_host);
  c.http_port = static_cast<int>(kv.get_int("http_port", c.http_port));
  c.faucet_enabled = kv.get_int("faucet_enabled", 1) != 0;
  if (c.poll_interval.count() < 1) throw Error(Errc::parse, "poll_interval_ms must be positive");
  return c;
}

HttpOracleDirectory::HttpOracleDirectory(std::string base_url) : base_url_(std::move(base_url)) {}

namespace {

httplib::Client make_http(const std::string& base_url) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(5, 0);
  cli.set_read_timeout(30, 0);
  return cli;
}

}  // namespace

oracle::PriceQuote HttpOracleDirectory::quote(const oracle::PriceQuery& query) {
  auto cli = make_http(base_url_);
  httplib::Params params;
  for (const auto& [k, v] : query.to_params()) params.emplace(k, v);
  return oracle::PriceQuote::from_json(
      detail::expect_json(cli.Get("/price", params, httplib::Headers{}), "oracle price query"));
}

std::vector<datastore::DatasetMeta> HttpOracleDirectory::datasets() {
  auto cli = make_http(base_url_);
  std::vector<datastore::DatasetMeta> out;
  for (const auto& j : detail::expect_json(cli.Get("/datasets"), "oracle dataset listing")) {
    out.push_back(datastore::DatasetMeta::from_json(j));
  }
  return out;
}

std::vector<models::ModelMeta> HttpOracleDirectory::models() {
  auto cli = make_http(base_url_);
  std::vector<models::ModelMeta> out;
  for (const auto& j : detail::expect_json(cli.Get("/models"), "oracle model listing")) {
    out.push_back(models::ModelMeta::from_json(j));
  }
  return out;
}

Client::Client(ClientConfig config, ledger::ChainAdapter& chain, oracle::OracleDirectory& directory)
    : config_(std::move(config)),
      chain_(chain),
      directory_(directory),
      accounts_((fs::create_directories(config_.state_dir), config_.state_dir / "accounts.conf")),
      updates_(config_.state_dir / "updates") {
  for (const auto& [user, address] : accounts_.all()) monitor_for(user, address);
}

Client::~Client() = default;

oracle::PriceQuote Client::get_price(const std::map<std::string, std::string>& params) {
  // Parsing first rejects unknown kinds without contacting the oracle.
  return directory_.quote(oracle::PriceQuery::from_params(params));
}

SubmitResult Client::submit(const std::string& user, std::string_view op_text, const protocol::Args& raw_args,
                            std::optional<MicroAlgos> max_price) {
  const std::string op = normalize_op(op_text);
  const auto* info = protocol::find_opcode(op);
  if (!info || info->kind != protocol::OpKind::request) {
    throw Error(Errc::unknown_opcode, "'" + std::string(op_text) + "' is not a request operation");
  }
  const protocol::Args args = protocol::validate_args(op, raw_args);
  const Bytes note = protocol::encode_note({op, args});

  oracle::PriceQuery query;
  if (op == protocol::op::kUpDataset) {
    query.kind = tokenomics::PriceKind::dataset_upload;
    query.ds_size = protocol::arg_int(args, "ds_size");
  } else if (op == protocol::op::kTrainModel) {
    query.kind = tokenomics::PriceKind::train_model;
    query.archetype = models::parse_archetype(protocol::arg_string(args, "raw_model"));
    query.ds_name = protocol::arg_string(args, "ds_name");
    query.hyperparams.hidden_dim = static_cast<int>(protocol::arg_int(args, "hidden_dim"));
    query.hyperparams.num_hidden_layers = static_cast<int>(protocol::arg_int(args, "num_hidden_layers"));
    query.hyperparams.training_lookback = static_cast<int>(protocol::arg_int(args, "training_lookback"));
    query.hyperparams.target_attrib = protocol::arg_string(args, "target_attrib");
  } else {
    query.kind = tokenomics::PriceKind::query_model;
    query.model_name = protocol::arg_string(args, "model_name");
  }

  const Address address = register_user(user);
  const MicroAlgos price = directory_.quote(query).price;
  if (max_price && price > *max_price) {
    throw Error(Errc::quote_changed, "the price rose to " + std::to_string(price) + " microALGO (confirmed " +
                                         std::to_string(*max_price) + "); re-confirm to submit");
  }
  const std::string id = chain_.submit({address, config_.oracle_address, price, note});
  spdlog::info("client: {} submitted {} paying {} ({})", user, op, price, id);
  refresh_names();
  return {id, price, config_.oracle_address};
}

std::vector<Update> Client::fetch_updates(const std::string& user) { return updates_.drain(user); }

void Client::refresh_names() {
  try {
    std::vector<std::string> ds;
    std::vector<std::string> ms;
    for (const auto& d : directory_.datasets()) ds.push_back(d.ds_name);
    for (const auto& m : directory_.models()) ms.push_back(m.model_name);
    std::lock_guard lock(names_mutex_);
    const auto now = now_ms();
    datasets_ = {std::move(ds), false, now};
    models_ = {std::move(ms), false, now};
  } catch (const std::exception& e) {
    spdlog::warn("client: name refresh failed: {}", e.what());
    std::lock_guard lock(names_mutex_);
    datasets_.stale = true;
    models_.stale = true;
  }
}

NameList Client::list_names(NameKind kind) {
  refresh_names();
  std::lock_guard lock(names_mutex_);
  return kind == NameKind::datasets ? datasets_ : models_;
}

std::vector<HistoryEntry> Client::history(const Address& address) {
  std::vector<HistoryEntry> out;
  for (auto& txn : chain_.transactions()) {
    if (txn.sender != address && txn.receiver != address) continue;
    HistoryEntry entry{std::move(txn), std::nullopt};
    try {
      entry.note = protocol::decode_note(entry.txn.note);
    } catch (const Error&) {
    }
    out.push_back(std::move(entry));
  }
  return out;
}

Address Client::register_user(const std::string& user) {
  const Address address = accounts_.ensure(user);
  monitor_for(user, address);
  return address;
}

std::string Client::faucet(const std::string& user, MicroAlgos amount) {
  if (!config_.faucet_enabled) throw Error(Errc::unsupported, "the faucet is disabled on this client");
  return chain_.faucet(register_user(user), amount);
}

monitor::Monitor& Client::monitor_for(const std::string& user, const Address& address) {
  std::lock_guard lock(monitors_mutex_);
  auto& slot = monitors_[user];
  if (!slot) {
    fs::create_directories(config_.state_dir / "monitors");
    slot = std::make_unique<monitor::Monitor>(
        address, chain_,
        monitor::MonitorOptions{config_.poll_interval, monitor::kDefaultLatenessWindowMs,
                                config_.state_dir / "monitors" / (user + ".state")});
  }
  return *slot;
}

std::size_t Client::poll() {
  std::lock_guard poll_lock(poll_mutex_);
  std::vector<std::pair<std::string, monitor::Monitor*>> targets;
  {
    std::lock_guard lock(monitors_mutex_);
    for (auto& [user, m] : monitors_) targets.emplace_back(user, m.get());
  }
  std::size_t queued = 0;
  bool names_changed = false;
  for (auto& [user, m] : targets) {
    m->poll_and_dispatch([&, u = user](const monitor::Event& e) {
      if (e.txn.sender != config_.oracle_address) return;
      const auto* info = protocol::find_opcode(e.envelope.op);
      if (!info || info->kind != protocol::OpKind::response) return;
      updates_.push(u, {e.txn.id, e.txn.timestamp, e.envelope.op, e.envelope.args});
      ++queued;
      names_changed = true;
    });
  }
  if (names_changed) refresh_names();
  return queued;
}

void Client::run(std::stop_token stop) {
  std::mutex mutex;
  std::condition_variable_any wake;
  while (!stop.stop_requested()) {
    poll();
    std::unique_lock lock(mutex);
    wake.wait_for(lock, stop, config_.poll_interval, [] { return false; });
  }
}

}  // namespace predictchain::client
