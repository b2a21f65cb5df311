// predictchain: command-line front end for the client HTTP API, plus the
// long-running oracle and client nodes.

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "predictchain/client.hpp"
#include "predictchain/config.hpp"
#include "predictchain/error.hpp"
#include "predictchain/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace predictchain;

namespace {

constexpr int kExitApi = 1;
constexpr int kExitTransport = 3;

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ApiError : std::runtime_error {
  ApiError(std::string c, const std::string& m) : std::runtime_error(m), code(std::move(c)) {}
  std::string code;
};

struct Globals {
  std::string url = "http://127.0.0.1:8760";
  std::string user = "default";
  std::string format = "plain";
  std::string log_level = "warn";
};

json check(const httplib::Result& res, const std::string& what) {
  if (!res) throw TransportError(what + ": " + httplib::to_string(res.error()));
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception&) {
    throw TransportError(what + ": HTTP " + std::to_string(res->status) + " with a non-JSON body");
  }
  if (res->status >= 400) {
    throw ApiError(body.value("error", "http_" + std::to_string(res->status)), body.value("message", res->body));
  }
  return body;
}

class Api {
 public:
  explicit Api(const std::string& url) : http_(url) {
    http_.set_connection_timeout(5, 0);
    http_.set_read_timeout(60, 0);
  }

  json get(const std::string& path, const httplib::Params& params = {}) {
    return check(http_.Get(path, params, httplib::Headers{}), "GET " + path);
  }
  json post(const std::string& path, const json& body) {
    return check(http_.Post(path, body.dump(), "application/json"), "POST " + path);
  }

 private:
  httplib::Client http_;
};

void emit(const Globals& g, const json& j, const std::string& plain) {
  if (g.format == "json") {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << plain;
    if (!plain.empty() && plain.back() != '\n') std::cout << '\n';
  }
}

std::string describe_note(const json& note) {
  if (note.is_null()) return "";
  std::string s = note.value("op", "");
  const json args = note.value("args", json::object());
  for (const auto& [k, v] : args.items()) {
    s += " " + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return s;
}

json submit(Api& api, const Globals& g, const std::string& op, const json& args, std::optional<std::int64_t> max_price) {
  json body = {{"op", op}, {"args", args}, {"user", g.user}};
  if (max_price) body["max_price"] = *max_price;
  return api.post("/api/submit", body);
}

void print_submitted(const Globals& g, const json& r) {
  emit(g, r,
       "submitted " + r.value("txn_id", "") + " paying " + std::to_string(r.value("price_microalgo", 0LL)) +
           " microalgo to " + r.value("oracle", ""));
}

// ---- nodes ----

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

int run_oracle_node(const fs::path& config_file) {
  const auto kv = config::KeyValues::load(config_file);
  auto cfg = oracle::OracleConfig::from(kv);
  auto chain = config::open_chain(cfg.ledger);
  oracle::Oracle node(cfg, *chain);
  oracle::OracleHttpServer http(node, cfg.http_host, cfg.http_port);
  const int port = http.start();
  std::cout << "oracle " << node.address() << " listening on " << cfg.http_host << ":" << port << std::endl;
  std::jthread worker([&node](std::stop_token st) { node.run(st); });
  wait_for_signal();
  worker.request_stop();
  worker.join();
  http.stop();
  return 0;
}

int run_client_node(const fs::path& config_file) {
  const auto kv = config::KeyValues::load(config_file);
  auto cfg = client::ClientConfig::from(kv);
  auto chain = config::open_chain(cfg.ledger);
  client::HttpOracleDirectory directory(cfg.oracle_url);
  client::Client node(cfg, *chain, directory);
  client::ClientHttpServer http(node, cfg.http_host, cfg.http_port);
  const int port = http.start();
  std::cout << "client listening on " << cfg.http_host << ":" << port << std::endl;
  std::jthread poller([&node](std::stop_token st) { node.run(st); });
  wait_for_signal();
  poller.request_stop();
  poller.join();
  http.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictchain: datasets, training and queries paid over a ledger"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--url", g.url, "client node base URL")->envname("PREDICTCHAIN_URL")->capture_default_str();
  app.add_option("--user", g.user, "user name")->envname("PREDICTCHAIN_USER")->capture_default_str();
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"plain", "json"}))->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error")->capture_default_str();

  // node
  auto* node = app.add_subcommand("node", "run a long-lived node");
  node->require_subcommand(1);
  fs::path oracle_config, client_config;
  auto* node_oracle = node->add_subcommand("oracle", "run the oracle");
  node_oracle->add_option("--config", oracle_config, "oracle config file")->required();
  auto* node_client = node->add_subcommand("client", "run the client API");
  node_client->add_option("--config", client_config, "client config file")->required();

  // price
  std::string price_kind;
  std::optional<std::int64_t> price_size;
  std::optional<std::string> price_model, price_archetype, price_dataset, price_target;
  std::optional<int> price_input_dim, price_hidden, price_layers, price_lookback;
  auto* price = app.add_subcommand("price", "quote a request without paying");
  price->add_option("kind", price_kind, "dataset_upload|train_model|query_model")->required();
  price->add_option("--size", price_size, "dataset size in bytes");
  price->add_option("--model", price_model, "model name (query_model)");
  price->add_option("--archetype", price_archetype, "mlp|rnn|lstm|gru (train_model)");
  price->add_option("--dataset", price_dataset, "dataset name (train_model input width)");
  price->add_option("--input-dim", price_input_dim, "input width when no dataset is given");
  price->add_option("--hidden-dim", price_hidden);
  price->add_option("--layers", price_layers);
  price->add_option("--lookback", price_lookback);
  price->add_option("--target", price_target);

  // upload
  fs::path upload_file;
  std::string upload_name;
  std::optional<std::string> upload_time, upload_split;
  std::optional<std::int64_t> max_price;
  auto* upload = app.add_subcommand("upload", "publish a CSV dataset");
  upload->add_option("file", upload_file)->required()->check(CLI::ExistingFile);
  upload->add_option("--name", upload_name)->required();
  upload->add_option("--time-attrib", upload_time, "timestamp column, ordered and excluded from features");
  upload->add_option("--sub-split-attrib", upload_split, "column used to pick a series");
  upload->add_option("--max-price", max_price, "refuse to pay more than this");

  // train
  models::Hyperparams hp;
  hp.sub_split_value = 0;
  std::string train_arch, train_dataset, train_name;
  bool no_sub_split = false;
  auto* train = app.add_subcommand("train", "train a model on a published dataset");
  train->add_option("archetype", train_arch)->required()->check(CLI::IsMember({"mlp", "rnn", "lstm", "gru"}));
  train->add_option("--dataset", train_dataset)->required();
  train->add_option("--name", train_name)->required();
  train->add_option("--epochs", hp.num_epochs)->capture_default_str();
  train->add_option("--hidden-dim", hp.hidden_dim)->capture_default_str();
  train->add_option("--layers", hp.num_hidden_layers)->capture_default_str();
  train->add_option("--lag", hp.time_lag)->capture_default_str();
  train->add_option("--lookback", hp.training_lookback)->capture_default_str();
  train->add_option("--target", hp.target_attrib)->capture_default_str();
  auto* sub_opt = train->add_option("--sub-split", hp.sub_split_value, "series index within the dataset");
  train->add_flag("--no-sub-split", no_sub_split, "train on the whole table")->excludes(sub_opt);
  train->add_option("--max-price", max_price);

  // query
  std::string query_model;
  std::optional<std::string> query_input, query_row;
  auto* query = app.add_subcommand("query", "run a trained model");
  query->add_option("model", query_model)->required();
  auto* in_opt = query->add_option("--input", query_input, "JSON array of inputs");
  auto* row_opt = query->add_option("--row", query_row, "dataset row reference ds:idx");
  in_opt->excludes(row_opt);
  query->add_option("--max-price", max_price);

  // updates
  double wait_seconds = 0;
  auto* updates = app.add_subcommand("updates", "drain responses addressed to the user");
  updates->add_option("--wait", wait_seconds, "seconds to wait for at least one update");

  std::string names_kind;
  auto* names = app.add_subcommand("names", "list published datasets or models");
  names->add_option("kind", names_kind)->required()->check(CLI::IsMember({"datasets", "models"}));

  std::optional<std::string> history_address;
  auto* history = app.add_subcommand("history", "transactions touching an address");
  history->add_option("address", history_address, "defaults to the --user account");

  std::string faucet_user;
  std::int64_t faucet_amount = 0;
  auto* faucet = app.add_subcommand("faucet", "mint funds on a simulated ledger");
  faucet->add_option("user", faucet_user)->required();
  faucet->add_option("amount", faucet_amount)->required()->check(CLI::PositiveNumber);

  auto* account = app.add_subcommand("account", "address and balance of --user");

  std::string mult_url = "http://127.0.0.1:8750";
  std::optional<std::string> mult_field, mult_value;
  auto* mult = app.add_subcommand("mult", "show or change the oracle reward schedule");
  mult->add_option("--oracle-url", mult_url)->envname("PREDICTCHAIN_ORACLE_URL")->capture_default_str();
  mult->add_option("field", mult_field);
  mult->add_option("value", mult_value);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (node_oracle->parsed()) return run_oracle_node(oracle_config);
    if (node_client->parsed()) return run_client_node(client_config);

    Api api(g.url);
    if (price->parsed()) {
      httplib::Params p{{"kind", price_kind}};
      if (price_size) p.emplace("ds_size", std::to_string(*price_size));
      if (price_model) p.emplace("model_name", *price_model);
      if (price_archetype) p.emplace("raw_model", *price_archetype);
      if (price_dataset) p.emplace("ds_name", *price_dataset);
      if (price_input_dim) p.emplace("input_dim", std::to_string(*price_input_dim));
      if (price_hidden) p.emplace("hidden_dim", std::to_string(*price_hidden));
      if (price_layers) p.emplace("num_hidden_layers", std::to_string(*price_layers));
      if (price_lookback) p.emplace("training_lookback", std::to_string(*price_lookback));
      if (price_target) p.emplace("target_attrib", *price_target);
      const json r = api.get("/api/price", p);
      std::string plain = r.value("kind", price_kind) + ": " + std::to_string(r.value("price_microalgo", 0LL)) + " microalgo";
      if (r.contains("complexity") && !r["complexity"].is_null()) {
        plain += " (complexity " + r["complexity"].get<std::string>() + ")";
      }
      emit(g, r, plain);
    } else if (upload->parsed()) {
      const fs::path abs = fs::absolute(upload_file).lexically_normal();
      json args = {{"ds_name", upload_name},
                   {"ds_link", "local://" + abs.string()},
                   {"ds_size", std::to_string(fs::file_size(abs))}};
      if (upload_time) args["time_attrib"] = *upload_time;
      if (upload_split) args["sub_split_attrib"] = *upload_split;
      print_submitted(g, submit(api, g, "UP_DATASET", args, max_price));
    } else if (train->parsed()) {
      if (no_sub_split) hp.sub_split_value.reset();
      json args = {{"raw_model", train_arch},
                   {"ds_name", train_dataset},
                   {"new_model_name", train_name},
                   {"num_epochs", std::to_string(hp.num_epochs)},
                   {"target_attrib", hp.target_attrib},
                   {"hidden_dim", std::to_string(hp.hidden_dim)},
                   {"num_hidden_layers", std::to_string(hp.num_hidden_layers)},
                   {"time_lag", std::to_string(hp.time_lag)},
                   {"training_lookback", std::to_string(hp.training_lookback)}};
      if (hp.sub_split_value) args["sub_split_value"] = std::to_string(*hp.sub_split_value);
      print_submitted(g, submit(api, g, "TRAIN_MODEL", args, max_price));
    } else if (query->parsed()) {
      if (!query_input && !query_row) throw ApiError("invalid_argument", "query needs --input or --row");
      json args = {{"model_name", query_model}, {"input", query_input ? *query_input : *query_row}};
      print_submitted(g, submit(api, g, "QUERY_MODEL", args, max_price));
    } else if (updates->parsed()) {
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(wait_seconds);
      json r;
      for (;;) {
        r = api.get("/api/updates", {{"user", g.user}});
        if (!r["updates"].empty() || std::chrono::steady_clock::now() >= deadline) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
      }
      std::string plain;
      for (const auto& u : r["updates"]) plain += u.value("txn_id", "") + " " + describe_note(u) + "\n";
      if (plain.empty()) plain = "no updates";
      emit(g, r, plain);
    } else if (names->parsed()) {
      const json r = api.get("/api/names", {{"kind", names_kind}});
      std::string plain;
      for (const auto& n : r["names"]) plain += n.get<std::string>() + "\n";
      if (r.value("stale", false)) plain += "(stale: oracle unreachable, showing cached names)\n";
      if (r["names"].empty()) plain += "no " + names_kind + "\n";
      emit(g, r, plain);
    } else if (history->parsed()) {
      const json r = history_address ? api.get("/api/history", {{"address", *history_address}})
                                     : api.get("/api/history", {{"user", g.user}});
      std::string plain;
      for (const auto& e : r["transactions"]) {
        const json& t = e;
        plain += t.value("id", "") + " round " + std::to_string(t.value("round", 0LL)) + " " + t.value("sender", "") +
                 " -> " + t.value("receiver", "") + " " + std::to_string(t.value("amount", 0LL));
        const std::string note = describe_note(e.value("decoded", json()));
        if (!note.empty()) plain += " " + note;
        plain += "\n";
      }
      if (plain.empty()) plain = "no transactions";
      emit(g, r, plain);
    } else if (faucet->parsed()) {
      const json r = api.post("/api/faucet", {{"user", faucet_user}, {"amount", faucet_amount}});
      emit(g, r, r.value("user", "") + " (" + r.value("address", "") + ") balance " + std::to_string(r.value("balance", 0LL)));
    } else if (account->parsed()) {
      const json r = api.get("/api/account", {{"user", g.user}});
      emit(g, r, r.value("user", "") + " (" + r.value("address", "") + ") balance " + std::to_string(r.value("balance", 0LL)));
    } else if (mult->parsed()) {
      Api oracle_api(mult_url);
      json r;
      if (mult_field && mult_value) {
        r = oracle_api.post("/schedule", {{"field", *mult_field}, {"value", *mult_value}});
      } else if (mult_field) {
        throw ApiError("invalid_argument", "mult needs both a field and a value");
      } else {
        r = oracle_api.get("/schedule");
      }
      std::string plain;
      const json& sched = r.contains("schedule") ? r["schedule"] : r;
      for (const auto& [k, v] : sched.items()) plain += k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
      emit(g, r, plain);
    }
  } catch (const TransportError& e) {
    if (g.format == "json") std::cout << json{{"error", "transport"}, {"message", e.what()}}.dump() << '\n';
    std::cerr << "transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const ApiError& e) {
    if (g.format == "json") std::cout << json{{"error", e.code}, {"message", e.what()}}.dump() << '\n';
    std::cerr << "error [" << e.code << "]: " << e.what() << '\n';
    return kExitApi;
  } catch (const Error& e) {
    const std::string code(to_string(e.code()));
    if (g.format == "json") std::cout << json{{"error", code}, {"message", e.what()}}.dump() << '\n';
    std::cerr << "error [" << code << "]: " << e.what() << '\n';
    return kExitApi;
  } catch (const std::exception& e) {
    if (g.format == "json") std::cout << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return kExitApi;
  }
  return 0;
}
