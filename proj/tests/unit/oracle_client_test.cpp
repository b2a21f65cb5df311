#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>

#include "predictchain/client.hpp"
#include "predictchain/config.hpp"
#include "predictchain/error.hpp"
#include "predictchain/oracle.hpp"
#include "predictchain/tokenomics.hpp"
#include "testdata.hpp"

using namespace predictchain;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr ledger::MicroAlgos kUserFunds = 100'000'000;

class Market : public ::testing::Test {
 protected:
  Market() : oracle_(make_oracle_config(), chain_), client_(make_client_config(), chain_, oracle_) {
    client_.faucet("alice", kUserFunds);
    client_.faucet("bob", kUserFunds);
    client_.faucet("carol", kUserFunds);
    csv_ = predictchain::testing::noisy_sine_csv();
    predictchain::testing::write_file(dir_ / "sine.csv", csv_);
  }

  oracle::OracleConfig make_oracle_config() {
    oracle::OracleConfig c;
    c.state_dir = dir_ / "oracle";
    c.storage_root = dir_ / "oracle" / "storage";
    c.schedule_file = dir_ / "oracle" / "schedule.conf";
    c.initial_funding = 1'000'000'000'000;
    c.train_seed = 1;
    return c;
  }

  client::ClientConfig make_client_config() {
    client::ClientConfig c;
    c.state_dir = dir_ / "client";
    return c;
  }

  // One oracle pass and one client poll.
  void settle() {
    oracle_.step();
    client_.poll();
  }

  protocol::Args upload_args(const std::string& name, std::int64_t size = -1) {
    return {{"ds_name", name},
            {"ds_link", "local://" + (dir_ / "sine.csv").string()},
            {"ds_size", std::to_string(size < 0 ? static_cast<std::int64_t>(csv_.size()) : size)},
            {"sub_split_attrib", "stock"}};
  }

  protocol::Args train_args(const std::string& arch, const std::string& name, int epochs = 5) {
    return {{"raw_model", arch},      {"ds_name", "sine"},     {"new_model_name", name},
            {"num_epochs", std::to_string(epochs)}, {"target_attrib", "close"}, {"hidden_dim", "5"},
            {"num_hidden_layers", "1"}, {"time_lag", "0"},   {"training_lookback", "10"},
            {"sub_split_value", "0"}};
  }

  client::Update single_update(const std::string& user) {
    auto updates = client_.fetch_updates(user);
    EXPECT_EQ(updates.size(), 1u);
    return updates.empty() ? client::Update{} : updates.front();
  }

  ledger::MicroAlgos balance(const std::string& user) { return chain_.balance(*client_.address_of(user)); }

  predictchain::testing::TempDir dir_;
  ledger::SimulatedLedger chain_;
  oracle::Oracle oracle_;
  client::Client client_;
  std::string csv_;
};

std::string arg(const client::Update& u, const std::string& key) {
  const auto it = u.args.find(key);
  if (it == u.args.end()) return "";
  return it->second.is_string() ? it->second.get<std::string>() : it->second.dump();
}

}  // namespace

TEST_F(Market, UploadChargesPerByteAndAnnounces) {
  const auto before = balance("alice");
  const auto r = client_.submit("alice", "UP_DATASET", upload_args("sine"));
  EXPECT_EQ(r.price, static_cast<ledger::MicroAlgos>(csv_.size()));
  settle();
  const auto u = single_update("alice");
  EXPECT_EQ(u.op, protocol::op::kDatasetUp);
  EXPECT_EQ(arg(u, "status"), "ok");
  EXPECT_EQ(arg(u, "req"), r.txn_id);
  EXPECT_EQ(balance("alice"), before - r.price - ledger::kFlatFee);
  ASSERT_EQ(oracle_.datasets().size(), 1u);
  EXPECT_EQ(oracle_.datasets()[0].uploader, *client_.address_of("alice"));
  EXPECT_EQ(client_.list_names(client::NameKind::datasets).names, std::vector<std::string>{"sine"});
  // Drained once.
  EXPECT_TRUE(client_.fetch_updates("alice").empty());
}

TEST_F(Market, FailuresRefundThePaymentInTheResponse) {
  const auto before = balance("alice");
  const auto r = client_.submit("alice", "UP_DATASET", upload_args("sine", 10));
  settle();
  auto u = single_update("alice");
  EXPECT_EQ(arg(u, "status"), "size_mismatch");
  EXPECT_FALSE(arg(u, "error").empty());
  EXPECT_EQ(balance("alice"), before - ledger::kFlatFee);
  EXPECT_TRUE(oracle_.datasets().empty());

  client_.submit("alice", "UP_DATASET", upload_args("sine"));
  settle();
  single_update("alice");
  client_.submit("bob", "UP_DATASET", upload_args("sine"));
  settle();
  u = single_update("bob");
  EXPECT_EQ(arg(u, "status"), "duplicate");

  // Submitted straight to the chain, below the quote.
  const auto note = protocol::encode_note({"<QUERY_MODEL>", {{"model_name", "ghost"}, {"input", "[1]"}}});
  chain_.submit({*client_.address_of("carol"), oracle_.address(), 5, note});
  settle();
  u = single_update("carol");
  EXPECT_EQ(u.op, protocol::op::kQueryResult);
  EXPECT_EQ(arg(u, "status"), "not_found");
  (void)r;
}

TEST_F(Market, TrainAndQueryPayRewards) {
  client_.submit("alice", "UP_DATASET", upload_args("sine"));
  settle();
  single_update("alice");

  const auto quote = client_.get_price({{"kind", "train_model"}, {"raw_model", "gru"}, {"ds_name", "sine"}});
  EXPECT_EQ(quote.complexity, Decimal::parse("177.6"));
  EXPECT_EQ(quote.price, 1'776'000);

  const auto alice_before = balance("alice");
  const auto t = client_.submit("bob", "train_model", train_args("gru", "g1"));
  EXPECT_EQ(t.price, 1'776'000);
  settle();
  const auto trained = single_update("bob");
  ASSERT_EQ(arg(trained, "status"), "ok");
  const Decimal acc = Decimal::parse(arg(trained, "accuracy"));
  EXPECT_GT(acc, Decimal::parse("0.5"));
  const auto usage = tokenomics::dataset_reward(static_cast<std::int64_t>(csv_.size()), Decimal::from_int(2), acc);
  EXPECT_EQ(balance("alice"), alice_before + usage);

  // Row reference: trainer and uploader rewarded at the row accuracy.
  const auto bob_before = balance("bob");
  const auto alice_mid = balance("alice");
  const auto q = client_.submit("carol", "QUERY_MODEL", {{"model_name", "g1"}, {"input", "sine:700"}});
  EXPECT_EQ(q.price, 17'760);
  settle();
  const auto result = single_update("carol");
  ASSERT_EQ(arg(result, "status"), "ok");
  const Decimal row_acc = Decimal::parse(arg(result, "accuracy"));
  EXPECT_EQ(balance("bob"), bob_before + tokenomics::training_reward(Decimal::from_int(10'000'000), row_acc));
  EXPECT_EQ(balance("alice"),
            alice_mid + tokenomics::dataset_reward(static_cast<std::int64_t>(csv_.size()), Decimal::from_int(2), row_acc));
  EXPECT_DOUBLE_EQ(json::parse(arg(result, "actual")).get<double>(),
                   datastore::parse_csv(csv_).number(700, 1));

  // Plain window: no rewards, one output.
  client_.submit("carol", "QUERY_MODEL", {{"model_name", "g1"}, {"input", "[50,51,52,53,54,55,56,57,58,59]"}});
  settle();
  const auto plain = single_update("carol");
  EXPECT_EQ(arg(plain, "status"), "ok");
  EXPECT_EQ(json::parse(arg(plain, "output")).size(), 1u);

  // The chain alone reconstructs the registries.
  const auto audit = oracle::audit_chain(chain_.transactions(), oracle_.address());
  ASSERT_TRUE(audit.datasets.contains("sine"));
  ASSERT_TRUE(audit.models.contains("g1"));
  EXPECT_EQ(audit.models.at("g1").trainer, *client_.address_of("bob"));
  EXPECT_EQ(audit.rewards.size(), 3u);
  for (const auto& [req, n] : audit.responses_per_request) EXPECT_EQ(n, 1) << req;
}

TEST_F(Market, MaxPriceGuardsAgainstQuoteChanges) {
  const auto before = chain_.transactions().size();
  try {
    client_.submit("alice", "UP_DATASET", upload_args("sine"), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::quote_changed);
  }
  EXPECT_EQ(chain_.transactions().size(), before);
  EXPECT_THROW(client_.submit("alice", "REWARD", {}), Error);
  EXPECT_THROW(client_.submit("bad name!", "UP_DATASET", upload_args("x")), Error);
  EXPECT_THROW(client_.submit("alice", "UP_DATASET", {{"ds_name", "x"}}), Error);
  EXPECT_THROW(client_.get_price({{"kind", "nonsense"}}), Error);
}

TEST_F(Market, ScheduleUpdatesReprice) {
  const auto id = oracle_.update_schedule(tokenomics::ScheduleField::dataset_upload_per_byte, Decimal::from_int(3));
  EXPECT_FALSE(id.empty());
  const auto q = client_.get_price({{"kind", "dataset_upload"}, {"ds_size", "100"}});
  EXPECT_EQ(q.price, 300);
  // The update is a self-payment the oracle does not treat as a request.
  settle();
  EXPECT_EQ(oracle_.jobs().all().size(), 0u);
}

TEST_F(Market, RestartAfterSendingDoesNotResend) {
  client_.submit("alice", "UP_DATASET", upload_args("sine"));
  settle();
  single_update("alice");
  const auto sent = chain_.transactions().size();

  // Pretend the process died after sending but before recording it.
  oracle::JobStore store(dir_ / "oracle" / "jobs");
  auto job = store.all().at(0);
  job.status = oracle::JobStatus::running;
  job.effects_sent = 0;
  store.put(job);

  oracle::Oracle restarted(make_oracle_config(), chain_);
  restarted.step();
  EXPECT_EQ(chain_.transactions().size(), sent);
  EXPECT_EQ(store.get(job.request_txn_id)->status, oracle::JobStatus::done);
}

TEST_F(Market, RestartBeforeExecutingTreatsOwnDatasetAsDone) {
  client_.submit("alice", "UP_DATASET", upload_args("sine"));
  settle();
  single_update("alice");
  oracle::JobStore store(dir_ / "oracle" / "jobs");
  auto job = store.all().at(0);
  // Crash after the dataset was saved but before effects were computed.
  job.status = oracle::JobStatus::running;
  job.effects.reset();
  job.effects_sent = 0;
  store.put(job);
  const auto sent = chain_.transactions().size();
  oracle::Oracle restarted(make_oracle_config(), chain_);
  restarted.step();
  // The response is already on chain under the same (req, eff) key.
  EXPECT_EQ(chain_.transactions().size(), sent);
  EXPECT_EQ(store.get(job.request_txn_id)->outcome, "ok");
}

TEST(Accounts, DeterministicAndPersisted) {
  predictchain::testing::TempDir dir;
  {
    client::AccountStore store(dir / "accounts.conf");
    EXPECT_EQ(store.ensure("alice"), client::AccountStore::address_for("alice"));
    EXPECT_THROW(store.ensure(""), Error);
    EXPECT_THROW(store.ensure(std::string(65, 'a')), Error);
  }
  client::AccountStore again(dir / "accounts.conf");
  EXPECT_EQ(again.find("alice"), client::AccountStore::address_for("alice"));
  EXPECT_EQ(client::AccountStore::address_for("alice").rfind("USR-", 0), 0u);
}

TEST(Updates, QueuePersistsUntilDrained) {
  predictchain::testing::TempDir dir;
  {
    client::UpdateQueue q(dir.path());
    q.push("alice", {"T1", 5, "<DATASET_UP>", {{"ds_name", "x"}}});
    q.push("alice", {"T2", 6, "<DATASET_UP>", {{"ds_name", "y"}}});
  }
  client::UpdateQueue q(dir.path());
  EXPECT_EQ(q.size("alice"), 2u);
  const auto drained = q.drain("alice");
  ASSERT_EQ(drained.size(), 2u);
  EXPECT_EQ(drained[0].txn_id, "T1");
  client::UpdateQueue after(dir.path());
  EXPECT_EQ(after.size("alice"), 0u);
}

TEST(Config, KeyValuesResolvePathsAgainstTheFile) {
  predictchain::testing::TempDir dir;
  predictchain::testing::write_file(dir / "conf" / "oracle.conf",
                      "# comment\noracle_address = ORC\ncommit_log=../chain.log\nhttp_port=0\nworker_count=2\n");
  const auto kv = config::KeyValues::load(dir / "conf" / "oracle.conf");
  const auto c = oracle::OracleConfig::from(kv);
  EXPECT_EQ(c.address, "ORC");
  EXPECT_EQ(c.ledger.commit_log, (dir.path() / "chain.log").lexically_normal());
  EXPECT_EQ(c.http_port, 0);
  EXPECT_THROW(config::KeyValues::parse("a=1\na=2\n"), Error);
  EXPECT_THROW(config::KeyValues::parse("novalue\n"), Error);
  EXPECT_THROW(oracle::OracleConfig::from(config::KeyValues::parse("worker_count=zero\n")), Error);
  config::LedgerConfig lc;
  lc.mode = "adapter";
  EXPECT_THROW(config::open_chain(lc), Error);
}

TEST(Http, ClientApiEndToEnd) {
  predictchain::testing::TempDir dir;
  ledger::SimulatedLedger chain;
  oracle::OracleConfig oc;
  oc.state_dir = dir / "o";
  oc.storage_root = dir / "o" / "s";
  oc.schedule_file = dir / "o" / "schedule.conf";
  oc.initial_funding = 1'000'000'000;
  oracle::Oracle orc(oc, chain);
  oracle::OracleHttpServer oracle_http(orc, "127.0.0.1", 0);
  const int oracle_port = oracle_http.start();

  client::ClientConfig cc;
  cc.state_dir = dir / "c";
  client::HttpOracleDirectory directory("http://127.0.0.1:" + std::to_string(oracle_port));
  client::Client cli(cc, chain, directory);
  client::ClientHttpServer client_http(cli, "127.0.0.1", 0);
  const int client_port = client_http.start();
  httplib::Client http("127.0.0.1", client_port);

  auto res = http.Get("/api/price?kind=dataset_upload&ds_size=1234");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["price_microalgo"], 1234);

  res = http.Get("/api/price?kind=bogus");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"], "invalid_argument");

  res = http.Get("/api/price?kind=query_model&model_name=none");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "not_found");

  res = http.Post("/api/faucet", json{{"user", "dave"}, {"amount", 50'000'000}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["balance"], 50'000'000);

  predictchain::testing::write_file(dir / "d.csv", predictchain::testing::noisy_sine_csv(100));
  const json submit = {{"op", "UP_DATASET"},
                       {"user", "dave"},
                       {"args",
                        {{"ds_name", "d"},
                         {"ds_link", "local://" + (dir / "d.csv").string()},
                         {"ds_size", std::to_string(fs::file_size(dir / "d.csv"))}}}};
  res = http.Post("/api/submit", submit.dump(), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const std::string txn_id = json::parse(res->body)["txn_id"];

  orc.step();
  cli.poll();
  res = http.Get("/api/updates?user=dave");
  ASSERT_TRUE(res);
  const json updates = json::parse(res->body)["updates"];
  ASSERT_EQ(updates.size(), 1u);
  EXPECT_EQ(updates[0]["args"]["req"], txn_id);

  res = http.Get("/api/names?kind=datasets");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["names"], json::array({"d"}));
  EXPECT_EQ(json::parse(res->body)["stale"], false);

  res = http.Get("/api/history?user=dave");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["transactions"].size(), 3u);  // faucet, request, response

  res = http.Get("/api/account?user=dave");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["address"], client::AccountStore::address_for("dave"));

  // Oracle gone: names come from the cache, flagged stale.
  oracle_http.stop();
  res = http.Get("/api/names?kind=datasets");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["names"], json::array({"d"}));
  EXPECT_EQ(json::parse(res->body)["stale"], true);
  res = http.Get("/api/price?kind=dataset_upload&ds_size=1");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["error"], "transport");
}
