// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "predictchain/client.hpp"
#include "predictchain/config.hpp"
#include "predictchain/decimal.hpp"
#include "predictchain/ledger.hpp"
#include "predictchain/oracle.hpp"
#include "predictchain/protocol.hpp"
#include "predictchain/tokenomics.hpp"
#include "properties.hpp"
#include "testdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace predictchain;
namespace pt = predictchain::testing;
using ledger::MicroAlgos;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++g_failures;
  std::printf("%s %s (%.1fs) %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), secs, out.detail.c_str());
  std::fflush(stdout);
}

// ---- reward tables ----

Outcome reward_tables() {
  const char* acc[] = {"0.3", "0.5", "0.7", "0.9", "0.99"};
  // Rows of both tables: accuracy -> reward at the low and high multiplier.
  const MicroAlgos expected[5][2] = {{3'000'000, 9'000'000},   {5'000'000, 15'000'000},
                                     {7'000'000, 21'000'000},  {9'000'000, 27'000'000},
                                     {9'900'000, 29'700'000}};
  const Decimal train_mult[2] = {Decimal::from_int(10'000'000), Decimal::from_int(30'000'000)};
  const Decimal ds_mult[2] = {Decimal::from_int(2), Decimal::from_int(6)};
  constexpr std::int64_t ds_size = 5'000'000;
  int matched = 0;
  int identity = 0;
  std::string first_miss;
  for (int r = 0; r < 5; ++r) {
    const Decimal a = Decimal::parse(acc[r]);
    for (int c = 0; c < 2; ++c) {
      const MicroAlgos t = tokenomics::training_reward(train_mult[c], a);
      const MicroAlgos d = tokenomics::dataset_reward(ds_size, ds_mult[c], a);
      matched += (t == expected[r][c]) + (d == expected[r][c]);
      identity += (t == d);
      if (first_miss.empty() && (t != expected[r][c] || d != expected[r][c])) {
        first_miss = fmt::format(" first miss at accuracy {} column {}: {} / {}", acc[r], c, t, d);
      }
    }
  }
  return {matched == 20 && identity == 10,
          fmt::format("{}/20 table values exact, cross-table identity {}/10{}", matched, identity, first_miss)};
}

// ---- protocol ----

Outcome protocol_properties() {
  const auto rt = pt::protocol_round_trip(10'000, 4242);
  const auto fz = pt::protocol_fuzz(100'000, 4243);
  const bool ok = rt.failures == 0 && rt.checked >= 10'000 && fz.inputs >= 100'000 && fz.untyped_errors == 0;
  std::string detail = fmt::format("round trips {} ({} oversize rejected), failures {}; fuzz {} inputs, {} decoded, "
                                    "{} typed errors, {} untyped",
                                    rt.checked, rt.oversize, rt.failures, fz.inputs, fz.decoded, fz.typed_errors,
                                    fz.untyped_errors);
  if (!rt.first_failure.empty()) detail += "; " + rt.first_failure;
  if (!fz.first_untyped.empty()) detail += "; " + fz.first_untyped;
  return {ok, detail};
}

Outcome monitor_exactly_once() {
  const auto r = pt::monitor_exactly_once(1000, 0.5, 0.3, 77, true);
  return {r.ok() && r.committed == 1000 && r.restarts == 1,
          fmt::format("committed {}, dispatched {}, duplicates {}, missing {}, unexpected {}, restarts {}, polls {}",
                      r.committed, r.dispatched_unique, r.duplicates, r.missing, r.unexpected, r.restarts, r.polls)};
}

Outcome ledger_conservation() {
  const auto r = pt::ledger_conservation(10'000, 99);
  return {r.ok() && r.attempted >= 10'000,
          fmt::format("{} attempted, {} committed, {} rejected; minted {}, balances {}; replay {}, reopen {}",
                      r.attempted, r.committed, r.rejected, r.minted, r.balance_sum, r.replay_matches,
                      r.reopen_matches)};
}

Outcome gradients() {
  bool ok = true;
  std::string detail;
  for (auto arch : {models::Archetype::rnn, models::Archetype::gru, models::Archetype::lstm, models::Archetype::mlp}) {
    const auto r = pt::gradient_check(arch, 100, 2024, 1e-4);
    ok = ok && r.cases == 100 && r.failures == 0;
    detail += fmt::format("{} {}/{} max rel {:.2e}; ", models::to_string(arch), r.cases - r.failures, r.cases,
                          r.max_relative_error);
  }
  return {ok, detail};
}

Outcome ordering() {
  const std::string csv = pt::read_file(pt::bundled_sine_path());
  const auto r = pt::ordering_experiment(csv, {1, 2, 3, 4, 5});
  std::string detail;
  for (const auto& [arch, m] : r.median) {
    detail += fmt::format("{} median {:.5f} ({} diverged); ", arch, m, r.diverged.count(arch) ? r.diverged.at(arch) : 0);
  }
  detail += fmt::format("mlp rejects multi-step {}, recurrent accept {}", r.mlp_rejects_multi_step,
                        r.recurrent_accept_multi_step);
  return {r.ordering_holds && r.mlp_rejects_multi_step && r.recurrent_accept_multi_step, detail};
}

// ---- end to end through the CLI ----

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

class NodeProcess {
 public:
  NodeProcess(const std::string& exe, std::vector<std::string> args, const fs::path& log) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) throw std::runtime_error("fork failed");
    if (pid_ == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      const int err = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (err >= 0) ::dup2(err, STDERR_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      std::vector<char*> argv{const_cast<char*>(exe.c_str())};
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(exe.c_str(), argv.data());
      ::_exit(127);
    }
    ::close(fds[1]);
    out_ = ::fdopen(fds[0], "r");
  }
  ~NodeProcess() { stop(); }
  NodeProcess(const NodeProcess&) = delete;
  NodeProcess& operator=(const NodeProcess&) = delete;

  // Port from the "listening on host:port" banner.
  int wait_for_port() {
    char line[512];
    static const std::regex re("listening on [^:]+:([0-9]+)");
    while (std::fgets(line, sizeof(line), out_)) {
      std::cmatch m;
      if (std::regex_search(line, m, re)) return std::stoi(m[1].str());
    }
    throw std::runtime_error("node exited before listening");
  }

  void stop() {
    if (pid_ > 0) {
      ::kill(pid_, SIGTERM);
      int status = 0;
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    if (out_) {
      std::fclose(out_);
      out_ = nullptr;
    }
  }

 private:
  pid_t pid_ = -1;
  std::FILE* out_ = nullptr;
};

struct CliResult {
  int exit_code = -1;
  json body;
};

class Cli {
 public:
  Cli(std::string exe, std::string url) : exe_(std::move(exe)), url_(std::move(url)) {}

  CliResult run(const std::string& user, const std::vector<std::string>& args) const {
    std::string cmd = shell_quote(exe_) + " --format json --url " + shell_quote(url_) + " --user " + shell_quote(user);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    std::FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("popen failed");
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof(buf), p)) > 0;) out.append(buf, n);
    const int status = ::pclose(p);
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.body = json::parse(out, nullptr, false);
    return r;
  }

  json must(const std::string& user, const std::vector<std::string>& args) const {
    auto r = run(user, args);
    if (r.exit_code != 0 || r.body.is_discarded()) {
      throw std::runtime_error(fmt::format("'{}' failed ({}): {}", args.front(), r.exit_code,
                                          r.body.is_discarded() ? "<no json>" : r.body.dump()));
    }
    return r.body;
  }

  // Polls until an update with `op` arrives; returns it.
  json await_update(const std::string& user, std::string_view op, std::vector<json>& seen, int seconds) const {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(seconds);
    while (std::chrono::steady_clock::now() < deadline) {
      const json r = must(user, {"updates", "--wait", "5"});
      for (const auto& u : r["updates"]) seen.push_back(u);
      for (const auto& u : seen) {
        if (u.value("op", "") == op) return u;
      }
    }
    throw std::runtime_error(fmt::format("no {} update for {} within {}s", op, user, seconds));
  }

 private:
  std::string exe_;
  std::string url_;
};

std::string arg_text(const json& update, const std::string& key) {
  const auto& args = update.at("args");
  if (!args.contains(key)) return {};
  return args[key].is_string() ? args[key].get<std::string>() : args[key].dump();
}

Outcome end_to_end() {
  pt::TempDir dir("predictchain-e2e");
  const fs::path chain_log = dir / "chain.log";
  const std::string exe = PREDICTCHAIN_CLI_PATH;

  pt::write_file(dir / "oracle.conf", fmt::format("oracle_address = ORACLE\n"
                                                   "commit_log = {}\n"
                                                   "schedule_file = oracle/schedule.conf\n"
                                                   "storage_root = oracle/storage\n"
                                                   "state_dir = oracle/state\n"
                                                   "poll_interval_ms = 100\n"
                                                   "http_port = 0\n"
                                                   "initial_funding = 1000000000\n",
                                                   chain_log.string()));
  NodeProcess oracle_node(exe, {"node", "oracle", "--config", (dir / "oracle.conf").string()}, dir / "oracle.err");
  const int oracle_port = oracle_node.wait_for_port();
  const std::string oracle_url = fmt::format("http://127.0.0.1:{}", oracle_port);

  pt::write_file(dir / "client.conf", fmt::format("oracle_url = {}\n"
                                                   "oracle_address = ORACLE\n"
                                                   "commit_log = {}\n"
                                                   "state_dir = client/state\n"
                                                   "poll_interval_ms = 100\n"
                                                   "http_port = 0\n",
                                                   oracle_url, chain_log.string()));
  NodeProcess client_node(exe, {"node", "client", "--config", (dir / "client.conf").string()}, dir / "client.err");
  const Cli cli(exe, fmt::format("http://127.0.0.1:{}", client_node.wait_for_port()));

  // Alice contributes the data, bob trains on it and queries the model.
  cli.must("alice", {"faucet", "alice", "100000000"});
  cli.must("bob", {"faucet", "bob", "100000000"});

  const std::string market = pt::pad_market_csv(pt::noisy_sine_csv(), 5'000'000);
  pt::write_file(dir / "market.csv", market);
  const json up = cli.must("alice", {"upload", (dir / "market.csv").string(), "--name", "market",
                                     "--sub-split-attrib", "stock"});
  std::vector<json> alice_updates;
  const json ds_up = cli.await_update("alice", protocol::op::kDatasetUp, alice_updates, 120);
  if (arg_text(ds_up, "status") != "ok") return {false, "upload failed: " + ds_up.dump()};

  const json train = cli.must("bob", {"train", "gru", "--dataset", "market", "--name", "gru-market"});
  std::vector<json> bob_updates;
  const json trained = cli.await_update("bob", protocol::op::kModelTrained, bob_updates, 240);
  if (arg_text(trained, "status") != "ok") return {false, "training failed: " + trained.dump()};

  const json query = cli.must("bob", {"query", "gru-market", "--row", "market:700"});
  const json result = cli.await_update("bob", protocol::op::kQueryResult, bob_updates, 120);
  if (arg_text(result, "status") != "ok") return {false, "query failed: " + result.dump()};

  // Responses are the last effect of each job, so the chain is complete here.
  const json oracle_datasets = json::parse(httplib::Client(oracle_url).Get("/datasets")->body);
  const json oracle_models = json::parse(httplib::Client(oracle_url).Get("/models")->body);
  const json oracle_schedule = json::parse(httplib::Client(oracle_url).Get("/schedule")->body);
  const json alice_account = cli.must("alice", {"account"});
  const json bob_account = cli.must("bob", {"account"});
  client_node.stop();
  oracle_node.stop();

  ledger::SimulatedLedger reopened(ledger::system_clock(), {}, chain_log);
  const auto chain = reopened.transactions();
  const auto audit = oracle::audit_chain(chain, "ORACLE");
  const std::string alice = client::AccountStore::address_for("alice");
  const std::string bob = client::AccountStore::address_for("bob");

  std::vector<std::string> problems;
  auto expect = [&](bool cond, std::string what) {
    if (!cond) problems.push_back(std::move(what));
  };

  // One response per request, and the three requests are the ones we sent.
  expect(audit.responses_per_request.size() == 3, fmt::format("{} requests on chain", audit.responses_per_request.size()));
  for (const auto& [req, n] : audit.responses_per_request) expect(n == 1, fmt::format("{} has {} responses", req, n));
  for (const auto* submitted : {&up, &train, &query}) {
    const std::string id = submitted->value("txn_id", "");
    expect(audit.responses_per_request.count(id) == 1, "request " + id + " missing from the chain");
  }

  // Rewards match the floor formulas at the accuracy each response reported.
  const auto schedule = tokenomics::RewardSchedule{};
  const std::string train_acc = arg_text(trained, "accuracy");
  const std::string query_acc = arg_text(result, "accuracy");
  int uploader_rewards = 0;
  int trainer_rewards = 0;
  MicroAlgos alice_reward_total = 0;
  MicroAlgos bob_reward_total = 0;
  for (const auto& r : audit.rewards) {
    const Decimal acc = Decimal::parse(r.accuracy);
    if (r.reason == "dataset_usage") {
      ++uploader_rewards;
      expect(r.to == alice, "dataset reward paid to " + r.to);
      expect(r.amount == tokenomics::dataset_reward(5'000'000, schedule.dataset_mult, acc),
             fmt::format("dataset reward {} at accuracy {}", r.amount, r.accuracy));
      expect(r.accuracy == (r.request_txn_id == train.value("txn_id", "") ? train_acc : query_acc),
             "dataset reward accuracy " + r.accuracy + " differs from the response");
    } else if (r.reason == "model_training") {
      ++trainer_rewards;
      expect(r.to == bob, "training reward paid to " + r.to);
      expect(r.amount == tokenomics::training_reward(schedule.training_mult, acc),
             fmt::format("training reward {} at accuracy {}", r.amount, r.accuracy));
      expect(r.accuracy == query_acc, "training reward accuracy " + r.accuracy + " differs from the response");
    } else {
      expect(false, "unexpected reward reason " + r.reason);
    }
    (r.to == alice ? alice_reward_total : bob_reward_total) += r.amount;
  }
  expect(uploader_rewards == 2, fmt::format("{} uploader rewards", uploader_rewards));
  expect(trainer_rewards == 1, fmt::format("{} trainer rewards", trainer_rewards));

  // Registries rebuilt from the chain equal what the oracle serves.
  expect(oracle_datasets.size() == audit.datasets.size(), "dataset registry size differs");
  for (const auto& d : oracle_datasets) {
    const auto it = audit.datasets.find(d.value("ds_name", ""));
    expect(it != audit.datasets.end() && it->second.uploader == d.value("uploader", "") &&
               it->second.ds_size == d.value("ds_size", std::int64_t{-1}) && it->second.ds_link == d.value("ds_link", ""),
           "dataset " + d.dump() + " not reconstructed");
  }
  expect(oracle_models.size() == audit.models.size(), "model registry size differs");
  for (const auto& m : oracle_models) {
    const auto it = audit.models.find(m.value("model_name", ""));
    expect(it != audit.models.end() && it->second.trainer == m.value("trainer", "") &&
               it->second.archetype == m.value("archetype", "") && it->second.ds_name == m.value("ds_name", "") &&
               it->second.model_link == m.value("model_link", ""),
           "model " + m.value("model_name", "") + " not reconstructed");
  }
  const auto replayed_schedule = tokenomics::ScheduleBook::replay({}, chain, "ORACLE");
  expect(replayed_schedule.to_json() == oracle_schedule || json{{"schedule", replayed_schedule.to_json()}} == oracle_schedule,
         "schedule replay differs from the oracle");

  // Balances rebuilt from the chain equal the live ones, and each user's
  // balance is faucet minus net payments and fees plus rewards.
  const auto replayed = ledger::SimulatedLedger::replay(chain);
  expect(replayed == reopened.balances(), "balance replay differs from the ledger");
  expect(replayed.at(alice) == alice_account.value("balance", std::int64_t{-1}), "alice balance differs from the client");
  expect(replayed.at(bob) == bob_account.value("balance", std::int64_t{-1}), "bob balance differs from the client");
  expect(replayed.at(alice) == 100'000'000 - audit.net_paid.at(alice) - ledger::kFlatFee + alice_reward_total,
         "alice balance does not follow from payments and rewards");
  expect(replayed.at(bob) == 100'000'000 - audit.net_paid.at(bob) - 2 * ledger::kFlatFee + bob_reward_total,
         "bob balance does not follow from payments and rewards");

  std::string detail = fmt::format("{} txns, train accuracy {}, query accuracy {}, rewards alice {} bob {}",
                                   chain.size(), train_acc, query_acc, alice_reward_total, bob_reward_total);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  report("reward-tables", reward_tables);
  report("protocol-roundtrip-and-fuzz", protocol_properties);
  report("monitor-exactly-once", monitor_exactly_once);
  report("ledger-conservation", ledger_conservation);
  report("model-gradient-checks", gradients);
  report("model-ordering", ordering);
  report("end-to-end-audit", end_to_end);
  return g_failures == 0 ? 0 : 1;
}
