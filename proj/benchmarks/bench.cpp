#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "predictchain/datastore.hpp"
#include "predictchain/encoding.hpp"
#include "predictchain/ledger.hpp"
#include "predictchain/models.hpp"
#include "predictchain/monitor.hpp"
#include "predictchain/protocol.hpp"
#include "predictchain/tokenomics.hpp"

using namespace predictchain;

namespace {

std::string sine_csv(std::size_t rows) {
  std::string csv = "stock,close\n";
  for (std::size_t t = 0; t < rows; ++t) {
    csv += "AA," + std::to_string(50.0 + 10.0 * std::sin(2.0 * M_PI * static_cast<double>(t) / 50.0)) + "\n";
  }
  return csv;
}

protocol::NoteEnvelope train_request() {
  return {std::string(protocol::op::kTrainModel),
          {{"raw_model", "gru"},
           {"ds_name", "market"},
           {"new_model_name", "gru-market"},
           {"num_epochs", "70"},
           {"target_attrib", "close"},
           {"hidden_dim", "5"},
           {"num_hidden_layers", "1"},
           {"time_lag", "0"},
           {"training_lookback", "10"},
           {"sub_split_value", "0"}}};
}

}  // namespace

static void BM_NoteEncode(benchmark::State& state) {
  const auto env = train_request();
  for (auto _ : state) benchmark::DoNotOptimize(protocol::encode_note(env));
}
BENCHMARK(BM_NoteEncode);

static void BM_NoteDecode(benchmark::State& state) {
  const Bytes raw = protocol::encode_note(train_request());
  for (auto _ : state) benchmark::DoNotOptimize(protocol::decode_note(raw));
}
BENCHMARK(BM_NoteDecode);

static void BM_Sha256(benchmark::State& state) {
  const std::string data(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(sha256_hex(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(1 << 20);

static void BM_LedgerSubmit(benchmark::State& state) {
  ledger::SimulatedLedger chain(ledger::system_clock());
  chain.faucet("A", 1'000'000'000'000'000);
  const Bytes note = protocol::encode_note(train_request());
  for (auto _ : state) benchmark::DoNotOptimize(chain.submit({"A", "B", 10, note}));
}
BENCHMARK(BM_LedgerSubmit);

static void BM_MonitorPoll(benchmark::State& state) {
  ledger::SimulatedLedger chain(ledger::system_clock());
  chain.faucet("A", 1'000'000'000'000);
  const Bytes note = protocol::encode_note(train_request());
  for (int i = 0; i < state.range(0); ++i) chain.submit({"A", "ORACLE", 10, note});
  for (auto _ : state) {
    monitor::Monitor m("ORACLE", chain);
    benchmark::DoNotOptimize(m.poll_and_dispatch([](const monitor::Event&) {}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonitorPoll)->Arg(100)->Arg(1000);

static void BM_Pricing(benchmark::State& state) {
  const tokenomics::RewardSchedule schedule;
  const Decimal complexity = Decimal::parse("177.6");
  const Decimal acc = Decimal::parse("0.913");
  for (auto _ : state) {
    benchmark::DoNotOptimize(tokenomics::price(tokenomics::PriceKind::train_model, {std::nullopt, complexity}, schedule));
    benchmark::DoNotOptimize(tokenomics::dataset_reward(5'000'000, schedule.dataset_mult, acc));
    benchmark::DoNotOptimize(tokenomics::training_reward(schedule.training_mult, acc));
  }
}
BENCHMARK(BM_Pricing);

static void BM_ParseCsv(benchmark::State& state) {
  const std::string csv = sine_csv(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(datastore::parse_csv(csv));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(csv.size()));
}
BENCHMARK(BM_ParseCsv)->Arg(750)->Arg(100'000);

// One epoch over 750 rows with the default hyperparameters.
static void BM_TrainEpoch(benchmark::State& state) {
  const auto arch = static_cast<models::Archetype>(state.range(0));
  const auto frame = datastore::parse_csv(sine_csv(750));
  models::Hyperparams hp;
  hp.num_epochs = 1;
  const auto model = models::create_model(arch, 1, hp, 1);
  for (auto _ : state) benchmark::DoNotOptimize(models::train(model, frame, {}));
  state.SetLabel(std::string(models::to_string(arch)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(models::Archetype::rnn))
    ->Arg(static_cast<int>(models::Archetype::gru))
    ->Arg(static_cast<int>(models::Archetype::lstm))
    ->Arg(static_cast<int>(models::Archetype::mlp))
    ->Unit(benchmark::kMillisecond);

static void BM_Query(benchmark::State& state) {
  const auto frame = datastore::parse_csv(sine_csv(750));
  models::Hyperparams hp;
  hp.num_epochs = 2;
  const auto trained = models::train(models::create_model(models::Archetype::gru, 1, hp, 1), frame, {}).model;
  std::vector<double> window(10);
  for (std::size_t i = 0; i < window.size(); ++i) window[i] = 50.0 + static_cast<double>(i);
  for (auto _ : state) benchmark::DoNotOptimize(models::query(trained, window));
}
BENCHMARK(BM_Query);

BENCHMARK_MAIN();
