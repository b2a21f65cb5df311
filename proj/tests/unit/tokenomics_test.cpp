#include <gtest/gtest.h>

#include "predictchain/decimal.hpp"
#include "predictchain/error.hpp"
#include "predictchain/ledger.hpp"
#include "predictchain/protocol.hpp"
#include "predictchain/tokenomics.hpp"
#include "testdata.hpp"

using namespace predictchain;
using namespace predictchain::tokenomics;

namespace {

const char* kAccuracies[] = {"0.3", "0.5", "0.7", "0.9", "0.99"};

}  // namespace

TEST(Decimal, ParseAndPrint) {
  EXPECT_EQ(Decimal::parse("0.3").raw(), 300'000'000);
  EXPECT_EQ(Decimal::parse("-1.25").to_string(), "-1.25");
  EXPECT_EQ(Decimal::parse("10000000").to_string(), "10000000");
  EXPECT_EQ(Decimal::parse("0.000000001").raw(), 1);
  EXPECT_THROW(Decimal::parse("0.0000000001"), Error);
  EXPECT_THROW(Decimal::parse("1e3"), Error);
  EXPECT_THROW(Decimal::parse(""), Error);
  EXPECT_THROW(Decimal::parse("."), Error);
}

TEST(Decimal, FloorAndCeilAreExact) {
  // 0.1 * 3 is 0.30000000000000004 in binary64; fixed point keeps it exact.
  EXPECT_EQ(floor_mul(10, Decimal::parse("0.3")), 3);
  EXPECT_EQ(floor_mul(Decimal::from_int(10'000'000), Decimal::parse("0.99")), 9'900'000);
  EXPECT_EQ(ceil_mul(Decimal::parse("1.0000001"), Decimal::from_int(10)), 11);
  EXPECT_EQ(ceil_mul(Decimal::parse("2.5"), Decimal::from_int(2)), 5);
  EXPECT_EQ(floor_mul(Decimal::parse("-0.5"), Decimal::from_int(3)), -2);
}

TEST(Rewards, TrainingRewardTableIsExact) {
  const std::int64_t expected[5][2] = {{3'000'000, 9'000'000},
                                       {5'000'000, 15'000'000},
                                       {7'000'000, 21'000'000},
                                       {9'000'000, 27'000'000},
                                       {9'900'000, 29'700'000}};
  const Decimal mults[] = {Decimal::from_int(10'000'000), Decimal::from_int(30'000'000)};
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 2; ++c) {
      EXPECT_EQ(training_reward(mults[c], Decimal::parse(kAccuracies[r])), expected[r][c]) << r << "," << c;
    }
  }
}

TEST(Rewards, DatasetRewardTableIsExactAndMatchesTraining) {
  const std::int64_t size = 5'000'000;
  const Decimal mults[] = {Decimal::from_int(2), Decimal::from_int(6)};
  const Decimal train_mults[] = {Decimal::from_int(10'000'000), Decimal::from_int(30'000'000)};
  const std::int64_t expected[5][2] = {{3'000'000, 9'000'000},
                                       {5'000'000, 15'000'000},
                                       {7'000'000, 21'000'000},
                                       {9'000'000, 27'000'000},
                                       {9'900'000, 29'700'000}};
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 2; ++c) {
      const Decimal acc = Decimal::parse(kAccuracies[r]);
      EXPECT_EQ(dataset_reward(size, mults[c], acc), expected[r][c]);
      EXPECT_EQ(dataset_reward(size, mults[c], acc), training_reward(train_mults[c], acc));
    }
  }
}

TEST(Rewards, FloorAndDomain) {
  EXPECT_EQ(dataset_reward(3, Decimal::from_int(1), Decimal::parse("0.5")), 1);
  EXPECT_EQ(training_reward(Decimal::from_int(7), Decimal::parse("0.999999999")), 6);
  EXPECT_EQ(training_reward(Decimal::from_int(7), Decimal::from_int(0)), 0);
  EXPECT_THROW(training_reward(Decimal::from_int(7), Decimal::parse("1.01")), Error);
  EXPECT_THROW(dataset_reward(10, Decimal::from_int(1), Decimal::parse("-0.1")), Error);
}

TEST(Pricing, CeilingWithFloorOfOne) {
  RewardSchedule s;
  EXPECT_EQ(price(PriceKind::dataset_upload, {.ds_size = 5'000'000, .complexity = {}}, s), 5'000'000);
  EXPECT_EQ(price(PriceKind::train_model, {.ds_size = {}, .complexity = Decimal::parse("49.2")}, s), 492'000);
  EXPECT_EQ(price(PriceKind::query_model, {.ds_size = {}, .complexity = Decimal::parse("0.001")}, s), 1);
  s.set(ScheduleField::query_per_complexity, Decimal::parse("0.3"));
  EXPECT_EQ(price(PriceKind::query_model, {.ds_size = {}, .complexity = Decimal::parse("10.01")}, s), 4);
  EXPECT_THROW(price(PriceKind::train_model, {}, s), Error);
  EXPECT_THROW(price(PriceKind::dataset_upload, {}, s), Error);
}

TEST(Pricing, FeeAndSettlement) {
  EXPECT_EQ(oracle_fee(999, Decimal::parse("0.01")), 9);
  const Settlement s = settle(1000, Decimal::parse("0.01"), 2000);
  EXPECT_EQ(s.fee, 10);
  EXPECT_EQ(s.available, 990);
  EXPECT_EQ(s.shortfall, 1010);
  const Settlement t = settle(1000, Decimal::parse("0.01"), 100);
  EXPECT_EQ(t.shortfall, 0);
}

TEST(Schedule, FieldNamesAndValidation) {
  EXPECT_EQ(parse_field("dataset"), ScheduleField::dataset_mult);
  EXPECT_EQ(parse_field("dataset_mult"), ScheduleField::dataset_mult);
  EXPECT_EQ(wire_name(ScheduleField::training_mult), "training");
  EXPECT_THROW(parse_field("nope"), Error);
  RewardSchedule s;
  EXPECT_THROW(s.set(ScheduleField::fee_fraction, Decimal::from_int(1)), Error);
  EXPECT_THROW(s.set(ScheduleField::dataset_mult, Decimal::parse("-1")), Error);
  const RewardSchedule back = RewardSchedule::from_text(s.to_text());
  EXPECT_EQ(back, s);
  EXPECT_THROW(RewardSchedule::from_text("bogus=1\n"), Error);
}

TEST(Schedule, UpdatesAreLoggedAndApplyFromTheNextRound) {
  predictchain::testing::TempDir dir;
  ledger::ManualClock clock(1000, 10);
  ledger::SimulatedLedger chain([&] { return clock(); });
  chain.faucet("ORACLE", 1'000'000);
  ScheduleBook book({}, dir / "schedule.conf");
  const std::string id = book.log_mult_update(ScheduleField::training_mult, Decimal::from_int(30'000'000), chain, "ORACLE");

  const auto log = chain.transactions();
  const auto& txn = log.back();
  EXPECT_EQ(txn.id, id);
  EXPECT_EQ(txn.sender, "ORACLE");
  EXPECT_EQ(txn.receiver, "ORACLE");
  EXPECT_EQ(txn.amount, 0);
  const auto note = protocol::decode_note(std::span<const std::uint8_t>(txn.note));
  EXPECT_EQ(note.op, protocol::op::kMultUpdate);
  EXPECT_EQ(note.args.at("calc"), "training");
  EXPECT_EQ(note.args.at("old"), "10000000");
  EXPECT_EQ(note.args.at("new"), "30000000");

  EXPECT_EQ(book.at_round(txn.round).training_mult, Decimal::from_int(10'000'000));
  EXPECT_EQ(book.at_round(txn.round + 1).training_mult, Decimal::from_int(30'000'000));
  EXPECT_EQ(book.current().training_mult, Decimal::from_int(30'000'000));

  // Persisted and replayable.
  EXPECT_EQ(load_schedule_file(dir / "schedule.conf").training_mult, Decimal::from_int(30'000'000));
  EXPECT_EQ(ScheduleBook::replay({}, log, "ORACLE"), book.current());

  ScheduleBook rebuilt(book.current());
  rebuilt.rebuild_history(log, "ORACLE");
  EXPECT_EQ(rebuilt.at_round(txn.round).training_mult, Decimal::from_int(10'000'000));
}

TEST(Schedule, RejectedUpdateLeavesScheduleAlone) {
  ledger::SimulatedLedger chain;  // oracle unfunded: the fee cannot be paid
  ScheduleBook book;
  EXPECT_THROW(book.log_mult_update(ScheduleField::dataset_mult, Decimal::from_int(6), chain, "ORACLE"), Error);
  EXPECT_EQ(book.current(), RewardSchedule{});
}
