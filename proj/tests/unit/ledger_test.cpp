#include <gtest/gtest.h>

#include "predictchain/error.hpp"
#include "predictchain/ledger.hpp"
#include "properties.hpp"
#include "testdata.hpp"

using namespace predictchain;
using namespace predictchain::ledger;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::io;
}

}  // namespace

TEST(Ledger, PaymentsChargeTheFlatFee) {
  ManualClock clock(100, 1);
  SimulatedLedger chain([&] { return clock(); });
  chain.faucet("A", 10'000);
  const auto id = chain.submit({"A", "B", 4'000, to_bytes("hi")});
  EXPECT_EQ(chain.balance("A"), 10'000 - 4'000 - kFlatFee);
  EXPECT_EQ(chain.balance("B"), 4'000);
  EXPECT_EQ(chain.balance(kFeeSinkAddress), kFlatFee);
  EXPECT_EQ(chain.total_minted(), 10'000);
  const auto log = chain.transactions();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[1].id, id);
  EXPECT_EQ(log[1].round, log[0].round + 1);
  EXPECT_EQ(to_string(log[1].note), "hi");
}

TEST(Ledger, RejectsBadPayments) {
  SimulatedLedger chain;
  chain.faucet("A", 5'000);
  EXPECT_EQ(code_of([&] { chain.submit({"A", "B", 4'001, {}}); }), Errc::insufficient_funds);
  EXPECT_EQ(code_of([&] { chain.submit({"NOBODY", "B", 1, {}}); }), Errc::unknown_account);
  EXPECT_EQ(code_of([&] { chain.submit({"A", "B", -1, {}}); }), Errc::invalid_argument);
  EXPECT_EQ(chain.balance("A"), 5'000);
  EXPECT_EQ(chain.transactions().size(), 1u);
  // Exactly the balance (amount + fee) is allowed.
  EXPECT_NO_THROW(chain.submit({"A", "B", 4'000, {}}));
  EXPECT_EQ(chain.balance("A"), 0);
}

TEST(Ledger, LookupFiltersByRecipientAndTimestamp) {
  ManualClock clock(1000, 10);
  SimulatedLedger chain([&] { return clock(); });
  chain.faucet("A", 1'000'000);
  const auto t1 = chain.submit({"A", "B", 1, {}});
  const auto t2 = chain.submit({"A", "B", 2, {}});
  chain.submit({"A", "C", 3, {}});
  const auto all = chain.lookup("B", 0);
  ASSERT_EQ(all.size(), 2u);
  const auto later = chain.lookup("B", all[1].timestamp);
  ASSERT_EQ(later.size(), 1u);
  EXPECT_EQ(later[0].id, t2);
  (void)t1;
}

TEST(Ledger, CommitLogIsSharedBetweenInstances) {
  predictchain::testing::TempDir dir;
  SimulatedLedger a(system_clock(), {}, dir / "chain.log");
  SimulatedLedger b(system_clock(), {}, dir / "chain.log");
  a.faucet("A", 50'000);
  b.submit({"A", "B", 10'000, {}});
  EXPECT_EQ(a.balance("B"), 10'000);
  EXPECT_EQ(a.transactions(), b.transactions());
  SimulatedLedger c(system_clock(), {}, dir / "chain.log");
  EXPECT_EQ(c.balances(), a.balances());
}

TEST(Ledger, Conservation) {
  const auto r = predictchain::testing::ledger_conservation(2000, 5);
  EXPECT_EQ(r.balance_sum, r.minted);
  EXPECT_TRUE(r.replay_matches);
  EXPECT_TRUE(r.reopen_matches);
  EXPECT_GT(r.rejected, 0u);
}
