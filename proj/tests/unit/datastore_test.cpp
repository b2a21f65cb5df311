#include <gtest/gtest.h>

#include "predictchain/datastore.hpp"
#include "predictchain/encoding.hpp"
#include "predictchain/error.hpp"
#include "testdata.hpp"

using namespace predictchain;
using namespace predictchain::datastore;

TEST(Csv, ParsesKindsAndQuotes) {
  const auto f = parse_csv("date,stock,close\r\n2011-01-07,AA,16.42\r\n2011-01-14,\"A,A\",15.97\r\n");
  ASSERT_EQ(f.column_count(), 3u);
  ASSERT_EQ(f.row_count(), 2u);
  EXPECT_EQ(f.schema()[0].kind, ColumnKind::categorical);
  EXPECT_EQ(f.schema()[2].kind, ColumnKind::numeric);
  EXPECT_EQ(f.cell(1, 1), "A,A");
  EXPECT_DOUBLE_EQ(f.number(0, 2), 16.42);
}

TEST(Csv, RejectsRaggedAndMixedColumns) {
  EXPECT_THROW(parse_csv("a,b\n1\n"), Error);
  EXPECT_THROW(parse_csv("a,b\n1,2\n,3\n"), Error);
  EXPECT_THROW(parse_csv(""), Error);
  EXPECT_THROW(parse_csv("a,b\n\"1,2\n"), Error);
}

TEST(Csv, SubSplitUsesSortedDistinctValues) {
  const auto f = parse_csv("stock,close\nMSFT,1\nAA,2\nMSFT,3\nAA,4\n");
  EXPECT_EQ(distinct_values(f, "stock"), (std::vector<std::string>{"AA", "MSFT"}));
  const auto aa = split_by_attribute(f, "stock", 0);
  ASSERT_EQ(aa.row_count(), 2u);
  EXPECT_EQ(aa.cell(1, 1), "4");
  EXPECT_THROW(split_by_attribute(f, "stock", 2), Error);
  EXPECT_THROW(split_by_attribute(f, "ticker", 0), Error);
}

TEST(Csv, TrainValidationSplitIsCeiling) {
  const auto f = parse_csv(predictchain::testing::noisy_sine_csv(11));
  const auto [train, validation] = train_validation_split(f);
  EXPECT_EQ(train.row_count(), 9u);  // ceil(0.8 * 11)
  EXPECT_EQ(validation.row_count(), 2u);
  EXPECT_THROW(train_validation_split(f, 1.0), Error);
}

TEST(Storage, ContentAddressedRoundTripAndIntegrity) {
  predictchain::testing::TempDir dir;
  StorageHub hub(dir.path());
  const Bytes data = to_bytes("stock,close\nAA,1\n");
  const std::string link = hub.environment("cas").put(data, "x.csv");
  EXPECT_EQ(link, "cas://" + sha256_hex(std::span<const std::uint8_t>(data)));
  EXPECT_EQ(hub.fetch(link), data);
  EXPECT_EQ(&hub.environment("remote"), &hub.environment("cas"));

  auto& cas = dynamic_cast<ContentAddressedEnvironment&>(hub.environment("cas"));
  predictchain::testing::write_file(cas.object_path(link.substr(6)), "tampered");
  try {
    hub.fetch(link);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::integrity);
  }
  EXPECT_THROW(hub.fetch("cas://zz"), Error);
  EXPECT_THROW(hub.fetch("ftp://x"), Error);
}

TEST(Storage, LocalEnvironmentAbsoluteAndRelative) {
  predictchain::testing::TempDir dir;
  StorageHub hub(dir / "store");
  predictchain::testing::write_file(dir / "outside.csv", "a\n1\n");
  EXPECT_EQ(to_string(hub.fetch("local://" + (dir / "outside.csv").string())), "a\n1\n");
  const auto link = hub.environment("local").put(to_bytes("z"), "sub/z.bin");
  EXPECT_EQ(to_string(hub.fetch(link)), "z");
  EXPECT_THROW(hub.environment("local").put(to_bytes("z"), "../escape"), Error);
  EXPECT_THROW(hub.fetch("local://" + (dir / "missing.csv").string()), Error);
}

TEST(Registry, SaveDatasetRecordsSchemaAndPersists) {
  predictchain::testing::TempDir dir;
  StorageHub hub(dir / "store");
  {
    DatasetRegistry reg(dir / "datasets.jsonl");
    DatasetStore store(hub, reg);
    const std::string csv = predictchain::testing::noisy_sine_csv(20);
    const auto meta = store.save_dataset(to_bytes(csv), "sine", "cas", "USR-1", std::nullopt, "stock");
    EXPECT_EQ(meta.ds_size, static_cast<std::int64_t>(csv.size()));
    EXPECT_EQ(meta.row_count, 20);
    EXPECT_EQ(meta.schema.size(), 2u);
    EXPECT_EQ(store.load_named("sine").row_count(), 20u);
    try {
      store.save_dataset(to_bytes(csv), "sine", "cas");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::duplicate);
    }
    EXPECT_THROW(store.save_dataset(to_bytes("a,b\n1\n"), "bad", "cas"), Error);
    EXPECT_THROW(store.save_dataset(to_bytes(csv), "t", "cas", "", std::string("nope")), Error);
  }
  DatasetRegistry again(dir / "datasets.jsonl");
  ASSERT_TRUE(again.find("sine"));
  EXPECT_EQ(again.find("sine")->uploader, "USR-1");
  EXPECT_EQ(again.find("sine")->sub_split_attrib, "stock");
}

TEST(Data, BundledSeriesMatchesGenerator) {
  EXPECT_EQ(predictchain::testing::read_file(predictchain::testing::bundled_sine_path()), predictchain::testing::noisy_sine_csv());
}

TEST(Data, PaddedMarketHasExactSizeAndKeepsAAFirst) {
  const auto csv = predictchain::testing::pad_market_csv(predictchain::testing::noisy_sine_csv(), 200'000);
  EXPECT_EQ(csv.size(), 200'000u);
  const auto f = parse_csv(csv);
  EXPECT_EQ(split_by_attribute(f, "stock", 0).row_count(), 750u);
}
