#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "predictchain/encoding.hpp"

namespace predictchain::datastore {

enum class ColumnKind { numeric, categorical };

std::string_view to_string(ColumnKind kind) noexcept;

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

// Rectangular table of text cells with a per-column kind. Numeric cells are
// parsed on demand with std::from_chars, so parsing never depends on locale.
class TableFrame {
 public:
  TableFrame() = default;
  TableFrame(std::vector<ColumnSpec> schema, std::vector<std::vector<std::string>> rows);

  const std::vector<ColumnSpec>& schema() const noexcept { return schema_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::size_t row_count() const noexcept { return rows_.size(); }
  std::size_t column_count() const noexcept { return schema_.size(); }

  std::optional<std::size_t> column_index(std::string_view name) const;
  /// Throws Error(Errc::not_found) naming the column.
  std::size_t require_column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  double number(std::size_t row, std::size_t col) const;
  std::vector<double> numeric_column(std::size_t col) const;

  TableFrame slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<ColumnSpec> schema_;
  std::vector<std::vector<std::string>> rows_;
};

/// Comma separated, header row first, "\n" or "\r\n" line endings, optional
/// RFC 4180 double quoting. A column is numeric iff every cell parses as a
/// finite decimal; a column mixing numbers and blanks is rejected.
TableFrame parse_csv(std::span<const std::uint8_t> raw);
TableFrame parse_csv(std::string_view raw);

/// Sorted (byte-lexicographic) distinct values of a column.
std::vector<std::string> distinct_values(const TableFrame& frame, std::string_view attrib);

/// Rows whose `attrib` equals `value`, original order preserved.
TableFrame filter_by_value(const TableFrame& frame, std::string_view attrib,
                           std::string_view value);

/// Rows whose `attrib` equals the `value_index`-th sorted distinct value
/// (the integer sub-split id, e.g. 0 -> "AA" for the Dow Jones tickers).
TableFrame split_by_attribute(const TableFrame& frame, std::string_view attrib,
                              std::size_t value_index);

inline constexpr double kDefaultTrainFraction = 0.8;

/// Time-ordered prefix of ceil(fraction * n) rows and the remaining suffix.
std::pair<TableFrame, TableFrame> train_validation_split(const TableFrame& frame,
                                                         double fraction = kDefaultTrainFraction);

// ---------------------------------------------------------------------------
// Storage environments
// ---------------------------------------------------------------------------

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string_view scheme() const noexcept = 0;
  /// Stores bytes and returns the environment link ("<scheme>://...").
  virtual std::string put(std::span<const std::uint8_t> bytes, std::string_view name_hint) = 0;
  virtual Bytes get(std::string_view link) const = 0;
};

/// "local://<path>": relative paths resolve under the root, absolute paths are
/// used as-is (that is how a user points the oracle at a file on disk).
class LocalEnvironment final : public Environment {
 public:
  explicit LocalEnvironment(std::filesystem::path root);
  std::string_view scheme() const noexcept override { return "local"; }
  std::string put(std::span<const std::uint8_t> bytes, std::string_view name_hint) override;
  Bytes get(std::string_view link) const override;

 private:
  std::filesystem::path root_;
};

/// "cas://<sha256 hex>": immutable, hash-addressed objects stored under
/// root/aa/bbbb.... Reads recompute the digest and fail closed on mismatch.
class ContentAddressedEnvironment final : public Environment {
 public:
  explicit ContentAddressedEnvironment(std::filesystem::path root);
  std::string_view scheme() const noexcept override { return "cas"; }
  std::string put(std::span<const std::uint8_t> bytes, std::string_view name_hint) override;
  Bytes get(std::string_view link) const override;

  std::filesystem::path object_path(std::string_view digest) const;

 private:
  std::filesystem::path root_;
};

/// Resolves links to their environment. "remote" is accepted as an alias
/// for the content-addressed environment.
class StorageHub {
 public:
  explicit StorageHub(const std::filesystem::path& root);

  Environment& environment(std::string_view name);
  Bytes fetch(std::string_view link) const;

 private:
  LocalEnvironment local_;
  ContentAddressedEnvironment cas_;
};

std::string link_scheme(std::string_view link);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct DatasetMeta {
  std::string ds_name;
  std::string ds_link;
  std::int64_t ds_size = 0;
  std::string uploader;
  std::optional<std::string> time_attrib;
  std::optional<std::string> sub_split_attrib;
  std::vector<ColumnSpec> schema;
  std::int64_t row_count = 0;

  nlohmann::json to_json() const;
  static DatasetMeta from_json(const nlohmann::json& j);

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

// Name -> metadata map, optionally persisted as JSON lines (append on add).
class DatasetRegistry {
 public:
  DatasetRegistry() = default;
  explicit DatasetRegistry(std::filesystem::path file);

  void add(const DatasetMeta& meta);
  std::optional<DatasetMeta> find(std::string_view ds_name) const;
  bool contains(std::string_view ds_name) const;
  std::vector<DatasetMeta> list() const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> file_;
  std::map<std::string, DatasetMeta, std::less<>> entries_;
};

class DatasetStore {
 public:
  DatasetStore(StorageHub& storage, DatasetRegistry& registry)
      : storage_(storage), registry_(registry) {}

  DatasetMeta save_dataset(std::span<const std::uint8_t> raw, std::string_view ds_name,
                           std::string_view environment, std::string_view uploader = "",
                           std::optional<std::string> time_attrib = std::nullopt,
                           std::optional<std::string> sub_split_attrib = std::nullopt);

  TableFrame load_dataset(std::string_view ds_link) const;
  TableFrame load_named(std::string_view ds_name) const;

  DatasetRegistry& registry() noexcept { return registry_; }
  StorageHub& storage() noexcept { return storage_; }

 private:
  StorageHub& storage_;
  DatasetRegistry& registry_;
  std::mutex save_mutex_;
};

}  // namespace predictchain::datastore
