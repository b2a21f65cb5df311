#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "predictchain/ledger.hpp"

namespace predictchain::config {

// key=value lines; '#' starts a comment line, whitespace around keys and
// values is trimmed, a repeated key is an error.
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues parse(std::string_view text);
  /// Relative paths found in the file resolve against its directory.
  static KeyValues load(const std::filesystem::path& file);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool contains(std::string_view key) const { return values_.find(key) != values_.end(); }

  std::string get(std::string_view key, std::string_view fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::filesystem::path get_path(std::string_view key, const std::filesystem::path& fallback) const;

  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::filesystem::path base_dir_ = ".";
};

struct LedgerConfig {
  /// "simulated" is the only built-in mode; "adapter" needs a ChainAdapter
  /// supplied by the embedding program.
  std::string mode = "simulated";
  std::filesystem::path commit_log = "chain.log";
  ledger::FaultInjection faults;

  static LedgerConfig from(const KeyValues& kv);
};

/// Simulated ledger over the shared commit log. Throws Errc::unsupported for
/// the adapter mode.
std::unique_ptr<ledger::SimulatedLedger> open_chain(const LedgerConfig& config);

}  // namespace predictchain::config
