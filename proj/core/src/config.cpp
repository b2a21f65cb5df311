#include "predictchain/config.hpp"

#include <charconv>
#include <sstream>

#include "fsutil.hpp"
#include "predictchain/error.hpp"

namespace predictchain::config {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::parse, "config line " + std::to_string(lineno) + " has no '='");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw Error(Errc::parse, "config line " + std::to_string(lineno) + " has an empty key");
    if (kv.values_.contains(key)) {
      throw Error(Errc::parse, "config key '" + key + "' appears twice");
    }
    kv.values_.emplace(std::move(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) {
    throw Error(Errc::not_found, "config file '" + file.string() + "' does not exist");
  }
  KeyValues kv = parse(detail::read_text(file));
  kv.base_dir_ = std::filesystem::absolute(file).parent_path();
  return kv;
}

std::string KeyValues::get(std::string_view key, std::string_view fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::string(fallback) : it->second;
}

std::int64_t KeyValues::get_int(std::string_view key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::parse, "config key '" + std::string(key) + "' is not an integer: '" + s + "'");
  }
  return v;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::parse, "config key '" + std::string(key) + "' is not a number: '" + s + "'");
  }
  return v;
}

std::filesystem::path KeyValues::get_path(std::string_view key, const std::filesystem::path& fallback) const {
  const auto it = values_.find(key);
  std::filesystem::path p = it == values_.end() ? fallback : std::filesystem::path(it->second);
  if (p.is_relative()) p = base_dir_ / p;
  return p.lexically_normal();
}

LedgerConfig LedgerConfig::from(const KeyValues& kv) {
  LedgerConfig c;
  c.mode = kv.get("ledger", c.mode);
  c.commit_log = kv.get_path("commit_log", c.commit_log);
  c.faults.duplicate_probability = kv.get_double("fault_duplicate_probability", 0.0);
  c.faults.skip_probability = kv.get_double("fault_skip_probability", 0.0);
  c.faults.reorder = kv.get_int("fault_reorder", 0) != 0;
  c.faults.seed = static_cast<std::uint64_t>(kv.get_int("fault_seed", 0));
  return c;
}

std::unique_ptr<ledger::SimulatedLedger> open_chain(const LedgerConfig& config) {
  if (config.mode != "simulated") {
    throw Error(Errc::unsupported, "ledger mode '" + config.mode +
                                       "' needs an embedding program that supplies a chain adapter");
  }
  return std::make_unique<ledger::SimulatedLedger>(ledger::system_clock(), config.faults, config.commit_log);
}

}  // namespace predictchain::config
