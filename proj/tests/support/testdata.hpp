#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace predictchain::testing {

inline constexpr std::uint64_t kSineSeed = 20110701;

/// "stock,close" rows for ticker AA: 50 + 10 sin(2 pi t / 50) + N(0, 2^2).
std::string noisy_sine_csv(std::size_t rows = 750, std::uint64_t seed = kSineSeed);

/// `base` (a stock,close table) followed by filler rows for other tickers,
/// which sort after AA, padded to exactly `total_bytes`.
std::string pad_market_csv(const std::string& base, std::size_t total_bytes);

/// The noisy-sine table shipped with the sources.
std::filesystem::path bundled_sine_path();

// mkdtemp directory removed on destruction unless PREDICTCHAIN_KEEP_TMP is set.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "predictchain");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace predictchain::testing
