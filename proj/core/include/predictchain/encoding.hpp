#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace predictchain {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(std::span<const std::uint8_t> b) {
  return std::string(b.begin(), b.end());
}

/// Standard alphabet, '=' padded.
std::string base64_encode(std::span<const std::uint8_t> data);
/// Strict: rejects non-alphabet characters, bad padding and non-zero pad bits.
/// Throws Error(Errc::decoding).
Bytes base64_decode(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

}  // namespace predictchain
