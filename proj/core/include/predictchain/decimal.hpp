#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace predictchain {

/// Fixed-point decimal with nine fractional digits.
///
/// Multipliers, accuracies and complexity scores travel on-chain as decimal
/// strings; holding them as scaled integers keeps every reward and price
/// computation exact, so `floor(5e6 * 2 * 0.3)` really is 3'000'000.
class Decimal {
 public:
  static constexpr std::int64_t kScale = 1'000'000'000;
  static constexpr int kDigits = 9;

  constexpr Decimal() = default;

  static constexpr Decimal from_raw(std::int64_t raw) {
    Decimal d;
    d.raw_ = raw;
    return d;
  }
  static constexpr Decimal from_int(std::int64_t v) { return from_raw(v * kScale); }

  /// Parses "[-]digits[.digits]" with at most nine fractional digits.
  /// Exponents, whitespace and locale separators are rejected.
  static Decimal parse(std::string_view text);

  /// Rounds to the nearest representable value (ties away from zero).
  static Decimal from_double(double v);

  constexpr std::int64_t raw() const { return raw_; }
  double to_double() const { return static_cast<double>(raw_) / kScale; }

  /// Shortest canonical text: no trailing zeros, no trailing '.', "-0" never produced.
  std::string to_string() const;

  friend constexpr auto operator<=>(Decimal, Decimal) = default;
  friend constexpr bool operator==(Decimal, Decimal) = default;

  friend Decimal operator+(Decimal a, Decimal b);
  friend Decimal operator-(Decimal a, Decimal b);
  /// Product truncated toward zero at nine digits.
  friend Decimal operator*(Decimal a, Decimal b);

 private:
  std::int64_t raw_ = 0;
};

/// floor(count * a), exact. Throws on int64 overflow.
std::int64_t floor_mul(std::int64_t count, Decimal a);
/// floor(count * a * b), exact.
std::int64_t floor_mul(std::int64_t count, Decimal a, Decimal b);
/// floor(a * b), exact.
std::int64_t floor_mul(Decimal a, Decimal b);
/// ceil(a * b), exact.
std::int64_t ceil_mul(Decimal a, Decimal b);

}  // namespace predictchain
