#include "predictchain/decimal.hpp"

#include <cmath>
#include <limits>

#include "predictchain/error.hpp"

namespace predictchain {

namespace {

__extension__ typedef __int128 i128;

constexpr i128 kScale128 = Decimal::kScale;

std::int64_t narrow(i128 v, std::string_view what) {
  if (v > std::numeric_limits<std::int64_t>::max() ||
      v < std::numeric_limits<std::int64_t>::min()) {
    throw Error(Errc::out_of_range, std::string(what) + ": value overflows 64 bits");
  }
  return static_cast<std::int64_t>(v);
}

i128 floor_div(i128 num, i128 den) {
  i128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

i128 ceil_div(i128 num, i128 den) {
  i128 q = num / den;
  if ((num % den != 0) && ((num < 0) == (den < 0))) ++q;
  return q;
}

}  // namespace

Decimal Decimal::parse(std::string_view text) {
  auto fail = [&]() -> Decimal {
    throw Error(Errc::parse, "invalid decimal '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();
  std::size_t pos = 0;
  bool negative = false;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  i128 whole = 0;
  i128 frac = 0;
  int frac_digits = 0;
  bool any_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.') {
      if (seen_point) return fail();
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') return fail();
    any_digit = true;
    if (seen_point) {
      if (frac_digits == kDigits) {
        // Extra digits are only accepted when they are zeros.
        if (c != '0') {
          throw Error(Errc::parse, "decimal '" + std::string(text) +
                                       "' has more than 9 fractional digits");
        }
        continue;
      }
      frac = frac * 10 + (c - '0');
      ++frac_digits;
    } else {
      whole = whole * 10 + (c - '0');
      if (whole > std::numeric_limits<std::int64_t>::max() / kScale) return fail();
    }
  }
  if (!any_digit) return fail();
  for (int i = frac_digits; i < kDigits; ++i) frac *= 10;
  i128 raw = whole * kScale128 + frac;
  if (negative) raw = -raw;
  return from_raw(narrow(raw, "decimal"));
}

Decimal Decimal::from_double(double v) {
  if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "non-finite decimal");
  const long double scaled = std::round(static_cast<long double>(v) * kScale);
  if (std::fabs(scaled) > static_cast<long double>(std::numeric_limits<std::int64_t>::max())) {
    throw Error(Errc::out_of_range, "decimal out of range");
  }
  return from_raw(static_cast<std::int64_t>(scaled));
}

std::string Decimal::to_string() const {
  i128 v = raw_;
  const bool negative = v < 0;
  if (negative) v = -v;
  const auto whole = static_cast<std::uint64_t>(v / kScale128);
  auto frac = static_cast<std::uint64_t>(v % kScale128);
  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (frac != 0) {
    std::string digits(kDigits, '0');
    for (int i = kDigits - 1; i >= 0; --i) {
      digits[i] = static_cast<char>('0' + frac % 10);
      frac /= 10;
    }
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += '.';
    out += digits;
  }
  return out;
}

Decimal operator+(Decimal a, Decimal b) {
  return Decimal::from_raw(narrow(static_cast<i128>(a.raw_) + b.raw_, "decimal sum"));
}

Decimal operator-(Decimal a, Decimal b) {
  return Decimal::from_raw(narrow(static_cast<i128>(a.raw_) - b.raw_, "decimal difference"));
}

Decimal operator*(Decimal a, Decimal b) {
  return Decimal::from_raw(
      narrow(static_cast<i128>(a.raw_) * b.raw_ / kScale128, "decimal product"));
}

std::int64_t floor_mul(std::int64_t count, Decimal a) {
  return narrow(floor_div(static_cast<i128>(count) * a.raw(), kScale128), "floor_mul");
}

std::int64_t floor_mul(std::int64_t count, Decimal a, Decimal b) {
  // count * a.raw * b.raw can reach ~1e37 for realistic inputs; guard the i128 range.
  const i128 ab = static_cast<i128>(a.raw()) * b.raw();
  const i128 limit = std::numeric_limits<i128>::max() / (count == 0 ? 1 : (count < 0 ? -count : count));
  if ((ab < 0 ? -ab : ab) > limit) throw Error(Errc::out_of_range, "floor_mul: overflow");
  return narrow(floor_div(ab * count, kScale128 * kScale128), "floor_mul");
}

std::int64_t floor_mul(Decimal a, Decimal b) {
  return narrow(floor_div(static_cast<i128>(a.raw()) * b.raw(), kScale128 * kScale128),
                "floor_mul");
}

std::int64_t ceil_mul(Decimal a, Decimal b) {
  return narrow(ceil_div(static_cast<i128>(a.raw()) * b.raw(), kScale128 * kScale128),
                "ceil_mul");
}

}  // namespace predictchain
