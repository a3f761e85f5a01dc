#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace docval {

/// Exact base-10 number: value = unscaled * 10^-scale.
///
/// Addition, subtraction and multiplication are exact. Division is the only
/// lossy operation and takes an explicit result scale. Equality and ordering
/// compare numeric values, so 18000.00 == 18000.
class Decimal {
 public:
  using Int = boost::multiprecision::cpp_int;

  Decimal() = default;
  Decimal(std::int64_t value);  // NOLINT(google-explicit-constructor)
  Decimal(Int unscaled, int scale);

  /// Strict parser for canonical dot-decimal text: optional '-', digits,
  /// optional '.' followed by digits. Returns nullopt for anything else.
  static std::optional<Decimal> from_string(std::string_view text);

  const Int& unscaled() const { return unscaled_; }
  int scale() const { return scale_; }

  int sign() const;
  bool is_zero() const { return unscaled_ == 0; }
  bool is_integer() const;

  /// Strips trailing fractional zeros; idempotent.
  Decimal normalized() const;
  Decimal abs() const;
  Decimal rescaled(int scale) const;  // half away from zero when shrinking

  /// Plain dot-decimal text at the current scale, e.g. "18000.00".
  std::string to_string() const;
  /// to_string() of the normalized value, e.g. "18000".
  std::string canonical() const { return normalized().to_string(); }
  double to_double() const;

  Decimal operator-() const;
  friend Decimal operator+(const Decimal& a, const Decimal& b);
  friend Decimal operator-(const Decimal& a, const Decimal& b);
  friend Decimal operator*(const Decimal& a, const Decimal& b);
  Decimal& operator+=(const Decimal& other) { return *this = *this + other; }
  Decimal& operator-=(const Decimal& other) { return *this = *this - other; }

  /// a / b rounded half away from zero to `scale` places. b must be nonzero.
  static Decimal divide(const Decimal& a, const Decimal& b, int scale);

  friend bool operator==(const Decimal& a, const Decimal& b);
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b);

 private:
  Int unscaled_ = 0;
  int scale_ = 0;
};

std::ostream& operator<<(std::ostream& os, const Decimal& d);

}  // namespace docval
