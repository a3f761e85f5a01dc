#include "docval/decimal.hpp"

#include <cctype>
#include <stdexcept>

namespace docval {
namespace {

using Int = Decimal::Int;

Int pow10(int n) {
  Int r = 1;
  for (int i = 0; i < n; ++i) r *= 10;
  return r;
}

// Brings both operands to the larger scale.
std::pair<Int, Int> aligned(const Decimal& a, const Decimal& b, int& scale) {
  scale = std::max(a.scale(), b.scale());
  return {a.unscaled() * pow10(scale - a.scale()), b.unscaled() * pow10(scale - b.scale())};
}

// Integer division rounding half away from zero.
Int div_round(const Int& num, const Int& den) {
  Int q = num / den;
  Int r = num % den;
  if (r == 0) return q;
  Int twice = 2 * Int(boost::multiprecision::abs(r));
  if (twice >= Int(boost::multiprecision::abs(den))) {
    bool negative = (num < 0) != (den < 0);
    q += negative ? -1 : 1;
  }
  return q;
}

}  // namespace

Decimal::Decimal(std::int64_t value) : unscaled_(value), scale_(0) {}

Decimal::Decimal(Int unscaled, int scale) : unscaled_(std::move(unscaled)), scale_(scale) {
  if (scale_ < 0) {
    unscaled_ *= pow10(-scale_);
    scale_ = 0;
  }
}

std::optional<Decimal> Decimal::from_string(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  int scale = 0;
  bool seen_point = false;
  bool seen_digit = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      seen_digit = true;
      if (seen_point) ++scale;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit || (seen_point && scale == 0)) return std::nullopt;
  // cpp_int reads a leading 0 as octal.
  std::size_t nz = digits.find_first_not_of('0');
  Int value(nz == std::string::npos ? std::string("0") : digits.substr(nz));
  if (negative) value = -value;
  return Decimal(std::move(value), scale);
}

int Decimal::sign() const { return unscaled_ < 0 ? -1 : (unscaled_ > 0 ? 1 : 0); }

bool Decimal::is_integer() const { return scale_ == 0 || unscaled_ % pow10(scale_) == 0; }

Decimal Decimal::normalized() const {
  Int u = unscaled_;
  int s = scale_;
  if (u == 0) return Decimal(0, 0);
  while (s > 0 && u % 10 == 0) {
    u /= 10;
    --s;
  }
  return Decimal(std::move(u), s);
}

Decimal Decimal::abs() const { return Decimal(Int(boost::multiprecision::abs(unscaled_)), scale_); }

Decimal Decimal::rescaled(int scale) const {
  if (scale >= scale_) return Decimal(unscaled_ * pow10(scale - scale_), scale);
  return Decimal(div_round(unscaled_, pow10(scale_ - scale)), scale);
}

std::string Decimal::to_string() const {
  std::string digits = Int(boost::multiprecision::abs(unscaled_)).str();
  if (scale_ > 0) {
    if (digits.size() <= static_cast<std::size_t>(scale_)) {
      digits.insert(0, static_cast<std::size_t>(scale_) + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(scale_), 1, '.');
  }
  if (unscaled_ < 0) digits.insert(0, 1, '-');
  return digits;
}

double Decimal::to_double() const { return std::stod(to_string()); }

Decimal Decimal::operator-() const { return Decimal(-unscaled_, scale_); }

Decimal operator+(const Decimal& a, const Decimal& b) {
  int scale = 0;
  auto [x, y] = aligned(a, b, scale);
  return Decimal(x + y, scale);
}

Decimal operator-(const Decimal& a, const Decimal& b) {
  int scale = 0;
  auto [x, y] = aligned(a, b, scale);
  return Decimal(x - y, scale);
}

Decimal operator*(const Decimal& a, const Decimal& b) {
  return Decimal(a.unscaled_ * b.unscaled_, a.scale_ + b.scale_);
}

Decimal Decimal::divide(const Decimal& a, const Decimal& b, int scale) {
  if (b.is_zero()) throw std::domain_error("Decimal::divide: division by zero");
  // a/b = (ua / ub) * 10^(sb - sa); result unscaled = ua * 10^(scale + sb - sa) / ub
  int shift = scale + b.scale_ - a.scale_;
  Int num = a.unscaled_;
  Int den = b.unscaled_;
  if (shift >= 0) {
    num *= pow10(shift);
  } else {
    den *= pow10(-shift);
  }
  return Decimal(div_round(num, den), scale);
}

bool operator==(const Decimal& a, const Decimal& b) {
  int scale = 0;
  auto [x, y] = aligned(a, b, scale);
  return x == y;
}

std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
  int scale = 0;
  auto [x, y] = aligned(a, b, scale);
  if (x < y) return std::strong_ordering::less;
  if (x > y) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Decimal& d) { return os << d.to_string(); }

}  // namespace docval
