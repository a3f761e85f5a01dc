#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "docval/decimal.hpp"
#include "docval/document.hpp"
#include "docval/schema.hpp"

namespace docval {

/// Outcome of coercing one raw string. Exactly one of value/reason is set.
struct NumberResult {
  std::optional<Decimal> value;
  std::string reason;

  bool ok() const { return value.has_value(); }
  static NumberResult success(Decimal d) { return {std::move(d), {}}; }
  static NumberResult failure(std::string why) { return {std::nullopt, std::move(why)}; }
};

/// Locale-tolerant amount parser.
///
/// Currency symbols, letters and spaces around the number are ignored. The
/// decimal separator is decided as follows:
///   - both '.' and ',' present: the rightmost kind is decimal, the other is grouping;
///   - one kind present several times: all are grouping;
///   - one occurrence followed by exactly three digits, with a leading group
///     other than a lone "0": grouping ("18,000" -> 18000);
///   - otherwise decimal ("3,5" -> 3.5).
/// A leading '-' or a parenthesized value is negative.
NumberResult parse_amount(std::string_view raw);

/// Rate parser: "10%" -> 0.10; bare values in (1, 100] are read as percents.
/// Values still outside [0, 1] are returned as-is for the bounds rule to catch.
NumberResult parse_rate(std::string_view raw);

/// Whole-number parser built on parse_amount.
NumberResult parse_integer(std::string_view raw);

/// |a - b| <= rel_tol * max(|a|, |b|). Symmetric; two zeros compare equal.
bool approx_equal(const Decimal& a, const Decimal& b, const Decimal& rel_tol);

struct CoercionError {
  FieldPath path;
  std::string raw;
  std::string reason;
};

struct Materialized {
  ImplicitDocument document;
  std::vector<CoercionError> errors;
};

/// Explicit -> implicit: coerces every non-null string per its field kind.
/// Failed leaves are left absent and reported in `errors`.
Materialized materialize(const ExplicitDocument& doc, const SchemaDef& schema);

}  // namespace docval
