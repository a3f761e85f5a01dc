#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/decimal.hpp"
#include "docval/document.hpp"
#include "docval/schema.hpp"

namespace docval {

/// Scale used when an inference divides (solving a product for a factor).
inline constexpr int kDivisionScale = 6;

struct TraceStep {
  std::string equation;
  FieldPath target;
  Decimal value;
  int iteration = 0;  // 1-based pass number
};

using ResolutionTrace = std::vector<TraceStep>;

struct Resolved {
  ImplicitDocument document;
  ResolutionTrace trace;
};

/// Fills absent leaves that carry a schema default (provenance=defaulted).
ImplicitDocument apply_defaults(ImplicitDocument doc, const SchemaDef& schema);

/// Infers missing values to a fixpoint. An equation instance fires when
/// exactly one of its operands is absent and can be solved for uniquely;
/// present values are never overwritten. Inference is exact, the only
/// rounding is division at kDivisionScale. Within a pass, instances that
/// compute their left-hand side run before instances solved for an operand.
Resolved resolve(ImplicitDocument doc, const SchemaDef& schema);

enum class EquationStatus { satisfied, violated, not_evaluable };
std::string_view to_string(EquationStatus s);

struct EquationCheck {
  std::string equation;
  std::string instance;  // "" for global, "line_items[2]" etc.
  EquationStatus status = EquationStatus::not_evaluable;
  std::optional<Decimal> lhs;
  std::optional<Decimal> rhs;
  std::optional<Decimal> residual;  // lhs - rhs
  std::string detail;
};

struct RuleCheck {
  std::string rule;
  bool passed = true;
  std::string detail;
};

struct ConstraintReport {
  std::vector<EquationCheck> equations;
  std::vector<RuleCheck> rules;
  bool valid = true;

  std::size_t count(EquationStatus s) const;
  /// Recomputes `valid` from the entries.
  void finalize();
};

ConstraintReport evaluate_constraints(const ImplicitDocument& doc, const SchemaDef& schema, const Decimal& rel_tol);

nlohmann::json trace_to_json(const ResolutionTrace& trace);
nlohmann::json report_to_json(const ConstraintReport& report);

}  // namespace docval
