#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/document.hpp"
#include "docval/resolver.hpp"
#include "docval/schema.hpp"
#include "docval/values.hpp"

namespace docval {

/// Outcome of the three-stage filter. Ordered: a later enumerator means the
/// candidate got further.
enum class CascadeLevel { failed_syntactic = 0, failed_task = 1, failed_domain = 2, passed = 3 };
std::string_view to_string(CascadeLevel level);
std::optional<CascadeLevel> cascade_level_from_string(std::string_view text);

struct Diagnostic {
  std::string stage;  // "syntactic", "task", "domain"
  std::string code;   // e.g. "missing_key", "not_verbatim", "violated"
  std::string path;
  std::string message;

  nlohmann::json to_json() const;
};

/// Substring from the first '{' to the last '}' inclusive, if any.
std::optional<std::string> extract_json_block(std::string_view raw);

struct SyntacticResult {
  std::optional<ExplicitDocument> document;
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;  // extra keys, dropped

  bool ok() const { return document.has_value(); }
};

/// Checks a parsed JSON value against the explicit-output shape of `schema`:
/// all keys present, scalars string-or-null, lists arrays of strings.
SyntacticResult explicit_from_json(const nlohmann::json& value, const SchemaDef& schema);

SyntacticResult syntactic_validate(std::string_view raw, const SchemaDef& schema);

struct TaskResult {
  bool passed = true;
  std::vector<Diagnostic> misses;
};

/// Every non-null string value must occur verbatim in `ocr_text`.
TaskResult task_validate(const ExplicitDocument& doc, std::string_view ocr_text);

struct DomainResult {
  ConstraintReport report;
  ImplicitDocument resolved;
  ResolutionTrace trace;
  std::vector<CoercionError> coercion_errors;
};

/// materialize -> apply_defaults -> resolve -> evaluate_constraints. Numeric
/// values that fail to parse are recorded as violations.
DomainResult domain_validate(const ExplicitDocument& doc, const SchemaDef& schema, const Decimal& rel_tol);

struct CascadeVerdict {
  CascadeLevel level = CascadeLevel::failed_syntactic;
  std::vector<Diagnostic> reasons;  // non-empty iff level != passed
  std::vector<Diagnostic> warnings;
  std::optional<ExplicitDocument> document;
  std::optional<DomainResult> domain;  // set when the domain stage ran
};

CascadeVerdict run_cascade(std::string_view raw, std::string_view ocr_text, const SchemaDef& schema,
                           const Decimal& rel_tol);

}  // namespace docval
