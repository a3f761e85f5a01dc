#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/decimal.hpp"

namespace docval {

/// Nesting levels of a transactional document. Each level owns an ordered
/// list of the next one: global -> line_items -> sub_items.
enum class Level { global, line_item, sub_item };

enum class FieldKind { amount, rate, integer, text, text_list, amount_list };

inline constexpr std::string_view kLineItemsKey = "line_items";
inline constexpr std::string_view kSubItemsKey = "sub_items";

std::string_view to_string(Level level);
std::string_view to_string(FieldKind kind);
std::optional<Level> level_from_string(std::string_view text);
std::optional<FieldKind> kind_from_string(std::string_view text);

/// Key of the child list owned by `level` ("line_items" for global), empty for sub_item.
std::string_view child_list_key(Level level);
std::optional<Level> child_level(Level level);

bool is_list_kind(FieldKind kind);
bool is_numeric_kind(FieldKind kind);

struct FieldDef {
  std::string name;
  Level level = Level::global;
  FieldKind kind = FieldKind::amount;
  std::optional<Decimal> default_value;
  std::string description;

  friend bool operator==(const FieldDef&, const FieldDef&) = default;
};

/// Reference to a field from inside an equation. `aggregate` means SUM over
/// every child instance (or every element when the field is an amount list).
struct PathRef {
  Level level = Level::global;
  std::string field;
  bool aggregate = false;

  /// Dotted form, e.g. "line_items.net_total".
  std::string dotted() const;
  friend bool operator==(const PathRef&, const PathRef&) = default;
};

struct Term {
  enum class Op { field, product, sum };

  int sign = 1;
  Op op = Op::field;
  PathRef first;
  std::optional<PathRef> second;  // product only

  friend bool operator==(const Term&, const Term&) = default;
};

/// lhs = sum of signed terms, bound at the level of lhs.
struct Equation {
  std::string id;
  PathRef lhs;
  std::vector<Term> terms;
  bool enabled = true;

  Level binding() const { return lhs.level; }
  std::string expression() const;

  friend bool operator==(const Equation&, const Equation&) = default;
};

struct StructuralRule {
  enum class Kind { min_line_items, required_one_of, bounds };

  std::string id;
  Kind kind = Kind::min_line_items;
  std::size_t min_count = 1;                   // min_line_items
  std::vector<std::string> fields;             // required_one_of (global fields)
  std::optional<PathRef> target;               // bounds
  std::optional<Decimal> lower, upper;         // bounds, inclusive

  friend bool operator==(const StructuralRule&, const StructuralRule&) = default;
};

/// Raised when a schema definition is malformed; `location` is a JSON pointer
/// into the schema file.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string location, const std::string& message)
      : std::runtime_error(location.empty() ? message : location + ": " + message),
        location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

/// Immutable once built; share freely across threads.
class SchemaDef {
 public:
  SchemaDef() = default;
  /// Validates every invariant; throws SchemaError.
  SchemaDef(std::string version, std::vector<FieldDef> fields, std::vector<Equation> equations,
            std::vector<StructuralRule> rules);

  const std::string& version() const { return version_; }
  const std::vector<FieldDef>& fields() const { return fields_; }
  const std::vector<Equation>& equations() const { return equations_; }
  const std::vector<StructuralRule>& rules() const { return rules_; }

  const FieldDef* find(Level level, std::string_view name) const;
  std::vector<const FieldDef*> fields_at(Level level) const;
  /// True when the level has at least one field, i.e. its list key is part
  /// of the document shape.
  bool has_level(Level level) const;

  friend bool operator==(const SchemaDef&, const SchemaDef&) = default;

 private:
  std::string version_;
  std::vector<FieldDef> fields_;
  std::vector<Equation> equations_;
  std::vector<StructuralRule> rules_;
};

/// Parses "base_taxable_amount = SUM(line_items.net_total)" style equations.
/// Throws SchemaError on syntax errors or unknown fields.
Equation parse_equation(std::string_view id, std::string_view text, const std::vector<FieldDef>& fields);
PathRef parse_path(std::string_view dotted);

SchemaDef builtin_transactional_schema();

nlohmann::json schema_to_json(const SchemaDef& schema);
SchemaDef schema_from_json(const nlohmann::json& doc);
/// Reads a schema-definition file (JSON text).
SchemaDef load_schema(std::string_view text);
SchemaDef load_schema_file(const std::string& path);

/// JSON Schema (draft 2020-12) for the explicit output: every field is a
/// nullable string, list fields are arrays of strings.
nlohmann::json to_output_schema(const SchemaDef& schema);

}  // namespace docval
