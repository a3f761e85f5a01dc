#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/decimal.hpp"
#include "docval/schema.hpp"

namespace docval {

/// One object of the explicit output: every value is the raw string the
/// model produced, or null.
struct ExplicitNode {
  std::map<std::string, std::optional<std::string>> scalars;
  std::map<std::string, std::vector<std::string>> lists;
  std::vector<ExplicitNode> children;  // line items of the global node, sub items of a line item

  friend bool operator==(const ExplicitNode&, const ExplicitNode&) = default;
};

struct ExplicitDocument {
  ExplicitNode root;
  friend bool operator==(const ExplicitDocument&, const ExplicitDocument&) = default;
};

enum class Provenance { extracted, defaulted, inferred };
std::string_view to_string(Provenance p);

/// Typed value. Numeric kinds (amount, rate, integer) hold a Decimal, text
/// kinds hold the verbatim string.
struct Leaf {
  std::variant<Decimal, std::string> value;
  Provenance provenance = Provenance::extracted;

  const Decimal* number() const { return std::get_if<Decimal>(&value); }
  const std::string* text() const { return std::get_if<std::string>(&value); }
  /// Normalized decimal or verbatim text; used for comparison and scoring.
  std::string canonical() const;
};

struct ImplicitNode {
  std::map<std::string, Leaf> scalars;  // missing key == absent value
  std::map<std::string, std::vector<std::optional<Leaf>>> lists;
  std::vector<ImplicitNode> children;
};

struct ImplicitDocument {
  ImplicitNode root;
};

/// Location of a single value inside a document tree.
struct FieldPath {
  std::vector<std::size_t> nodes;  // child indices from the root: {} global, {i} line i, {i, j} sub item j of line i
  std::string field;
  std::optional<std::size_t> element;  // list element

  std::string to_string() const;
  friend auto operator<=>(const FieldPath&, const FieldPath&) = default;
};

/// Document with every key present: scalars null, lists empty, no items.
ExplicitDocument empty_explicit(const SchemaDef& schema);

/// Serializes in the explicit-output JSON layout.
nlohmann::json explicit_to_json(const ExplicitDocument& doc, const SchemaDef& schema);

/// Serializes with numeric leaves as canonical dot-decimal strings and a
/// provenance side map keyed by FieldPath::to_string().
nlohmann::json implicit_to_json(const ImplicitDocument& doc, const SchemaDef& schema);

/// Structural equality of values (provenance ignored, decimals by value).
bool same_values(const ImplicitDocument& a, const ImplicitDocument& b);

/// Visits every present leaf, depth first in schema order.
template <typename Fn>
void for_each_leaf(const ImplicitNode& node, const SchemaDef& schema, Level level, std::vector<std::size_t>& nodes,
                   Fn&& fn) {
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      auto it = node.lists.find(f->name);
      if (it == node.lists.end()) continue;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (it->second[i]) fn(FieldPath{nodes, f->name, i}, *f, *it->second[i]);
      }
    } else {
      auto it = node.scalars.find(f->name);
      if (it != node.scalars.end()) fn(FieldPath{nodes, f->name, std::nullopt}, *f, it->second);
    }
  }
  auto child = child_level(level);
  if (!child) return;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    nodes.push_back(i);
    for_each_leaf(node.children[i], schema, *child, nodes, fn);
    nodes.pop_back();
  }
}

template <typename Fn>
void for_each_leaf(const ImplicitDocument& doc, const SchemaDef& schema, Fn&& fn) {
  std::vector<std::size_t> nodes;
  for_each_leaf(doc.root, schema, Level::global, nodes, fn);
}

}  // namespace docval
