#include "docval/values.hpp"

#include <cctype>
#include <stdexcept>

namespace docval {
namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_sep(char c) { return c == '.' || c == ','; }

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

NumberResult parse_amount(std::string_view raw) {
  std::size_t first = std::string_view::npos;
  std::size_t last = std::string_view::npos;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (is_digit(raw[i])) {
      if (first == std::string_view::npos) first = i;
      last = i;
    }
  }
  if (first == std::string_view::npos) return NumberResult::failure("no digits");

  std::string_view prefix = raw.substr(0, first);
  std::string_view suffix = raw.substr(last + 1);

  // ".50" style leading separator belongs to the number unless it ends a word ("RP.18").
  std::string core;
  if (!prefix.empty() && is_sep(prefix.back())) {
    bool glued_to_word = prefix.size() >= 2 && std::isalpha(static_cast<unsigned char>(prefix[prefix.size() - 2]));
    if (!glued_to_word) {
      core.push_back('0');
      core.push_back(prefix.back());
      prefix.remove_suffix(1);
    }
  }

  bool negative = prefix.find('-') != std::string_view::npos;
  std::string tail = trim(suffix);
  if (!tail.empty() && tail.front() == '-') negative = true;
  if (prefix.find('(') != std::string_view::npos && suffix.find(')') != std::string_view::npos) negative = true;

  for (std::size_t i = first; i <= last; ++i) {
    char c = raw[i];
    if (is_digit(c) || is_sep(c)) {
      core.push_back(c);
    } else if (c == ' ' || c == '\'') {
      continue;
    } else {
      return NumberResult::failure(std::string("unexpected character '") + c + "' inside number");
    }
  }
  for (std::size_t i = 1; i < core.size(); ++i) {
    if (is_sep(core[i]) && is_sep(core[i - 1])) return NumberResult::failure("adjacent separators");
  }

  std::size_t dots = 0;
  std::size_t commas = 0;
  for (char c : core) {
    dots += c == '.';
    commas += c == ',';
  }

  char decimal_sep = '\0';
  if (dots > 0 && commas > 0) {
    decimal_sep = core[core.find_last_of(".,")];
    if ((decimal_sep == '.' ? dots : commas) > 1) return NumberResult::failure("conflicting separators");
  } else if (dots + commas == 1) {
    std::size_t pos = core.find_first_of(".,");
    std::size_t after = core.size() - pos - 1;
    std::string_view before = std::string_view(core).substr(0, pos);
    bool grouping = after == 3 && !before.empty() && before != "0";
    decimal_sep = grouping ? '\0' : core[pos];
  }
  // Several separators of a single kind: all grouping, decimal_sep stays '\0'.

  std::string digits;
  int scale = 0;
  bool in_fraction = false;
  for (char c : core) {
    if (is_digit(c)) {
      digits.push_back(c);
      if (in_fraction) ++scale;
    } else if (c == decimal_sep) {
      in_fraction = true;
    }
  }
  std::size_t nz = digits.find_first_not_of('0');
  Decimal::Int value(nz == std::string::npos ? std::string("0") : digits.substr(nz));  // no octal
  if (negative) value = -value;
  return NumberResult::success(Decimal(std::move(value), scale));
}

NumberResult parse_rate(std::string_view raw) {
  std::string text(raw);
  bool percent = text.find('%') != std::string::npos;
  NumberResult base = parse_amount(text);
  if (!base.ok()) return base;
  const Decimal hundredth(1, 2);
  Decimal v = *base.value;
  if (percent || (v > Decimal(1) && v <= Decimal(100))) v = v * hundredth;
  return NumberResult::success(v);
}

NumberResult parse_integer(std::string_view raw) {
  NumberResult r = parse_amount(raw);
  if (!r.ok()) return r;
  if (!r.value->is_integer()) return NumberResult::failure("not a whole number");
  return NumberResult::success(r.value->normalized());
}

bool approx_equal(const Decimal& a, const Decimal& b, const Decimal& rel_tol) {
  if (rel_tol.sign() < 0) throw std::invalid_argument("approx_equal: negative tolerance");
  Decimal bound = rel_tol * std::max(a.abs(), b.abs());
  return (a - b).abs() <= bound;
}

namespace {

NumberResult coerce(FieldKind kind, std::string_view raw) {
  switch (kind) {
    case FieldKind::rate: return parse_rate(raw);
    case FieldKind::integer: return parse_integer(raw);
    default: return parse_amount(raw);
  }
}

ImplicitNode materialize_node(const ExplicitNode& node, const SchemaDef& schema, Level level,
                              std::vector<std::size_t>& nodes, std::vector<CoercionError>& errors) {
  ImplicitNode out;
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      auto it = node.lists.find(f->name);
      auto& target = out.lists[f->name];
      if (it == node.lists.end()) continue;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        const std::string& raw = it->second[i];
        if (f->kind == FieldKind::text_list) {
          target.emplace_back(Leaf{raw, Provenance::extracted});
          continue;
        }
        NumberResult r = parse_amount(raw);
        if (r.ok()) {
          target.emplace_back(Leaf{*r.value, Provenance::extracted});
        } else {
          target.emplace_back(std::nullopt);
          errors.push_back({FieldPath{nodes, f->name, i}, raw, r.reason});
        }
      }
      continue;
    }
    auto it = node.scalars.find(f->name);
    if (it == node.scalars.end() || !it->second) continue;
    const std::string& raw = *it->second;
    if (f->kind == FieldKind::text) {
      out.scalars.emplace(f->name, Leaf{raw, Provenance::extracted});
      continue;
    }
    NumberResult r = coerce(f->kind, raw);
    if (r.ok()) {
      out.scalars.emplace(f->name, Leaf{*r.value, Provenance::extracted});
    } else {
      errors.push_back({FieldPath{nodes, f->name, std::nullopt}, raw, r.reason});
    }
  }
  if (auto child = child_level(level)) {
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      nodes.push_back(i);
      out.children.push_back(materialize_node(node.children[i], schema, *child, nodes, errors));
      nodes.pop_back();
    }
  }
  return out;
}

}  // namespace

Materialized materialize(const ExplicitDocument& doc, const SchemaDef& schema) {
  Materialized m;
  std::vector<std::size_t> nodes;
  m.document.root = materialize_node(doc.root, schema, Level::global, nodes, m.errors);
  return m;
}

}  // namespace docval
