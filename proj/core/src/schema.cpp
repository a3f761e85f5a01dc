#include "docval/schema.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace docval {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::global: return "global";
    case Level::line_item: return "line_item";
    case Level::sub_item: return "sub_item";
  }
  return "?";
}

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::amount: return "amount";
    case FieldKind::rate: return "rate";
    case FieldKind::integer: return "integer";
    case FieldKind::text: return "text";
    case FieldKind::text_list: return "text_list";
    case FieldKind::amount_list: return "amount_list";
  }
  return "?";
}

std::optional<Level> level_from_string(std::string_view text) {
  for (Level l : {Level::global, Level::line_item, Level::sub_item}) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

std::optional<FieldKind> kind_from_string(std::string_view text) {
  for (FieldKind k : {FieldKind::amount, FieldKind::rate, FieldKind::integer, FieldKind::text,
                      FieldKind::text_list, FieldKind::amount_list}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view child_list_key(Level level) {
  switch (level) {
    case Level::global: return kLineItemsKey;
    case Level::line_item: return kSubItemsKey;
    case Level::sub_item: return {};
  }
  return {};
}

std::optional<Level> child_level(Level level) {
  switch (level) {
    case Level::global: return Level::line_item;
    case Level::line_item: return Level::sub_item;
    case Level::sub_item: return std::nullopt;
  }
  return std::nullopt;
}

bool is_list_kind(FieldKind kind) { return kind == FieldKind::text_list || kind == FieldKind::amount_list; }

bool is_numeric_kind(FieldKind kind) {
  return kind == FieldKind::amount || kind == FieldKind::rate || kind == FieldKind::integer ||
         kind == FieldKind::amount_list;
}

std::string PathRef::dotted() const {
  std::string out;
  if (level == Level::line_item || level == Level::sub_item) {
    out += kLineItemsKey;
    out += '.';
  }
  if (level == Level::sub_item) {
    out += kSubItemsKey;
    out += '.';
  }
  return out + field;
}

std::string Equation::expression() const {
  std::string out = lhs.dotted() + " =";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Term& t = terms[i];
    if (i == 0) {
      if (t.sign < 0) out += " -";
    } else {
      out += t.sign < 0 ? " -" : " +";
    }
    out += ' ';
    switch (t.op) {
      case Term::Op::field: out += t.first.dotted(); break;
      case Term::Op::product: out += t.first.dotted() + " * " + t.second->dotted(); break;
      case Term::Op::sum: out += "SUM(" + t.first.dotted() + ")"; break;
    }
  }
  return out;
}

PathRef parse_path(std::string_view dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts) {
    if (p.empty()) throw SchemaError("", "empty segment in path '" + std::string(dotted) + "'");
  }
  PathRef ref;
  ref.field = parts.back();
  if (parts.size() == 1) {
    ref.level = Level::global;
  } else if (parts.size() == 2 && parts[0] == kLineItemsKey) {
    ref.level = Level::line_item;
  } else if (parts.size() == 3 && parts[0] == kLineItemsKey && parts[1] == kSubItemsKey) {
    ref.level = Level::sub_item;
  } else {
    throw SchemaError("", "path '" + std::string(dotted) + "' does not name a document level");
  }
  return ref;
}

namespace {

int depth(Level level) { return static_cast<int>(level); }

const FieldDef* lookup(const std::vector<FieldDef>& fields, const PathRef& ref) {
  for (const auto& f : fields) {
    if (f.level == ref.level && f.name == ref.field) return &f;
  }
  return nullptr;
}

class EquationParser {
 public:
  EquationParser(std::string_view id, std::string_view text, const std::vector<FieldDef>& fields)
      : id_(id), text_(text), fields_(fields) {}

  Equation parse() {
    Equation eq;
    eq.id = std::string(id_);
    eq.lhs = path();
    expect('=');
    int sign = 1;
    skip_ws();
    if (peek() == '-') {
      sign = -1;
      ++pos_;
    } else if (peek() == '+') {
      ++pos_;
    }
    while (true) {
      Term t = term();
      t.sign = sign;
      eq.terms.push_back(std::move(t));
      skip_ws();
      if (pos_ >= text_.size()) break;
      char c = text_[pos_];
      if (c != '+' && c != '-') fail("expected '+' or '-'");
      sign = c == '-' ? -1 : 1;
      ++pos_;
    }
    check(eq);
    return eq;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError("", "equation " + std::string(id_) + " '" + std::string(text_) + "': " + what +
                              " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string identifier() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a field path");
    return std::string(text_.substr(start, pos_ - start));
  }

  PathRef path() {
    std::string word = identifier();
    try {
      return parse_path(word);
    } catch (const SchemaError& e) {
      fail(e.what());
    }
  }

  Term term() {
    Term t;
    skip_ws();
    std::size_t save = pos_;
    std::string word = identifier();
    skip_ws();
    if (word == "SUM" && peek() == '(') {
      ++pos_;
      t.op = Term::Op::sum;
      t.first = path();
      t.first.aggregate = true;
      expect(')');
      return t;
    }
    pos_ = save;
    t.first = path();
    skip_ws();
    if (peek() == '*') {
      ++pos_;
      t.op = Term::Op::product;
      t.second = path();
    }
    return t;
  }

  const FieldDef& resolve(const PathRef& ref) {
    const FieldDef* f = lookup(fields_, ref);
    if (f == nullptr) fail("unknown field '" + ref.dotted() + "'");
    return *f;
  }

  void check(const Equation& eq) {
    const FieldDef& lhs = resolve(eq.lhs);
    if (!is_numeric_kind(lhs.kind) || is_list_kind(lhs.kind)) fail("left side must be a numeric scalar");
    for (const Term& t : eq.terms) {
      const FieldDef& a = resolve(t.first);
      if (!is_numeric_kind(a.kind)) fail("'" + t.first.dotted() + "' is not numeric");
      if (t.op == Term::Op::sum) {
        bool child = depth(a.level) == depth(eq.binding()) + 1 && !is_list_kind(a.kind);
        bool own_list = a.level == eq.binding() && a.kind == FieldKind::amount_list;
        if (!child && !own_list) {
          fail("SUM(" + t.first.dotted() + ") must range over the next level or an amount list");
        }
        continue;
      }
      if (is_list_kind(a.kind)) fail("list field '" + t.first.dotted() + "' needs SUM()");
      if (a.level != eq.binding()) fail("'" + t.first.dotted() + "' is not at the equation's level");
      if (t.op == Term::Op::product) {
        const FieldDef& b = resolve(*t.second);
        if (!is_numeric_kind(b.kind) || is_list_kind(b.kind)) fail("'" + t.second->dotted() + "' is not a numeric scalar");
        if (b.level != eq.binding()) fail("'" + t.second->dotted() + "' is not at the equation's level");
      }
    }
  }

  std::string_view id_;
  std::string_view text_;
  const std::vector<FieldDef>& fields_;
  std::size_t pos_ = 0;
};

std::string title_case(std::string_view name) {
  std::string out;
  bool upper = true;
  for (char c : name) {
    if (c == '_') {
      out.push_back(' ');
      upper = true;
    } else {
      out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
      upper = false;
    }
  }
  return out;
}

}  // namespace

Equation parse_equation(std::string_view id, std::string_view text, const std::vector<FieldDef>& fields) {
  return EquationParser(id, text, fields).parse();
}

SchemaDef::SchemaDef(std::string version, std::vector<FieldDef> fields, std::vector<Equation> equations,
                     std::vector<StructuralRule> rules)
    : version_(std::move(version)),
      fields_(std::move(fields)),
      equations_(std::move(equations)),
      rules_(std::move(rules)) {
  std::set<std::pair<Level, std::string>> names;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const FieldDef& f = fields_[i];
    std::string loc = "/fields/" + std::to_string(i);
    if (f.name.empty()) throw SchemaError(loc, "field name is empty");
    if (f.name == kLineItemsKey || f.name == kSubItemsKey) {
      throw SchemaError(loc, "field name '" + f.name + "' is reserved for item lists");
    }
    if (!names.emplace(f.level, f.name).second) {
      throw SchemaError(loc, "duplicate field '" + f.name + "' at level " + std::string(to_string(f.level)));
    }
    if (f.default_value) {
      if (!is_numeric_kind(f.kind) || is_list_kind(f.kind)) {
        throw SchemaError(loc, "default given for non-numeric field '" + f.name + "'");
      }
      if (f.kind == FieldKind::integer && !f.default_value->is_integer()) {
        throw SchemaError(loc, "integer field '" + f.name + "' has a fractional default");
      }
      if (f.kind == FieldKind::rate && (*f.default_value < Decimal(0) || *f.default_value > Decimal(1))) {
        throw SchemaError(loc, "rate field '" + f.name + "' default outside [0, 1]");
      }
    }
  }
  if (has_level(Level::sub_item) && !has_level(Level::line_item)) {
    throw SchemaError("/fields", "sub_item fields require at least one line_item field");
  }

  std::set<std::string> ids;
  for (std::size_t i = 0; i < equations_.size(); ++i) {
    const Equation& eq = equations_[i];
    std::string loc = "/equations/" + std::to_string(i);
    if (eq.id.empty()) throw SchemaError(loc, "equation id is empty");
    if (!ids.insert(eq.id).second) throw SchemaError(loc, "duplicate equation id '" + eq.id + "'");
    try {
      // Re-parse the printed form: checks every reference against the registry.
      Equation reparsed = parse_equation(eq.id, eq.expression(), fields_);
      reparsed.enabled = eq.enabled;
      if (!(reparsed == eq)) throw SchemaError("", "equation does not round-trip through its text form");
    } catch (const SchemaError& e) {
      throw SchemaError(loc, e.what());
    }
  }

  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const StructuralRule& r = rules_[i];
    std::string loc = "/rules/" + std::to_string(i);
    if (r.id.empty()) throw SchemaError(loc, "rule id is empty");
    if (!ids.insert(r.id).second) throw SchemaError(loc, "duplicate rule id '" + r.id + "'");
    switch (r.kind) {
      case StructuralRule::Kind::min_line_items:
        break;
      case StructuralRule::Kind::required_one_of:
        if (r.fields.empty()) throw SchemaError(loc, "required_one_of needs at least one field");
        for (const auto& name : r.fields) {
          if (find(Level::global, name) == nullptr) throw SchemaError(loc, "unknown field '" + name + "'");
        }
        break;
      case StructuralRule::Kind::bounds: {
        if (!r.target) throw SchemaError(loc, "bounds rule needs a field");
        const FieldDef* f = find(r.target->level, r.target->field);
        if (f == nullptr) throw SchemaError(loc, "unknown field '" + r.target->dotted() + "'");
        if (!is_numeric_kind(f->kind) || is_list_kind(f->kind)) {
          throw SchemaError(loc, "bounds rule on non-numeric field '" + r.target->dotted() + "'");
        }
        if (!r.lower && !r.upper) throw SchemaError(loc, "bounds rule needs min or max");
        break;
      }
    }
  }
}

const FieldDef* SchemaDef::find(Level level, std::string_view name) const {
  for (const auto& f : fields_) {
    if (f.level == level && f.name == name) return &f;
  }
  return nullptr;
}

std::vector<const FieldDef*> SchemaDef::fields_at(Level level) const {
  std::vector<const FieldDef*> out;
  for (const auto& f : fields_) {
    if (f.level == level) out.push_back(&f);
  }
  return out;
}

bool SchemaDef::has_level(Level level) const {
  for (const auto& f : fields_) {
    if (f.level == level) return true;
  }
  return false;
}

SchemaDef builtin_transactional_schema() {
  using K = FieldKind;
  using L = Level;
  auto field = [](std::string name, L level, K kind, std::string description,
                  std::optional<Decimal> def = std::nullopt) {
    return FieldDef{std::move(name), level, kind, std::move(def), std::move(description)};
  };
  std::vector<FieldDef> fields = {
      field("gross_total", L::global, K::amount, "Total amount including all taxes"),
      field("net_total", L::global, K::amount, "Total amount before taxes"),
      field("total_tax", L::global, K::amount, "Total tax amount"),
      field("tax_rate", L::global, K::rate, "Tax rate applied to the taxable base, e.g. 10% or 0.10"),
      field("base_taxable_amount", L::global, K::amount, "Sum of the amounts that are subject to tax"),
      field("non_taxable_amount", L::global, K::amount, "Part of the net total that is exempt from tax",
            Decimal(0)),
      field("subtotal", L::global, K::amount, "Subtotal printed on the document"),
      field("net_discounts", L::global, K::amount_list, "Discount amounts deducted from the amount due"),
      field("commission", L::global, K::amount, "Service charge or commission added to the total", Decimal(0)),
      field("prior_balance", L::global, K::amount, "Balance carried over from earlier transactions", Decimal(0)),
      field("due_amount", L::global, K::amount, "Amount due before discounts"),
      field("net_due_amount", L::global, K::amount, "Amount finally due after discounts"),
      field("menutype_count", L::global, K::integer, "Number of distinct menu items or products"),
      field("currency", L::global, K::text, "Currency symbol or code as printed"),
      field("name", L::line_item, K::text, "Name or description of the item"),
      field("quantity", L::line_item, K::amount, "Quantity of the item", Decimal(1)),
      field("unit_price", L::line_item, K::amount, "Price of a single unit"),
      field("net_total", L::line_item, K::amount, "Line amount before taxes"),
      field("gross_total", L::line_item, K::amount, "Line amount including taxes"),
      field("tax_amount", L::line_item, K::amount, "Tax charged on the line"),
      field("name", L::sub_item, K::text, "Name of the sub item, option or topping"),
      field("quantity", L::sub_item, K::amount, "Quantity of the sub item", Decimal(1)),
      field("net_total", L::sub_item, K::amount, "Sub item amount before taxes"),
  };
  const std::pair<const char*, const char*> equations[] = {
      {"E1", "gross_total = net_total + total_tax"},
      {"E2", "total_tax = base_taxable_amount * tax_rate"},
      {"E3", "base_taxable_amount = SUM(line_items.net_total)"},
      {"E4", "net_total = base_taxable_amount + non_taxable_amount"},
      {"E5", "due_amount = gross_total + commission + prior_balance"},
      {"E6", "net_due_amount = due_amount - SUM(net_discounts)"},
      {"E7", "line_items.net_total = line_items.quantity * line_items.unit_price"},
      {"E8", "line_items.gross_total = line_items.net_total + line_items.tax_amount"},
      {"E9", "line_items.net_total = SUM(line_items.sub_items.net_total)"},
  };
  std::vector<Equation> eqs;
  for (const auto& [id, text] : equations) eqs.push_back(parse_equation(id, text, fields));

  std::vector<StructuralRule> rules;
  StructuralRule r1;
  r1.id = "R1";
  r1.kind = StructuralRule::Kind::min_line_items;
  r1.min_count = 1;
  rules.push_back(r1);
  StructuralRule r2;
  r2.id = "R2";
  r2.kind = StructuralRule::Kind::required_one_of;
  r2.fields = {"gross_total", "net_total"};
  rules.push_back(r2);
  StructuralRule r3;
  r3.id = "R3";
  r3.kind = StructuralRule::Kind::bounds;
  r3.target = PathRef{Level::global, "tax_rate", false};
  r3.lower = Decimal(0);
  r3.upper = Decimal(1);
  rules.push_back(r3);

  return SchemaDef("transactional-core-1", std::move(fields), std::move(eqs), std::move(rules));
}

nlohmann::json schema_to_json(const SchemaDef& schema) {
  nlohmann::json out;
  out["version"] = schema.version();
  out["fields"] = nlohmann::json::array();
  for (const auto& f : schema.fields()) {
    nlohmann::json j{{"name", f.name}, {"level", to_string(f.level)}, {"kind", to_string(f.kind)}};
    if (f.default_value) j["default"] = f.default_value->to_string();
    if (!f.description.empty()) j["description"] = f.description;
    out["fields"].push_back(std::move(j));
  }
  out["equations"] = nlohmann::json::array();
  for (const auto& eq : schema.equations()) {
    nlohmann::json j{{"id", eq.id}, {"expr", eq.expression()}};
    if (!eq.enabled) j["enabled"] = false;
    out["equations"].push_back(std::move(j));
  }
  out["rules"] = nlohmann::json::array();
  for (const auto& r : schema.rules()) {
    nlohmann::json j{{"id", r.id}};
    switch (r.kind) {
      case StructuralRule::Kind::min_line_items:
        j["kind"] = "min_line_items";
        j["min"] = r.min_count;
        break;
      case StructuralRule::Kind::required_one_of:
        j["kind"] = "required_one_of";
        j["fields"] = r.fields;
        break;
      case StructuralRule::Kind::bounds:
        j["kind"] = "bounds";
        j["field"] = r.target->dotted();
        if (r.lower) j["min"] = r.lower->to_string();
        if (r.upper) j["max"] = r.upper->to_string();
        break;
    }
    out["rules"].push_back(std::move(j));
  }
  return out;
}

namespace {

const nlohmann::json& member(const nlohmann::json& obj, const char* key, const std::string& loc) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(loc, std::string("missing '") + key + "'");
  return *it;
}

std::string string_member(const nlohmann::json& obj, const char* key, const std::string& loc) {
  const auto& v = member(obj, key, loc);
  if (!v.is_string()) throw SchemaError(loc + "/" + key, "expected a string");
  return v.get<std::string>();
}

Decimal decimal_value(const nlohmann::json& v, const std::string& loc) {
  std::optional<Decimal> d;
  if (v.is_string()) {
    d = Decimal::from_string(v.get<std::string>());
  } else if (v.is_number_integer()) {
    d = Decimal(v.get<std::int64_t>());
  }
  if (!d) throw SchemaError(loc, "expected a decimal written as a string, e.g. \"0.5\"");
  return *d;
}

}  // namespace

SchemaDef schema_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("", "schema file must be a JSON object");
  std::string version = doc.contains("version") ? string_member(doc, "version", "") : std::string("custom");

  std::vector<FieldDef> fields;
  const auto& jf = member(doc, "fields", "");
  if (!jf.is_array()) throw SchemaError("/fields", "expected an array");
  for (std::size_t i = 0; i < jf.size(); ++i) {
    std::string loc = "/fields/" + std::to_string(i);
    const auto& j = jf[i];
    if (!j.is_object()) throw SchemaError(loc, "expected an object");
    FieldDef f;
    f.name = string_member(j, "name", loc);
    auto level = level_from_string(string_member(j, "level", loc));
    if (!level) throw SchemaError(loc + "/level", "unknown level");
    f.level = *level;
    auto kind = kind_from_string(string_member(j, "kind", loc));
    if (!kind) throw SchemaError(loc + "/kind", "unknown kind");
    f.kind = *kind;
    if (j.contains("default") && !j["default"].is_null()) f.default_value = decimal_value(j["default"], loc + "/default");
    if (j.contains("description")) f.description = string_member(j, "description", loc);
    fields.push_back(std::move(f));
  }

  std::vector<Equation> equations;
  if (doc.contains("equations")) {
    const auto& je = doc["equations"];
    if (!je.is_array()) throw SchemaError("/equations", "expected an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < je.size(); ++i) {
      std::string loc = "/equations/" + std::to_string(i);
      const auto& j = je[i];
      if (!j.is_object()) throw SchemaError(loc, "expected an object");
      std::string id = string_member(j, "id", loc);
      if (!seen.insert(id).second) throw SchemaError(loc, "duplicate equation id '" + id + "'");
      Equation eq;
      try {
        eq = parse_equation(id, string_member(j, "expr", loc), fields);
      } catch (const SchemaError& e) {
        throw SchemaError(loc + "/expr", e.what());
      }
      if (j.contains("enabled")) {
        if (!j["enabled"].is_boolean()) throw SchemaError(loc + "/enabled", "expected a boolean");
        eq.enabled = j["enabled"].get<bool>();
      }
      equations.push_back(std::move(eq));
    }
  }

  std::vector<StructuralRule> rules;
  if (doc.contains("rules")) {
    const auto& jr = doc["rules"];
    if (!jr.is_array()) throw SchemaError("/rules", "expected an array");
    for (std::size_t i = 0; i < jr.size(); ++i) {
      std::string loc = "/rules/" + std::to_string(i);
      const auto& j = jr[i];
      if (!j.is_object()) throw SchemaError(loc, "expected an object");
      StructuralRule r;
      r.id = string_member(j, "id", loc);
      std::string kind = string_member(j, "kind", loc);
      if (kind == "min_line_items") {
        r.kind = StructuralRule::Kind::min_line_items;
        if (j.contains("min")) {
          if (!j["min"].is_number_unsigned()) throw SchemaError(loc + "/min", "expected a non-negative integer");
          r.min_count = j["min"].get<std::size_t>();
        }
      } else if (kind == "required_one_of") {
        r.kind = StructuralRule::Kind::required_one_of;
        const auto& names = member(j, "fields", loc);
        if (!names.is_array()) throw SchemaError(loc + "/fields", "expected an array");
        for (const auto& n : names) {
          if (!n.is_string()) throw SchemaError(loc + "/fields", "expected field names");
          r.fields.push_back(n.get<std::string>());
        }
      } else if (kind == "bounds") {
        r.kind = StructuralRule::Kind::bounds;
        try {
          r.target = parse_path(string_member(j, "field", loc));
        } catch (const SchemaError& e) {
          throw SchemaError(loc + "/field", e.what());
        }
        if (j.contains("min")) r.lower = decimal_value(j["min"], loc + "/min");
        if (j.contains("max")) r.upper = decimal_value(j["max"], loc + "/max");
      } else {
        throw SchemaError(loc + "/kind", "unknown rule kind '" + kind + "'");
      }
      rules.push_back(std::move(r));
    }
  }

  return SchemaDef(std::move(version), std::move(fields), std::move(equations), std::move(rules));
}

SchemaDef load_schema(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("malformed schema file: ") + e.what());
  }
  return schema_from_json(doc);
}

SchemaDef load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot open schema file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_schema(buf.str());
}

namespace {

nlohmann::json field_property(const FieldDef& f) {
  nlohmann::json p;
  if (is_list_kind(f.kind)) {
    p["items"] = {{"type", "string"}};
    p["type"] = "array";
    p["default"] = nlohmann::json::array();
  } else {
    p["anyOf"] = nlohmann::json::array({{{"type", "string"}}, {{"type", "null"}}});
    p["default"] = nullptr;
  }
  if (!f.description.empty()) p["description"] = f.description;
  p["title"] = title_case(f.name);
  return p;
}

nlohmann::json object_def(const SchemaDef& schema, Level level, const char* child_def) {
  nlohmann::json properties = nlohmann::json::object();
  nlohmann::json required = nlohmann::json::array();
  for (const FieldDef* f : schema.fields_at(level)) {
    properties[f->name] = field_property(*f);
    required.push_back(f->name);
  }
  auto child = child_level(level);
  if (child && schema.has_level(*child)) {
    std::string key(child_list_key(level));
    properties[key] = {{"items", {{"$ref", std::string("#/$defs/") + child_def}}},
                       {"type", "array"},
                       {"default", nlohmann::json::array()},
                       {"title", title_case(key)}};
    required.push_back(key);
  }
  return {{"properties", properties}, {"required", required}, {"type", "object"}};
}

}  // namespace

nlohmann::json to_output_schema(const SchemaDef& schema) {
  nlohmann::json defs = nlohmann::json::object();
  nlohmann::json invoice = object_def(schema, Level::global, "LineItem");
  invoice["title"] = "Invoice";
  defs["Invoice"] = std::move(invoice);
  if (schema.has_level(Level::line_item)) {
    nlohmann::json line = object_def(schema, Level::line_item, "SubItem");
    line["title"] = "LineItem";
    defs["LineItem"] = std::move(line);
  }
  if (schema.has_level(Level::sub_item)) {
    nlohmann::json sub = object_def(schema, Level::sub_item, "");
    sub["title"] = "SubItem";
    defs["SubItem"] = std::move(sub);
  }
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"$defs", std::move(defs)},
          {"$ref", "#/$defs/Invoice"}};
}

}  // namespace docval
