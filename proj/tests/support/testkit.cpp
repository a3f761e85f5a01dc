#include "testkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "docval/validation.hpp"

namespace testkit {

using namespace docval;

Decimal dec(const std::string& text) {
  auto d = Decimal::from_string(text);
  if (!d) throw std::invalid_argument("bad decimal literal " + text);
  return *d;
}

Decimal cents(long long c) { return Decimal(Decimal::Int(c), 2); }

namespace {

nlohmann::json empty_object(const SchemaDef& schema, Level level) {
  nlohmann::json obj = nlohmann::json::object();
  for (const FieldDef* f : schema.fields_at(level)) {
    obj[f->name] = is_list_kind(f->kind) ? nlohmann::json::array() : nlohmann::json(nullptr);
  }
  auto child = child_level(level);
  if (child && schema.has_level(*child)) obj[std::string(child_list_key(level))] = nlohmann::json::array();
  return obj;
}

nlohmann::json merged(const SchemaDef& schema, Level level, const nlohmann::json& patch) {
  nlohmann::json obj = empty_object(schema, level);
  auto child = child_level(level);
  for (const auto& [key, value] : patch.items()) {
    if (child && key == child_list_key(level) && value.is_array()) {
      nlohmann::json items = nlohmann::json::array();
      for (const auto& item : value) items.push_back(merged(schema, *child, item));
      obj[key] = items;
    } else {
      obj[key] = value;
    }
  }
  return obj;
}

}  // namespace

nlohmann::json explicit_json(const SchemaDef& schema, const nlohmann::json& patch) {
  return merged(schema, Level::global, patch);
}

ExplicitDocument make_explicit(const SchemaDef& schema, const nlohmann::json& patch) {
  SyntacticResult r = explicit_from_json(explicit_json(schema, patch), schema);
  if (!r.ok()) throw std::invalid_argument("make_explicit: " + r.errors.front().path + " " + r.errors.front().message);
  return *r.document;
}

std::map<std::string, std::string> leaf_map(const ImplicitDocument& doc, const SchemaDef& schema) {
  std::map<std::string, std::string> out;
  for_each_leaf(doc, schema, [&](const FieldPath& p, const FieldDef&, const Leaf& leaf) {
    out[p.to_string()] = leaf.canonical();
  });
  return out;
}

// --- synthetic invoices ---------------------------------------------------------

namespace {

const std::vector<std::string> kItemNames = {"COKE",  "PIZZA MARGHERITA", "FRIES",    "ESPRESSO", "BAGEL",
                                             "SALAD", "NOODLE SOUP",      "ICED TEA", "BROWNIE",  "WATER 500ML"};
const std::vector<std::string> kSubNames = {"EXTRA CHEESE", "NO ICE", "LARGE", "SPICY", "OAT MILK"};
const std::vector<std::string> kRates = {"0.05", "0.06", "0.10", "0.11"};

Leaf num(Decimal d) { return Leaf{std::move(d), Provenance::extracted}; }
Leaf txt(std::string s) { return Leaf{std::move(s), Provenance::extracted}; }

long long uniform(std::mt19937_64& rng, long long lo, long long hi) {
  return std::uniform_int_distribution<long long>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Keeps the exact value but prints two decimals when that loses nothing.
Decimal tidy(const Decimal& d) {
  Decimal two = d.rescaled(2);
  return two == d ? two : d;
}

}  // namespace

ImplicitDocument random_invoice(std::mt19937_64& rng, const InvoiceShape& shape) {
  ImplicitDocument doc;
  ImplicitNode& g = doc.root;
  int lines = static_cast<int>(uniform(rng, shape.min_lines, shape.max_lines));
  std::vector<std::string> names = kItemNames;
  std::shuffle(names.begin(), names.end(), rng);

  Decimal base(0);
  for (int i = 0; i < lines; ++i) {
    ImplicitNode line;
    line.scalars["name"] = txt(names[static_cast<std::size_t>(i) % names.size()]);
    Decimal net(0);
    if (shape.max_subs > 0 && coin(rng, shape.sub_prob)) {
      int subs = static_cast<int>(uniform(rng, 1, shape.max_subs));
      for (int j = 0; j < subs; ++j) {
        ImplicitNode sub;
        sub.scalars["name"] = txt(kSubNames[static_cast<std::size_t>(uniform(rng, 0, 4))]);
        sub.scalars["quantity"] = num(Decimal(1));
        Decimal sub_net = cents(uniform(rng, 1, 40) * shape.price_step * 5);
        sub.scalars["net_total"] = num(sub_net);
        net = net + sub_net;
        line.children.push_back(std::move(sub));
      }
      line.scalars["quantity"] = num(Decimal(1));
      line.scalars["unit_price"] = num(net);
    } else {
      Decimal qty(uniform(rng, 1, 4));
      Decimal price = cents(uniform(rng, 1, 250) * shape.price_step);
      net = qty * price;
      line.scalars["quantity"] = num(qty);
      line.scalars["unit_price"] = num(price);
    }
    Decimal tax = cents(uniform(rng, 0, 300));
    line.scalars["net_total"] = num(net);
    line.scalars["tax_amount"] = num(tax);
    line.scalars["gross_total"] = num(net + tax);
    base = base + net;
    g.children.push_back(std::move(line));
  }

  Decimal rate = dec(kRates[static_cast<std::size_t>(uniform(rng, 0, 3))]);
  Decimal total_tax = tidy(base * rate);
  Decimal non_taxable = coin(rng, 0.5) ? Decimal(0) : cents(uniform(rng, 1, 2000));
  Decimal net_total = base + non_taxable;
  Decimal gross = net_total + total_tax;
  Decimal commission = coin(rng, 0.5) ? Decimal(0) : cents(uniform(rng, 1, 500));
  Decimal prior = coin(rng, 0.7) ? Decimal(0) : cents(uniform(rng, 1, 5000));
  Decimal due = gross + commission + prior;
  std::vector<std::optional<Leaf>> discounts;
  Decimal discount_sum(0);
  int n_disc = static_cast<int>(uniform(rng, 0, shape.max_discounts));
  for (int k = 0; k < n_disc; ++k) {
    Decimal d = cents(uniform(rng, 1, 300));
    discount_sum = discount_sum + d;
    discounts.emplace_back(num(d));
  }

  g.scalars["gross_total"] = num(gross);
  g.scalars["net_total"] = num(net_total);
  g.scalars["total_tax"] = num(total_tax);
  g.scalars["tax_rate"] = num(rate);
  g.scalars["base_taxable_amount"] = num(base);
  g.scalars["non_taxable_amount"] = num(non_taxable.rescaled(2));
  g.scalars["subtotal"] = num(base);
  g.lists["net_discounts"] = std::move(discounts);
  g.scalars["commission"] = num(commission.rescaled(2));
  g.scalars["prior_balance"] = num(prior.rescaled(2));
  g.scalars["due_amount"] = num(due);
  g.scalars["net_due_amount"] = num(due - discount_sum);
  g.scalars["menutype_count"] = num(Decimal(lines));
  g.scalars["currency"] = txt("USD");
  return doc;
}

namespace {

void drop_node(ImplicitNode& node, const SchemaDef& schema, Level level, std::mt19937_64& rng, double keep) {
  for (auto it = node.scalars.begin(); it != node.scalars.end();) {
    const FieldDef* f = schema.find(level, it->first);
    bool pinned = f && f->default_value && it->second.number() && *it->second.number() != *f->default_value;
    if (!pinned && !coin(rng, keep)) {
      it = node.scalars.erase(it);
    } else {
      ++it;
    }
  }
  for (auto& [name, elems] : node.lists) {
    for (auto& e : elems) {
      if (e && !coin(rng, keep)) e.reset();
    }
  }
  if (auto child = child_level(level)) {
    for (auto& c : node.children) drop_node(c, schema, *child, rng, keep);
  }
}

nlohmann::json render_node(const ImplicitNode& node, const SchemaDef& schema, Level level, const NumberFormat& format) {
  nlohmann::json obj = nlohmann::json::object();
  for (const FieldDef* f : schema.fields_at(level)) {
    auto show = [&](const Leaf& leaf) -> std::string {
      if (const auto* t = leaf.text()) return *t;
      return format ? format(*f, *leaf.number()) : leaf.number()->to_string();
    };
    if (is_list_kind(f->kind)) {
      nlohmann::json arr = nlohmann::json::array();
      if (auto it = node.lists.find(f->name); it != node.lists.end()) {
        for (const auto& e : it->second) {
          if (e) arr.push_back(show(*e));
        }
      }
      obj[f->name] = arr;
    } else if (auto it = node.scalars.find(f->name); it != node.scalars.end()) {
      obj[f->name] = show(it->second);
    } else {
      obj[f->name] = nullptr;
    }
  }
  auto child = child_level(level);
  if (child && schema.has_level(*child)) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : node.children) items.push_back(render_node(c, schema, *child, format));
    obj[std::string(child_list_key(level))] = items;
  }
  return obj;
}

}  // namespace

ImplicitDocument drop_leaves(const ImplicitDocument& full, const SchemaDef& schema, std::mt19937_64& rng,
                             double keep) {
  ImplicitDocument out = full;
  drop_node(out.root, schema, Level::global, rng, keep);
  return out;
}

nlohmann::json render_explicit(const ImplicitDocument& doc, const SchemaDef& schema, const NumberFormat& format) {
  return render_node(doc.root, schema, Level::global, format);
}

NumberFormat receipt_format() {
  return [](const FieldDef& f, const Decimal& d) -> std::string {
    if (f.kind == FieldKind::rate) return (d * Decimal(100)).normalized().to_string() + "%";
    std::string s = d.to_string();
    if (f.kind != FieldKind::amount && f.kind != FieldKind::amount_list) return s;
    std::size_t end = s.find('.');
    if (end == std::string::npos) end = s.size();
    std::size_t begin = s[0] == '-' ? 1 : 0;
    for (std::size_t pos = end; pos > begin + 3; pos -= 3) s.insert(pos - 3, 1, ',');
    return s;
  };
}

std::string receipt_ocr(const ImplicitDocument& doc, const SchemaDef& schema, const std::string& title) {
  nlohmann::json j = render_explicit(doc, schema, receipt_format());
  auto v = [&](const nlohmann::json& obj, const char* key) {
    return obj[key].is_string() ? obj[key].get<std::string>() : std::string("-");
  };
  std::vector<std::string> words = {"STORE", "RECEIPT", title};
  auto say = [&](std::initializer_list<std::string> parts) {
    for (const auto& p : parts) words.push_back(p);
  };
  for (const auto& line : j["line_items"]) {
    say({v(line, "quantity"), "x", v(line, "name"), "@", v(line, "unit_price"), "=", v(line, "net_total"), "TAX",
         v(line, "tax_amount"), "LINE", v(line, "gross_total")});
    for (const auto& sub : line["sub_items"]) say({"+", v(sub, "name"), v(sub, "quantity"), v(sub, "net_total")});
  }
  say({"BASE", v(j, "base_taxable_amount"), "NON-TAXABLE", v(j, "non_taxable_amount"), "SUBTOTAL", v(j, "subtotal"),
       "TAX", v(j, "tax_rate"), v(j, "total_tax"), "NET", v(j, "net_total"), "TOTAL", v(j, "gross_total"), "SERVICE",
       v(j, "commission"), "PRIOR", "BALANCE", v(j, "prior_balance"), "DUE", v(j, "due_amount")});
  for (const auto& d : j["net_discounts"]) say({"DISCOUNT", d.get<std::string>()});
  say({"AMOUNT", "DUE", v(j, "net_due_amount"), "ITEMS", v(j, "menutype_count"), v(j, "currency"), "THANK", "YOU"});
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// --- resolver oracle ------------------------------------------------------------

namespace {

struct OTerm {
  int sign = 1;
  std::string a;
  std::optional<std::string> b;
};

struct Relation {
  std::string lhs;
  std::vector<OTerm> terms;
};

using State = std::map<std::string, std::optional<Decimal>>;

std::string line_key(std::size_t i, const std::string& f) { return "line_items[" + std::to_string(i) + "]." + f; }
std::string sub_key(std::size_t i, std::size_t j, const std::string& f) {
  return "line_items[" + std::to_string(i) + "].sub_items[" + std::to_string(j) + "]." + f;
}

// The builtin equations, instantiated by hand for this document's shape.
std::vector<Relation> instantiate(const ImplicitDocument& doc) {
  const auto& g = doc.root;
  std::vector<Relation> rels;
  rels.push_back({"gross_total", {{1, "net_total", {}}, {1, "total_tax", {}}}});
  rels.push_back({"total_tax", {{1, "base_taxable_amount", std::string("tax_rate")}}});
  if (!g.children.empty()) {
    Relation e3{"base_taxable_amount", {}};
    for (std::size_t i = 0; i < g.children.size(); ++i) e3.terms.push_back({1, line_key(i, "net_total"), {}});
    rels.push_back(e3);
  }
  rels.push_back({"net_total", {{1, "base_taxable_amount", {}}, {1, "non_taxable_amount", {}}}});
  rels.push_back({"due_amount", {{1, "gross_total", {}}, {1, "commission", {}}, {1, "prior_balance", {}}}});
  Relation e6{"net_due_amount", {{1, "due_amount", {}}}};
  if (auto it = g.lists.find("net_discounts"); it != g.lists.end()) {
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      e6.terms.push_back({-1, "net_discounts[" + std::to_string(k) + "]", {}});
    }
  }
  rels.push_back(e6);
  for (std::size_t i = 0; i < g.children.size(); ++i) {
    rels.push_back({line_key(i, "net_total"), {{1, line_key(i, "quantity"), line_key(i, "unit_price")}}});
    rels.push_back({line_key(i, "gross_total"), {{1, line_key(i, "net_total"), {}}, {1, line_key(i, "tax_amount"), {}}}});
    const auto& subs = g.children[i].children;
    if (!subs.empty()) {
      Relation e9{line_key(i, "net_total"), {}};
      for (std::size_t j = 0; j < subs.size(); ++j) e9.terms.push_back({1, sub_key(i, j, "net_total"), {}});
      rels.push_back(e9);
    }
  }
  return rels;
}

std::optional<std::pair<std::string, Decimal>> fire(const Relation& r, const State& s) {
  auto value = [&](const std::string& k) -> const std::optional<Decimal>& {
    static const std::optional<Decimal> none;
    auto it = s.find(k);
    return it == s.end() ? none : it->second;
  };
  std::set<std::string> missing;
  if (!value(r.lhs)) missing.insert(r.lhs);
  for (const auto& t : r.terms) {
    if (!value(t.a)) missing.insert(t.a);
    if (t.b && !value(*t.b)) missing.insert(*t.b);
  }
  if (missing.size() != 1) return std::nullopt;
  const std::string target = *missing.begin();

  auto term_value = [&](const OTerm& t) {
    Decimal v = *value(t.a);
    if (t.b) v = v * *value(*t.b);
    return t.sign < 0 ? -v : v;
  };
  if (target == r.lhs) {
    Decimal sum(0);
    for (const auto& t : r.terms) sum = sum + term_value(t);
    return std::make_pair(target, sum);
  }
  Decimal rest = *value(r.lhs);
  const OTerm* holder = nullptr;
  for (const auto& t : r.terms) {
    if (t.a == target || (t.b && *t.b == target)) {
      holder = &t;
    } else {
      rest = rest - term_value(t);
    }
  }
  if (holder->sign < 0) rest = -rest;
  if (!holder->b) return std::make_pair(target, rest);
  const std::string& other = holder->a == target ? *holder->b : holder->a;
  const Decimal& cofactor = *value(other);
  if (cofactor.is_zero()) return std::nullopt;
  return std::make_pair(target, Decimal::divide(rest, cofactor, 6).normalized());
}

std::string state_key(const State& s) {
  std::string key;
  for (const auto& [k, v] : s) {
    key += v ? v->canonical() : "~";
    key += '|';
  }
  return key;
}

}  // namespace

SaturationResult saturation_oracle(const ImplicitDocument& defaulted, const SchemaDef& schema, std::size_t budget) {
  auto rels = instantiate(defaulted);
  State start;
  for (const auto& r : rels) {
    start[r.lhs];
    for (const auto& t : r.terms) {
      start[t.a];
      if (t.b) start[*t.b];
    }
  }
  auto base = leaf_map(defaulted, schema);
  for (auto& [k, v] : start) {
    if (auto it = base.find(k); it != base.end()) v = Decimal::from_string(it->second);
  }

  SaturationResult result;
  std::set<std::string> seen;
  std::map<std::string, State> terminals;
  std::vector<State> stack{start};
  while (!stack.empty()) {
    State s = std::move(stack.back());
    stack.pop_back();
    std::string key = state_key(s);
    if (!seen.insert(key).second) continue;
    if (seen.size() > budget) {
      result.exhausted_budget = true;
      break;
    }
    bool moved = false;
    for (const auto& r : rels) {
      if (auto f = fire(r, s)) {
        moved = true;
        State next = s;
        next[f->first] = f->second;
        stack.push_back(std::move(next));
      }
    }
    if (!moved) terminals.emplace(key, s);
  }
  result.states = seen.size();
  for (const auto& [_, s] : terminals) {
    auto m = base;
    for (const auto& [k, v] : s) {
      if (v) m[k] = v->canonical();
    }
    result.fixpoints.push_back(std::move(m));
  }
  return result;
}

// --- tree oracle ----------------------------------------------------------------

DocTree random_forest(std::mt19937_64& rng, std::size_t nodes, int alphabet) {
  // parent[i] < i, or -1 for a root; children keep index order.
  std::vector<int> parent(nodes, -1);
  std::vector<std::string> labels(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    parent[i] = static_cast<int>(uniform(rng, -1, static_cast<long long>(i) - 1));
    labels[i] = std::string(1, static_cast<char>('a' + uniform(rng, 0, alphabet - 1)));
  }
  std::function<TreeNode(std::size_t)> build = [&](std::size_t i) {
    TreeNode n{labels[i], {}};
    for (std::size_t j = i + 1; j < nodes; ++j) {
      if (parent[j] == static_cast<int>(i)) n.children.push_back(build(j));
    }
    return n;
  };
  DocTree forest;
  for (std::size_t i = 0; i < nodes; ++i) {
    if (parent[i] == -1) forest.push_back(build(i));
  }
  return forest;
}

namespace {

struct Flat {
  std::vector<std::string> label;
  std::vector<std::size_t> end;  // preorder index one past the subtree
};

void flatten_tree(const TreeNode& n, Flat& f) {
  std::size_t me = f.label.size();
  f.label.push_back(n.label);
  f.end.push_back(0);
  for (const auto& c : n.children) flatten_tree(c, f);
  f.end[me] = f.label.size();
}

Flat flatten_forest(const DocTree& t) {
  Flat f;
  for (const auto& n : t) flatten_tree(n, f);
  return f;
}

bool ancestor(const Flat& f, std::size_t x, std::size_t y) { return x < y && y < f.end[x]; }

}  // namespace

std::size_t ted_oracle(const DocTree& a, const DocTree& b) {
  Flat fa = flatten_forest(a);
  Flat fb = flatten_forest(b);
  const std::size_t na = fa.label.size();
  const std::size_t nb = fb.label.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t best = na + nb;

  // Mappings listed in preorder of a are also in preorder of b; ancestry must agree pairwise.
  std::function<void(std::size_t, std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t next_b,
                                                                       std::size_t relabels) {
    if (i == na) {
      std::size_t k = pairs.size();
      best = std::min(best, relabels + (na - k) + (nb - k));
      return;
    }
    rec(i + 1, next_b, relabels);
    for (std::size_t j = next_b; j < nb; ++j) {
      bool ok = true;
      for (const auto& [pa, pb] : pairs) {
        if (ancestor(fa, pa, i) != ancestor(fb, pb, j)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      pairs.emplace_back(i, j);
      rec(i + 1, j + 1, relabels + (fa.label[i] != fb.label[j] ? 1 : 0));
      pairs.pop_back();
    }
  };
  rec(0, 0, 0);
  return best;
}

// --- fuzzing --------------------------------------------------------------------

std::string mutate(std::string text, std::mt19937_64& rng) {
  static const std::string kAlphabet = "{}[]\",:0123456789.,- abcXYZ\\";
  int ops = static_cast<int>(uniform(rng, 1, 3));
  for (int op = 0; op < ops && !text.empty(); ++op) {
    std::size_t pos = static_cast<std::size_t>(uniform(rng, 0, static_cast<long long>(text.size()) - 1));
    switch (uniform(rng, 0, 6)) {
      case 0:  // delete a span
        text.erase(pos, static_cast<std::size_t>(uniform(rng, 1, 8)));
        break;
      case 1:  // insert a character
        text.insert(pos, 1, kAlphabet[static_cast<std::size_t>(uniform(rng, 0, static_cast<long long>(kAlphabet.size()) - 1))]);
        break;
      case 2: {  // change a digit
        auto d = text.find_first_of("0123456789", pos);
        if (d != std::string::npos) text[d] = static_cast<char>('0' + uniform(rng, 0, 9));
        break;
      }
      case 3:  // truncate
        text.resize(pos);
        break;
      case 4: {  // duplicate a span
        std::size_t len = static_cast<std::size_t>(uniform(rng, 1, 12));
        text.insert(pos, text.substr(pos, len));
        break;
      }
      case 5: {  // null out a value
        auto q = text.find(": \"", pos);
        if (q == std::string::npos) q = text.find(":\"", pos);
        if (q != std::string::npos) {
          auto open = text.find('"', q);
          auto close = text.find('"', open + 1);
          if (close != std::string::npos) text.replace(open, close - open + 1, "null");
        }
        break;
      }
      default:  // wrap in prose
        text = "Sure! Here is the extraction:\n```json\n" + text + "\n```";
        break;
    }
  }
  return text;
}

// --- golden oracle -------------------------------------------------------------

std::vector<GoldenDoc> golden_design_from_json(const nlohmann::json& j) {
  std::vector<GoldenDoc> docs;
  for (const auto& d : j.at("documents")) {
    GoldenDoc doc{d.at("id"), d.at("fields"), d.at("tree_size"), {}};
    for (const auto& s : d.at("samples")) {
      GoldenSample g;
      g.kind = s.at("kind");
      g.prob = s.at("prob");
      g.level = *cascade_level_from_string(s.at("level").get<std::string>());
      g.tp = s.at("tp");
      g.predicted = s.at("predicted");
      g.ted = s.at("ted");
      g.valid = s.at("valid");
      g.exact = s.at("exact");
      doc.samples.push_back(g);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

nlohmann::json golden_design_to_json(const std::vector<GoldenDoc>& docs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : docs) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : d.samples) {
      samples.push_back({{"kind", s.kind}, {"prob", s.prob}, {"level", std::string(to_string(s.level))},
                         {"tp", s.tp}, {"predicted", s.predicted}, {"ted", s.ted}, {"valid", s.valid},
                         {"exact", s.exact}});
    }
    out.push_back({{"id", d.id}, {"fields", d.fields}, {"tree_size", d.tree_size}, {"samples", samples}});
  }
  return {{"documents", out}};
}

std::vector<FilterRow> golden_oracle_table(const std::vector<GoldenDoc>& docs) {
  // Minimum cascade outcome a candidate needs to represent a document per row;
  // the Base row takes any parsable candidate.
  const std::pair<FilterLevel, CascadeLevel> rows[] = {{FilterLevel::base, CascadeLevel::failed_task},
                                                       {FilterLevel::syntactic, CascadeLevel::failed_task},
                                                       {FilterLevel::task, CascadeLevel::failed_domain},
                                                       {FilterLevel::domain, CascadeLevel::passed}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<FilterRow> out;
  for (auto [filter, needed] : rows) {
    double tp = 0, pred = 0, expected = 0, nted_sum = 0, valid = 0, exact = 0, docs_in = 0;
    for (const auto& d : docs) {
      std::vector<std::size_t> order(d.samples.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return d.samples[a].prob > d.samples[b].prob; });
      const GoldenSample* rep = nullptr;
      for (std::size_t i : order) {
        if (d.samples[i].level >= needed) {
          rep = &d.samples[i];
          break;
        }
      }
      if (rep == nullptr && filter != FilterLevel::base) continue;
      docs_in += 1;
      expected += static_cast<double>(d.fields);
      if (rep == nullptr) {
        nted_sum += 1.0;  // empty prediction: delete nothing, insert the whole truth
        continue;
      }
      tp += static_cast<double>(rep->tp);
      pred += static_cast<double>(rep->predicted);
      nted_sum += static_cast<double>(rep->ted) / static_cast<double>(d.tree_size);
      valid += rep->valid;
      exact += rep->exact;
    }
    FilterRow r;
    r.filter = filter;
    r.remaining = static_cast<std::size_t>(docs_in);
    r.total = docs.size();
    r.pct_remaining = 100.0 * docs_in / static_cast<double>(docs.size());
    if (docs_in == 0) {
      r.f1 = r.nted = r.valid = r.doc_accuracy = nan;
    } else {
      r.f1 = pred + expected > 0 ? 100.0 * 2.0 * tp / (pred + expected) : 0.0;
      r.nted = 100.0 * nted_sum / docs_in;
      r.valid = 100.0 * valid / docs_in;
      r.doc_accuracy = 100.0 * exact / docs_in;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace testkit
