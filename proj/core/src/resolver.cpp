#include "docval/resolver.hpp"

#include <algorithm>

#include "docval/values.hpp"

namespace docval {
namespace {

// --- tree access -----------------------------------------------------------

ImplicitNode* node_at(ImplicitDocument& doc, const std::vector<std::size_t>& nodes) {
  ImplicitNode* n = &doc.root;
  for (std::size_t i : nodes) {
    if (i >= n->children.size()) return nullptr;
    n = &n->children[i];
  }
  return n;
}

const ImplicitNode* node_at(const ImplicitDocument& doc, const std::vector<std::size_t>& nodes) {
  return node_at(const_cast<ImplicitDocument&>(doc), nodes);
}

const Decimal* value_at(const ImplicitDocument& doc, const FieldPath& path) {
  const ImplicitNode* n = node_at(doc, path.nodes);
  if (n == nullptr) return nullptr;
  if (path.element) {
    auto it = n->lists.find(path.field);
    if (it == n->lists.end() || *path.element >= it->second.size()) return nullptr;
    const auto& e = it->second[*path.element];
    return e ? e->number() : nullptr;
  }
  auto it = n->scalars.find(path.field);
  return it == n->scalars.end() ? nullptr : it->second.number();
}

void store(ImplicitDocument& doc, const FieldPath& path, Decimal value) {
  ImplicitNode* n = node_at(doc, path.nodes);
  Leaf leaf{std::move(value), Provenance::inferred};
  if (path.element) {
    n->lists[path.field][*path.element] = std::move(leaf);
  } else {
    n->scalars.emplace(path.field, std::move(leaf));
  }
}

// --- equation instances ----------------------------------------------------

struct InstanceTerm {
  int sign = 1;
  Term::Op op = Term::Op::field;
  std::vector<FieldPath> slots;
};

struct Instance {
  const Equation* equation = nullptr;
  std::vector<std::size_t> nodes;
  FieldPath lhs;
  std::vector<InstanceTerm> terms;
  bool applicable = true;  // false when a SUM ranges over an empty item list
};

std::string instance_label(const std::vector<std::size_t>& nodes) {
  FieldPath p{nodes, "", std::nullopt};
  std::string s = p.to_string();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

void collect_nodes(const ImplicitNode& node, Level level, Level target, std::vector<std::size_t>& path,
                   std::vector<std::vector<std::size_t>>& out) {
  if (level == target) {
    out.push_back(path);
    return;
  }
  auto child = child_level(level);
  if (!child) return;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    path.push_back(i);
    collect_nodes(node.children[i], *child, target, path, out);
    path.pop_back();
  }
}

std::vector<Instance> instantiate(const ImplicitDocument& doc, const SchemaDef& schema) {
  std::vector<Instance> out;
  for (const Equation& eq : schema.equations()) {
    if (!eq.enabled) continue;
    std::vector<std::vector<std::size_t>> bindings;
    std::vector<std::size_t> scratch;
    collect_nodes(doc.root, Level::global, eq.binding(), scratch, bindings);
    for (const auto& nodes : bindings) {
      const ImplicitNode* node = node_at(doc, nodes);
      Instance inst;
      inst.equation = &eq;
      inst.nodes = nodes;
      inst.lhs = FieldPath{nodes, eq.lhs.field, std::nullopt};
      for (const Term& t : eq.terms) {
        InstanceTerm it;
        it.sign = t.sign;
        it.op = t.op;
        if (t.op == Term::Op::sum) {
          if (t.first.level == eq.binding()) {
            // SUM over an amount list of the same object; an empty list sums to zero.
            auto list = node->lists.find(t.first.field);
            std::size_t n = list == node->lists.end() ? 0 : list->second.size();
            for (std::size_t e = 0; e < n; ++e) it.slots.push_back(FieldPath{nodes, t.first.field, e});
          } else {
            if (node->children.empty()) inst.applicable = false;
            for (std::size_t c = 0; c < node->children.size(); ++c) {
              auto child_nodes = nodes;
              child_nodes.push_back(c);
              it.slots.push_back(FieldPath{std::move(child_nodes), t.first.field, std::nullopt});
            }
          }
        } else {
          it.slots.push_back(FieldPath{nodes, t.first.field, std::nullopt});
          if (t.op == Term::Op::product) it.slots.push_back(FieldPath{nodes, t.second->field, std::nullopt});
        }
        inst.terms.push_back(std::move(it));
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

// Value of a term when all its slots are present.
std::optional<Decimal> term_value(const ImplicitDocument& doc, const InstanceTerm& t) {
  Decimal acc = t.op == Term::Op::product ? Decimal(1) : Decimal(0);
  for (const auto& s : t.slots) {
    const Decimal* v = value_at(doc, s);
    if (v == nullptr) return std::nullopt;
    acc = t.op == Term::Op::product ? acc * *v : acc + *v;
  }
  return acc;
}

std::optional<Decimal> rhs_value(const ImplicitDocument& doc, const Instance& inst) {
  Decimal sum(0);
  for (const auto& t : inst.terms) {
    auto v = term_value(doc, t);
    if (!v) return std::nullopt;
    sum += t.sign < 0 ? -*v : *v;
  }
  return sum;
}

// Solves the instance for its single missing slot, if that is possible.
std::optional<std::pair<FieldPath, Decimal>> solve(const ImplicitDocument& doc, const Instance& inst) {
  if (!inst.applicable) return std::nullopt;
  std::vector<const FieldPath*> missing;
  auto note = [&](const FieldPath& p) {
    if (value_at(doc, p) != nullptr) return;
    for (const FieldPath* m : missing) {
      if (*m == p) return;
    }
    missing.push_back(&p);
  };
  note(inst.lhs);
  for (const auto& t : inst.terms) {
    for (const auto& s : t.slots) note(s);
  }
  if (missing.size() != 1) return std::nullopt;
  const FieldPath& target = *missing.front();

  if (target == inst.lhs) {
    auto v = rhs_value(doc, inst);
    if (!v) return std::nullopt;
    return std::make_pair(target, *v);
  }

  const Decimal& lhs = *value_at(doc, inst.lhs);
  for (std::size_t k = 0; k < inst.terms.size(); ++k) {
    const InstanceTerm& t = inst.terms[k];
    auto hit = std::find(t.slots.begin(), t.slots.end(), target);
    if (hit == t.slots.end()) continue;

    Decimal others(0);
    for (std::size_t j = 0; j < inst.terms.size(); ++j) {
      if (j == k) continue;
      Decimal v = *term_value(doc, inst.terms[j]);
      others += inst.terms[j].sign < 0 ? -v : v;
    }
    Decimal needed = lhs - others;  // == sign * term
    if (t.sign < 0) needed = -needed;

    switch (t.op) {
      case Term::Op::field:
        return std::make_pair(target, needed);
      case Term::Op::product: {
        const FieldPath& other = t.slots[0] == target ? t.slots[1] : t.slots[0];
        const Decimal& cofactor = *value_at(doc, other);
        if (cofactor.is_zero()) return std::nullopt;
        return std::make_pair(target, Decimal::divide(needed, cofactor, kDivisionScale).normalized());
      }
      case Term::Op::sum: {
        Decimal rest(0);
        for (const auto& s : t.slots) {
          if (s != target) rest += *value_at(doc, s);
        }
        return std::make_pair(target, needed - rest);
      }
    }
  }
  return std::nullopt;
}

void defaults_node(ImplicitNode& node, const SchemaDef& schema, Level level) {
  for (const FieldDef* f : schema.fields_at(level)) {
    if (!f->default_value || is_list_kind(f->kind)) continue;
    if (!node.scalars.contains(f->name)) {
      node.scalars.emplace(f->name, Leaf{*f->default_value, Provenance::defaulted});
    }
  }
  if (auto child = child_level(level)) {
    for (auto& c : node.children) defaults_node(c, schema, *child);
  }
}

}  // namespace

ImplicitDocument apply_defaults(ImplicitDocument doc, const SchemaDef& schema) {
  defaults_node(doc.root, schema, Level::global);
  return doc;
}

Resolved resolve(ImplicitDocument doc, const SchemaDef& schema) {
  Resolved out{std::move(doc), {}};
  // Item lists never change during resolution, so instances are fixed.
  std::vector<Instance> instances = instantiate(out.document, schema);
  // Each pass evaluates equations forward first and only then solves them
  // for an operand, so totals computed from details win over back-solving.
  for (int pass = 1;; ++pass) {
    bool changed = false;
    for (bool forward : {true, false}) {
      for (const Instance& inst : instances) {
        auto solved = solve(out.document, inst);
        if (!solved || (solved->first == inst.lhs) != forward) continue;
        store(out.document, solved->first, solved->second);
        out.trace.push_back({inst.equation->id, solved->first, solved->second, pass});
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

std::string_view to_string(EquationStatus s) {
  switch (s) {
    case EquationStatus::satisfied: return "satisfied";
    case EquationStatus::violated: return "violated";
    case EquationStatus::not_evaluable: return "not_evaluable";
  }
  return "?";
}

std::size_t ConstraintReport::count(EquationStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(equations.begin(), equations.end(), [s](const EquationCheck& e) { return e.status == s; }));
}

void ConstraintReport::finalize() {
  valid = count(EquationStatus::violated) == 0 &&
          std::all_of(rules.begin(), rules.end(), [](const RuleCheck& r) { return r.passed; });
}

ConstraintReport evaluate_constraints(const ImplicitDocument& doc, const SchemaDef& schema, const Decimal& rel_tol) {
  ConstraintReport report;
  for (const Instance& inst : instantiate(doc, schema)) {
    EquationCheck check;
    check.equation = inst.equation->id;
    check.instance = instance_label(inst.nodes);
    const Decimal* lhs = value_at(doc, inst.lhs);
    auto rhs = rhs_value(doc, inst);
    if (!inst.applicable) {
      check.detail = "aggregate over an empty item list";
    } else if (lhs == nullptr || !rhs) {
      check.detail = "missing operand";
    } else {
      check.lhs = *lhs;
      check.rhs = *rhs;
      check.residual = *lhs - *rhs;
      check.status = approx_equal(*lhs, *rhs, rel_tol) ? EquationStatus::satisfied : EquationStatus::violated;
    }
    report.equations.push_back(std::move(check));
  }

  for (const StructuralRule& rule : schema.rules()) {
    RuleCheck rc;
    rc.rule = rule.id;
    switch (rule.kind) {
      case StructuralRule::Kind::min_line_items: {
        std::size_t n = doc.root.children.size();
        rc.passed = n >= rule.min_count;
        if (!rc.passed) {
          rc.detail = std::to_string(n) + " line items, at least " + std::to_string(rule.min_count) + " required";
        }
        break;
      }
      case StructuralRule::Kind::required_one_of: {
        rc.passed = std::any_of(rule.fields.begin(), rule.fields.end(), [&](const std::string& name) {
          auto it = doc.root.scalars.find(name);
          return it != doc.root.scalars.end() && it->second.provenance == Provenance::extracted;
        });
        if (!rc.passed) {
          std::string names;
          for (const auto& n : rule.fields) names += (names.empty() ? "" : ", ") + n;
          rc.detail = "none of {" + names + "} was extracted";
        }
        break;
      }
      case StructuralRule::Kind::bounds: {
        std::vector<std::vector<std::size_t>> bindings;
        std::vector<std::size_t> scratch;
        collect_nodes(doc.root, Level::global, rule.target->level, scratch, bindings);
        for (const auto& nodes : bindings) {
          FieldPath p{nodes, rule.target->field, std::nullopt};
          const Decimal* v = value_at(doc, p);
          if (v == nullptr) continue;
          bool ok = (!rule.lower || *v >= *rule.lower) && (!rule.upper || *v <= *rule.upper);
          if (!ok) {
            rc.passed = false;
            rc.detail = p.to_string() + " = " + v->to_string() + " out of bounds";
            break;
          }
        }
        break;
      }
    }
    report.rules.push_back(std::move(rc));
  }
  report.finalize();
  return report;
}

nlohmann::json trace_to_json(const ResolutionTrace& trace) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : trace) {
    out.push_back({{"equation", s.equation},
                   {"field", s.target.to_string()},
                   {"value", s.value.canonical()},
                   {"iteration", s.iteration}});
  }
  return out;
}

nlohmann::json report_to_json(const ConstraintReport& report) {
  nlohmann::json eqs = nlohmann::json::array();
  for (const auto& e : report.equations) {
    nlohmann::json j{{"equation", e.equation}, {"instance", e.instance}, {"status", to_string(e.status)}};
    if (e.lhs) j["lhs"] = e.lhs->canonical();
    if (e.rhs) j["rhs"] = e.rhs->canonical();
    if (e.residual) j["residual"] = e.residual->canonical();
    if (!e.detail.empty()) j["detail"] = e.detail;
    eqs.push_back(std::move(j));
  }
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : report.rules) {
    nlohmann::json j{{"rule", r.rule}, {"passed", r.passed}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    rules.push_back(std::move(j));
  }
  return {{"valid", report.valid}, {"equations", std::move(eqs)}, {"rules", std::move(rules)}};
}

}  // namespace docval
