#include "docval/validation.hpp"

#include <set>

namespace docval {

std::string_view to_string(CascadeLevel level) {
  switch (level) {
    case CascadeLevel::failed_syntactic: return "failed_syntactic";
    case CascadeLevel::failed_task: return "failed_task";
    case CascadeLevel::failed_domain: return "failed_domain";
    case CascadeLevel::passed: return "passed";
  }
  return "?";
}

std::optional<CascadeLevel> cascade_level_from_string(std::string_view text) {
  for (CascadeLevel l : {CascadeLevel::failed_syntactic, CascadeLevel::failed_task, CascadeLevel::failed_domain,
                         CascadeLevel::passed}) {
    if (to_string(l) == text) return l;
  }
  return std::nullopt;
}

nlohmann::json Diagnostic::to_json() const {
  nlohmann::json j{{"stage", stage}, {"code", code}, {"message", message}};
  if (!path.empty()) j["path"] = path;
  return j;
}

std::optional<std::string> extract_json_block(std::string_view raw) {
  std::size_t open = raw.find('{');
  std::size_t close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  return std::string(raw.substr(open, close - open + 1));
}

namespace {

class ShapeChecker {
 public:
  explicit ShapeChecker(const SchemaDef& schema) : schema_(schema) {}

  SyntacticResult run(const nlohmann::json& value) {
    SyntacticResult out;
    ExplicitNode root = node(value, Level::global, "");
    out.errors = std::move(errors_);
    out.warnings = std::move(warnings_);
    if (out.errors.empty()) out.document = ExplicitDocument{std::move(root)};
    return out;
  }

 private:
  void error(const std::string& code, const std::string& path, const std::string& message) {
    errors_.push_back({"syntactic", code, path, message});
  }

  static std::string join(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
  }

  ExplicitNode node(const nlohmann::json& value, Level level, const std::string& path) {
    ExplicitNode out;
    if (!value.is_object()) {
      error("wrong_type", path, "expected an object");
      return out;
    }
    std::set<std::string> known;
    for (const FieldDef* f : schema_.fields_at(level)) {
      known.insert(f->name);
      std::string p = join(path, f->name);
      auto it = value.find(f->name);
      if (it == value.end()) {
        error("missing_key", p, "key '" + f->name + "' is missing; absent values must be null");
        continue;
      }
      if (is_list_kind(f->kind)) {
        if (!it->is_array()) {
          error("wrong_type", p, "expected a list of strings (use [] when empty)");
          continue;
        }
        std::vector<std::string> items;
        for (std::size_t i = 0; i < it->size(); ++i) {
          const auto& e = (*it)[i];
          if (!e.is_string()) {
            error("wrong_type", p + "[" + std::to_string(i) + "]", "list elements must be strings");
            continue;
          }
          items.push_back(e.get<std::string>());
        }
        out.lists[f->name] = std::move(items);
      } else if (it->is_null()) {
        out.scalars[f->name] = std::nullopt;
      } else if (it->is_string()) {
        out.scalars[f->name] = it->get<std::string>();
      } else {
        error("wrong_type", p, "expected a string or null");
      }
    }
    auto child = child_level(level);
    if (child && schema_.has_level(*child)) {
      std::string key(child_list_key(level));
      known.insert(key);
      std::string p = join(path, key);
      auto it = value.find(key);
      if (it == value.end()) {
        error("missing_key", p, "key '" + key + "' is missing; use [] when there are none");
      } else if (!it->is_array()) {
        error("wrong_type", p, "expected a list of objects (use [] when empty)");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          out.children.push_back(node((*it)[i], *child, p + "[" + std::to_string(i) + "]"));
        }
      }
    }
    for (const auto& [key, _] : value.items()) {
      if (!known.contains(key)) {
        warnings_.push_back({"syntactic", "extra_key", join(path, key), "unknown key dropped"});
      }
    }
    return out;
  }

  const SchemaDef& schema_;
  std::vector<Diagnostic> errors_;
  std::vector<Diagnostic> warnings_;
};

void collect_strings(const ExplicitNode& node, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [name, value] : node.scalars) {
    if (value) out.emplace_back(path + name, *value);
  }
  for (const auto& [name, values] : node.lists) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.emplace_back(path + name + "[" + std::to_string(i) + "]", values[i]);
    }
  }
  // Children are line items of the global node and sub items of a line item.
  const std::string_view key = path.empty() ? kLineItemsKey : kSubItemsKey;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    collect_strings(node.children[i], path + std::string(key) + "[" + std::to_string(i) + "].", out);
  }
}

}  // namespace

SyntacticResult explicit_from_json(const nlohmann::json& value, const SchemaDef& schema) {
  return ShapeChecker(schema).run(value);
}

SyntacticResult syntactic_validate(std::string_view raw, const SchemaDef& schema) {
  auto block = extract_json_block(raw);
  if (!block) {
    SyntacticResult r;
    r.errors.push_back({"syntactic", "no_json", "", "no '{' ... '}' block in the output"});
    return r;
  }
  nlohmann::json parsed = nlohmann::json::parse(*block, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    SyntacticResult r;
    r.errors.push_back({"syntactic", "invalid_json", "", "output block is not valid JSON"});
    return r;
  }
  return explicit_from_json(parsed, schema);
}

TaskResult task_validate(const ExplicitDocument& doc, std::string_view ocr_text) {
  TaskResult out;
  std::vector<std::pair<std::string, std::string>> values;
  collect_strings(doc.root, "", values);
  for (const auto& [path, value] : values) {
    if (ocr_text.find(value) == std::string_view::npos) {
      out.passed = false;
      out.misses.push_back({"task", "not_verbatim", path, "value '" + value + "' does not occur in the OCR text"});
    }
  }
  return out;
}

DomainResult domain_validate(const ExplicitDocument& doc, const SchemaDef& schema, const Decimal& rel_tol) {
  Materialized m = materialize(doc, schema);
  Resolved r = resolve(apply_defaults(std::move(m.document), schema), schema);
  DomainResult out;
  out.report = evaluate_constraints(r.document, schema, rel_tol);
  for (const auto& e : m.errors) {
    EquationCheck check;
    check.equation = "parse";
    check.instance = e.path.to_string();
    check.status = EquationStatus::violated;
    check.detail = "'" + e.raw + "': " + e.reason;
    out.report.equations.push_back(std::move(check));
  }
  out.report.finalize();
  out.resolved = std::move(r.document);
  out.trace = std::move(r.trace);
  out.coercion_errors = std::move(m.errors);
  return out;
}

CascadeVerdict run_cascade(std::string_view raw, std::string_view ocr_text, const SchemaDef& schema,
                           const Decimal& rel_tol) {
  CascadeVerdict v;
  SyntacticResult syn = syntactic_validate(raw, schema);
  v.warnings = std::move(syn.warnings);
  if (!syn.ok()) {
    v.level = CascadeLevel::failed_syntactic;
    v.reasons = std::move(syn.errors);
    return v;
  }
  v.document = std::move(syn.document);

  TaskResult task = task_validate(*v.document, ocr_text);
  if (!task.passed) {
    v.level = CascadeLevel::failed_task;
    v.reasons = std::move(task.misses);
    return v;
  }

  v.domain = domain_validate(*v.document, schema, rel_tol);
  if (!v.domain->report.valid) {
    v.level = CascadeLevel::failed_domain;
    for (const auto& e : v.domain->report.equations) {
      if (e.status != EquationStatus::violated) continue;
      std::string where = e.instance.empty() ? e.equation : e.equation + " @ " + e.instance;
      std::string msg = e.detail;
      if (e.residual) msg = "lhs " + e.lhs->canonical() + " != rhs " + e.rhs->canonical();
      v.reasons.push_back({"domain", e.equation == "parse" ? "unparsable" : "violated", where, msg});
    }
    for (const auto& r : v.domain->report.rules) {
      if (!r.passed) v.reasons.push_back({"domain", "rule_failed", r.rule, r.detail});
    }
    return v;
  }
  v.level = CascadeLevel::passed;
  return v;
}

}  // namespace docval
