#include "docval/document.hpp"

namespace docval {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::extracted: return "extracted";
    case Provenance::defaulted: return "defaulted";
    case Provenance::inferred: return "inferred";
  }
  return "?";
}

std::string Leaf::canonical() const {
  if (const Decimal* d = number()) return d->canonical();
  return *text();
}

std::string FieldPath::to_string() const {
  std::string out;
  if (!nodes.empty()) out += std::string(kLineItemsKey) + "[" + std::to_string(nodes[0]) + "].";
  if (nodes.size() > 1) out += std::string(kSubItemsKey) + "[" + std::to_string(nodes[1]) + "].";
  out += field;
  if (element) out += "[" + std::to_string(*element) + "]";
  return out;
}

namespace {

ExplicitNode empty_node(const SchemaDef& schema, Level level) {
  ExplicitNode node;
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      node.lists[f->name] = {};
    } else {
      node.scalars[f->name] = std::nullopt;
    }
  }
  return node;
}

nlohmann::json explicit_node_json(const ExplicitNode& node, const SchemaDef& schema, Level level) {
  nlohmann::json out = nlohmann::json::object();
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      auto it = node.lists.find(f->name);
      out[f->name] = it == node.lists.end() ? nlohmann::json::array() : nlohmann::json(it->second);
    } else {
      auto it = node.scalars.find(f->name);
      if (it != node.scalars.end() && it->second) {
        out[f->name] = *it->second;
      } else {
        out[f->name] = nullptr;
      }
    }
  }
  auto child = child_level(level);
  if (child && schema.has_level(*child)) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : node.children) items.push_back(explicit_node_json(c, schema, *child));
    out[std::string(child_list_key(level))] = std::move(items);
  }
  return out;
}

nlohmann::json leaf_json(const Leaf& leaf) {
  if (const Decimal* d = leaf.number()) return d->canonical();
  return *leaf.text();
}

nlohmann::json implicit_node_json(const ImplicitNode& node, const SchemaDef& schema, Level level) {
  nlohmann::json out = nlohmann::json::object();
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      nlohmann::json arr = nlohmann::json::array();
      auto it = node.lists.find(f->name);
      if (it != node.lists.end()) {
        for (const auto& e : it->second) arr.push_back(e ? leaf_json(*e) : nlohmann::json(nullptr));
      }
      out[f->name] = std::move(arr);
    } else {
      auto it = node.scalars.find(f->name);
      out[f->name] = it == node.scalars.end() ? nlohmann::json(nullptr) : leaf_json(it->second);
    }
  }
  auto child = child_level(level);
  if (child && schema.has_level(*child)) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : node.children) items.push_back(implicit_node_json(c, schema, *child));
    out[std::string(child_list_key(level))] = std::move(items);
  }
  return out;
}

bool same_leaf(const Leaf& a, const Leaf& b) {
  if (a.number() && b.number()) return *a.number() == *b.number();
  if (a.text() && b.text()) return *a.text() == *b.text();
  return false;
}

bool same_node(const ImplicitNode& a, const ImplicitNode& b) {
  if (a.scalars.size() != b.scalars.size() || a.children.size() != b.children.size()) return false;
  for (const auto& [name, leaf] : a.scalars) {
    auto it = b.scalars.find(name);
    if (it == b.scalars.end() || !same_leaf(leaf, it->second)) return false;
  }
  // Lists compare element-wise; a missing list equals an empty one.
  auto list_of = [](const ImplicitNode& n, const std::string& name) -> const std::vector<std::optional<Leaf>>* {
    auto it = n.lists.find(name);
    return it == n.lists.end() ? nullptr : &it->second;
  };
  auto compare_lists = [&](const ImplicitNode& x, const ImplicitNode& y) {
    for (const auto& [name, elems] : x.lists) {
      const auto* other = list_of(y, name);
      std::size_t n_other = other ? other->size() : 0;
      if (elems.size() != n_other) return false;
      for (std::size_t i = 0; i < elems.size(); ++i) {
        const auto& e = elems[i];
        const auto& o = (*other)[i];
        if (e.has_value() != o.has_value()) return false;
        if (e && !same_leaf(*e, *o)) return false;
      }
    }
    return true;
  };
  if (!compare_lists(a, b) || !compare_lists(b, a)) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!same_node(a.children[i], b.children[i])) return false;
  }
  return true;
}

}  // namespace

ExplicitDocument empty_explicit(const SchemaDef& schema) { return {empty_node(schema, Level::global)}; }

nlohmann::json explicit_to_json(const ExplicitDocument& doc, const SchemaDef& schema) {
  return explicit_node_json(doc.root, schema, Level::global);
}

nlohmann::json implicit_to_json(const ImplicitDocument& doc, const SchemaDef& schema) {
  nlohmann::json provenance = nlohmann::json::object();
  for_each_leaf(doc, schema, [&](const FieldPath& path, const FieldDef&, const Leaf& leaf) {
    provenance[path.to_string()] = to_string(leaf.provenance);
  });
  return {{"values", implicit_node_json(doc.root, schema, Level::global)}, {"provenance", std::move(provenance)}};
}

bool same_values(const ImplicitDocument& a, const ImplicitDocument& b) { return same_node(a.root, b.root); }

}  // namespace docval
