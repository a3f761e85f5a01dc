#include "docval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace docval {

// --- field-level F1 -----------------------------------------------------------

namespace {

std::string key_path(const FieldPath& path) {
  std::string key;
  if (!path.nodes.empty()) key += std::string(kLineItemsKey) + ".";
  if (path.nodes.size() > 1) key += std::string(kSubItemsKey) + ".";
  return key + path.field;
}

}  // namespace

FieldBag flatten(const ImplicitDocument& doc, const SchemaDef& schema) {
  FieldBag bag;
  for_each_leaf(doc, schema, [&](const FieldPath& path, const FieldDef&, const Leaf& leaf) {
    ++bag[{key_path(path), leaf.canonical()}];
  });
  return bag;
}

std::size_t bag_size(const FieldBag& bag) {
  std::size_t n = 0;
  for (const auto& [_, count] : bag) n += count;
  return n;
}

std::size_t bag_intersection(const FieldBag& a, const FieldBag& b) {
  std::size_t n = 0;
  for (const auto& [key, count] : a) {
    auto it = b.find(key);
    if (it != b.end()) n += std::min(count, it->second);
  }
  return n;
}

F1Score micro_f1(std::span<const BagPair> pairs) {
  F1Score s;
  for (const auto& p : pairs) {
    s.true_positives += bag_intersection(p.prediction, p.truth);
    s.predicted += bag_size(p.prediction);
    s.expected += bag_size(p.truth);
  }
  auto tp = static_cast<double>(s.true_positives);
  s.precision = s.predicted == 0 ? 0.0 : tp / static_cast<double>(s.predicted);
  s.recall = s.expected == 0 ? 0.0 : tp / static_cast<double>(s.expected);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// --- tree edit distance -------------------------------------------------------

namespace {

TreeNode leaf_node(const Leaf& leaf) { return TreeNode{leaf.canonical(), {}}; }

std::vector<TreeNode> object_nodes(const ImplicitNode& node, const SchemaDef& schema, Level level) {
  std::vector<TreeNode> out;
  for (const FieldDef* f : schema.fields_at(level)) {
    if (is_list_kind(f->kind)) {
      auto it = node.lists.find(f->name);
      if (it == node.lists.end()) continue;
      TreeNode key{f->name, {}};
      for (const auto& e : it->second) {
        if (e) key.children.push_back(leaf_node(*e));
      }
      if (!key.children.empty()) out.push_back(std::move(key));
    } else {
      auto it = node.scalars.find(f->name);
      if (it != node.scalars.end()) out.push_back(TreeNode{f->name, {leaf_node(it->second)}});
    }
  }
  auto child = child_level(level);
  if (child && !node.children.empty()) {
    TreeNode key{std::string(child_list_key(level)), {}};
    for (const auto& c : node.children) key.children.push_back(TreeNode{"<item>", object_nodes(c, schema, *child)});
    out.push_back(std::move(key));
  }
  return out;
}

std::size_t count_nodes(const TreeNode& n) {
  std::size_t s = 1;
  for (const auto& c : n.children) s += count_nodes(c);
  return s;
}

// Post-order arrays of a tree, 1-based as in the Zhang-Shasha formulation.
struct Flat {
  std::vector<const std::string*> label{nullptr};
  std::vector<std::size_t> lmd{0};  // leftmost leaf descendant
  std::vector<std::size_t> keyroots;

  std::size_t visit(const TreeNode& n) {
    std::size_t leftmost = 0;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      std::size_t first = visit(n.children[i]);
      if (i == 0) leftmost = first;
    }
    label.push_back(&n.label);
    std::size_t self = label.size() - 1;
    lmd.push_back(n.children.empty() ? self : leftmost);
    return lmd[self];
  }

  explicit Flat(const TreeNode& root) {
    visit(root);
    // A keyroot is the highest node for each distinct leftmost leaf.
    std::vector<bool> seen(label.size(), false);
    for (std::size_t i = label.size() - 1; i >= 1; --i) {
      if (!seen[lmd[i]]) {
        seen[lmd[i]] = true;
        keyroots.push_back(i);
      }
    }
    std::sort(keyroots.begin(), keyroots.end());
  }

  std::size_t size() const { return label.size() - 1; }
};

std::size_t zhang_shasha(const TreeNode& a, const TreeNode& b) {
  Flat t1(a);
  Flat t2(b);
  const std::size_t n = t1.size();
  const std::size_t m = t2.size();
  std::vector<std::vector<std::size_t>> td(n + 1, std::vector<std::size_t>(m + 1, 0));
  std::vector<std::vector<std::size_t>> fd(n + 2, std::vector<std::size_t>(m + 2, 0));

  for (std::size_t i : t1.keyroots) {
    for (std::size_t j : t2.keyroots) {
      const std::size_t li = t1.lmd[i];
      const std::size_t lj = t2.lmd[j];
      // fd indices are offset so that index (li - 1) maps to 0.
      auto F = [&](std::size_t x, std::size_t y) -> std::size_t& { return fd[x - li + 1][y - lj + 1]; };
      F(li - 1, lj - 1) = 0;
      for (std::size_t x = li; x <= i; ++x) F(x, lj - 1) = F(x - 1, lj - 1) + 1;
      for (std::size_t y = lj; y <= j; ++y) F(li - 1, y) = F(li - 1, y - 1) + 1;
      for (std::size_t x = li; x <= i; ++x) {
        for (std::size_t y = lj; y <= j; ++y) {
          std::size_t del = F(x - 1, y) + 1;
          std::size_t ins = F(x, y - 1) + 1;
          if (t1.lmd[x] == li && t2.lmd[y] == lj) {
            std::size_t rel = F(x - 1, y - 1) + (*t1.label[x] == *t2.label[y] ? 0 : 1);
            F(x, y) = std::min({del, ins, rel});
            td[x][y] = F(x, y);
          } else {
            std::size_t sub = F(t1.lmd[x] - 1, t2.lmd[y] - 1) + td[x][y];
            F(x, y) = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  return td[n][m];
}

}  // namespace

DocTree to_tree(const ImplicitDocument& doc, const SchemaDef& schema) {
  return object_nodes(doc.root, schema, Level::global);
}

std::size_t tree_size(const DocTree& tree) {
  std::size_t s = 0;
  for (const auto& n : tree) s += count_nodes(n);
  return s;
}

std::size_t ted(const DocTree& a, const DocTree& b) {
  if (a.empty()) return tree_size(b);
  if (b.empty()) return tree_size(a);
  // A shared virtual root turns the forest distance into a tree distance.
  return zhang_shasha(TreeNode{"", a}, TreeNode{"", b});
}

double nted(const DocTree& prediction, const DocTree& truth) {
  if (truth.empty()) throw std::domain_error("nted: ground-truth tree is empty");
  return static_cast<double>(ted(prediction, truth)) / static_cast<double>(tree_size(truth));
}

double doc_accuracy(std::span<const std::pair<DocTree, DocTree>> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t exact = 0;
  for (const auto& [p, t] : pairs) exact += p == t ? 1 : 0;
  return 100.0 * static_cast<double>(exact) / static_cast<double>(pairs.size());
}

// --- filter table -------------------------------------------------------------

std::string_view to_string(FilterLevel level) {
  switch (level) {
    case FilterLevel::base: return "Base";
    case FilterLevel::syntactic: return "Syntactic";
    case FilterLevel::task: return "Task";
    case FilterLevel::domain: return "Domain";
  }
  return "?";
}

bool survives(CascadeLevel reached, FilterLevel filter) {
  switch (filter) {
    case FilterLevel::base: return true;
    case FilterLevel::syntactic: return reached >= CascadeLevel::failed_task;
    case FilterLevel::task: return reached >= CascadeLevel::failed_domain;
    case FilterLevel::domain: return reached == CascadeLevel::passed;
  }
  return false;
}

FilterTable filter_table(std::span<const DocumentScores> documents) {
  FilterTable table;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (FilterLevel filter : {FilterLevel::base, FilterLevel::syntactic, FilterLevel::task, FilterLevel::domain}) {
    FilterRow row;
    row.filter = filter;
    row.total = documents.size();
    std::vector<BagPair> bags;
    double nted_sum = 0.0;
    std::size_t valid = 0;
    std::size_t exact = 0;
    for (const auto& doc : documents) {
      // The Base row scores the best parsable candidate, if any.
      FilterLevel needed = filter == FilterLevel::base ? FilterLevel::syntactic : filter;
      const ScoredCandidate* rep = nullptr;
      for (const auto& c : doc.candidates) {
        if (survives(c.level, needed)) {
          rep = &c;
          break;
        }
      }
      if (rep == nullptr && filter != FilterLevel::base) continue;

      static const ScoredCandidate kEmpty{};
      const ScoredCandidate& pred = rep ? *rep : kEmpty;
      DocumentRowScore s;
      s.id = doc.id;
      s.filter = filter;
      if (rep) s.sample_index = rep->sample_index;
      s.true_positives = bag_intersection(pred.bag, doc.truth_bag);
      s.predicted = bag_size(pred.bag);
      s.expected = bag_size(doc.truth_bag);
      s.nted = nted(pred.tree, doc.truth_tree);
      s.valid = rep != nullptr && pred.valid;
      s.exact = rep != nullptr && pred.tree == doc.truth_tree;

      bags.push_back({pred.bag, doc.truth_bag});
      nted_sum += s.nted;
      valid += s.valid ? 1 : 0;
      exact += s.exact ? 1 : 0;
      ++row.remaining;
      table.documents.push_back(std::move(s));
    }
    row.pct_remaining = row.total == 0 ? nan : 100.0 * static_cast<double>(row.remaining) / static_cast<double>(row.total);
    if (row.remaining == 0) {
      row.f1 = row.nted = row.valid = row.doc_accuracy = nan;
    } else {
      const double n = static_cast<double>(row.remaining);
      row.f1 = 100.0 * micro_f1(bags).f1;
      row.nted = 100.0 * nted_sum / n;
      row.valid = 100.0 * static_cast<double>(valid) / n;
      row.doc_accuracy = 100.0 * static_cast<double>(exact) / n;
    }
    table.rows.push_back(row);
  }
  return table;
}

namespace {

std::string fixed1(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

}  // namespace

std::string FilterTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Filter" << std::right << std::setw(13) << "% Remaining" << std::setw(8) << "F1"
     << std::setw(8) << "nTED" << std::setw(8) << "Valid" << std::setw(11) << "Doc. Acc." << '\n';
  for (const auto& r : rows) {
    std::string name = r.filter == FilterLevel::base ? "Base" : " - " + std::string(to_string(r.filter));
    os << std::left << std::setw(12) << name << std::right << std::setw(13) << fixed1(r.pct_remaining)
       << std::setw(8) << fixed1(r.f1) << std::setw(8) << fixed1(r.nted) << std::setw(8) << fixed1(r.valid)
       << std::setw(11) << fixed1(r.doc_accuracy) << '\n';
  }
  return os.str();
}

std::string FilterTable::to_csv() const {
  std::ostringstream os;
  os << "filter,remaining,total,pct_remaining,f1,nted,valid,doc_accuracy\n";
  for (const auto& r : rows) {
    os << to_string(r.filter) << ',' << r.remaining << ',' << r.total << ',' << fixed1(r.pct_remaining) << ','
       << fixed1(r.f1) << ',' << fixed1(r.nted) << ',' << fixed1(r.valid) << ',' << fixed1(r.doc_accuracy) << '\n';
  }
  return os.str();
}

nlohmann::json FilterTable::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"filter", to_string(r.filter)},
                   {"remaining", r.remaining},
                   {"total", r.total},
                   {"pct_remaining", num(r.pct_remaining)},
                   {"f1", num(r.f1)},
                   {"nted", num(r.nted)},
                   {"valid", num(r.valid)},
                   {"doc_accuracy", num(r.doc_accuracy)}});
  }
  return {{"rows", std::move(out)}};
}

}  // namespace docval
