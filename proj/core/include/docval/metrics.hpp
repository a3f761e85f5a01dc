#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/document.hpp"
#include "docval/schema.hpp"
#include "docval/validation.hpp"

namespace docval {

// --- field-level F1 -----------------------------------------------------------

/// Multiset of (key path without list indices, canonical value).
using FieldBag = std::map<std::pair<std::string, std::string>, std::size_t>;

FieldBag flatten(const ImplicitDocument& doc, const SchemaDef& schema);
std::size_t bag_size(const FieldBag& bag);
std::size_t bag_intersection(const FieldBag& a, const FieldBag& b);

struct F1Score {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t expected = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct BagPair {
  FieldBag prediction;
  FieldBag truth;
};

/// Micro-averaged over the whole set: counts are summed before dividing.
/// A ratio with a zero denominator is 0.
F1Score micro_f1(std::span<const BagPair> pairs);

// --- tree edit distance -------------------------------------------------------

struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Ordered forest. Top-level keys are the roots, so a document with no
/// values is the empty forest.
using DocTree = std::vector<TreeNode>;

/// Keys become internal nodes in schema order, list elements ordered
/// children ("<item>" for objects), values leaves.
DocTree to_tree(const ImplicitDocument& doc, const SchemaDef& schema);
std::size_t tree_size(const DocTree& tree);

/// Zhang-Shasha ordered edit distance, unit insert/delete/relabel costs.
std::size_t ted(const DocTree& a, const DocTree& b);

/// ted(pred, truth) / ted(empty, truth). Throws std::domain_error when truth is empty.
double nted(const DocTree& prediction, const DocTree& truth);

/// Percentage of pairs whose trees are identical.
double doc_accuracy(std::span<const std::pair<DocTree, DocTree>> pairs);

// --- filter table -------------------------------------------------------------

/// One candidate of a document, already scored against the ground truth.
struct ScoredCandidate {
  std::size_t sample_index = 0;
  CascadeLevel level = CascadeLevel::failed_syntactic;
  FieldBag bag;      // empty when unparsable
  DocTree tree;      // empty when unparsable
  bool valid = false;  // domain constraints hold (independent of the task stage)
};

struct DocumentScores {
  std::string id;
  FieldBag truth_bag;
  DocTree truth_tree;
  /// Preference order: the first candidate that reaches a row's level
  /// represents the document in that row.
  std::vector<ScoredCandidate> candidates;
};

enum class FilterLevel { base, syntactic, task, domain };
std::string_view to_string(FilterLevel level);
/// Whether a candidate with cascade outcome `reached` survives `filter`.
bool survives(CascadeLevel reached, FilterLevel filter);

struct DocumentRowScore {
  std::string id;
  FilterLevel filter = FilterLevel::base;
  std::optional<std::size_t> sample_index;  // nullopt: scored as an empty prediction
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t expected = 0;
  double nted = 0.0;
  bool valid = false;
  bool exact = false;
};

struct FilterRow {
  FilterLevel filter = FilterLevel::base;
  std::size_t remaining = 0;
  std::size_t total = 0;
  double pct_remaining = 0.0;
  double f1 = 0.0;        // x100
  double nted = 0.0;      // x100, lower is better
  double valid = 0.0;     // %
  double doc_accuracy = 0.0;  // %
};

struct FilterTable {
  std::vector<FilterRow> rows;
  std::vector<DocumentRowScore> documents;

  std::string to_text() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Base, Syntactic, Task and Domain rows; each computed only over the
/// documents surviving that filter. Documents with no parsable candidate are
/// scored as empty predictions in the Base row.
FilterTable filter_table(std::span<const DocumentScores> documents);

}  // namespace docval
