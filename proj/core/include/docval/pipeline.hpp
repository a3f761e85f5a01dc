#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/backend.hpp"
#include "docval/decimal.hpp"
#include "docval/document.hpp"
#include "docval/metrics.hpp"
#include "docval/schema.hpp"
#include "docval/validation.hpp"

namespace docval {

/// Input data is malformed or inconsistent (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetRecord {
  std::string id;
  std::string ocr_text;
  std::optional<std::string> image_path;
  std::optional<ExplicitDocument> ground_truth;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<DatasetRecord> records);

  const std::vector<DatasetRecord>& records() const { return records_; }
  const DatasetRecord* find(const std::string& id) const;
  /// Position of `id` in dataset order; throws DataError for unknown ids.
  std::size_t position(const std::string& id) const;

 private:
  std::vector<DatasetRecord> records_;
  std::map<std::string, std::size_t> index_;
};

/// JSONL, one record per line:
///   {"id", "ocr_text" | "ocr_words": [...], "image_path"?, "ground_truth"?}
/// Word lists are joined with single spaces. Ground truth must match the
/// explicit-output shape of `schema`.
Dataset load_dataset(const std::filesystem::path& path, const SchemaDef& schema);

struct RunConfig {
  double temperature = 0.0;
  std::size_t n_samples = 1;
  std::size_t max_tokens = 2048;
  std::optional<std::uint64_t> seed;
  Decimal rel_tol = Decimal(5, 3);  // 0.5 %
  std::size_t concurrency = 4;
  MeanKind mean = MeanKind::arithmetic;
  bool include_image = false;
  PromptOptions prompt;
};

// --- record files ---------------------------------------------------------------

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
/// Writes atomically (temporary file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string to_jsonl(const std::vector<nlohmann::json>& records);

std::vector<Candidate> read_candidates(const std::filesystem::path& path);

struct VerdictRecord {
  std::string doc_id;
  std::size_t sample_index = 0;
  CascadeLevel level = CascadeLevel::failed_syntactic;
  std::optional<double> mean_token_prob;
};
std::vector<VerdictRecord> read_verdicts(const std::filesystem::path& path);

// --- commands -------------------------------------------------------------------

struct ExtractSummary {
  std::size_t generated = 0;   // new candidate records
  std::size_t skipped = 0;     // documents already complete (resume)
  std::size_t failed = 0;      // documents whose generation failed
};

/// Generates n_samples candidates per document. Existing complete documents
/// in `candidates_file` are kept; the file is rewritten in dataset order.
/// Per-document backend failures go to `errors_file` and do not abort.
ExtractSummary cmd_extract(const Dataset& dataset, const SchemaDef& schema, Backend& backend, const RunConfig& config,
                           const std::filesystem::path& candidates_file, const std::filesystem::path& errors_file);

struct ValidateSummary {
  std::size_t documents = 0;
  std::map<FilterLevel, std::size_t> surviving;  // documents with >= 1 candidate surviving each filter
};

/// Runs the cascade on every candidate and writes one verdict per line; the
/// ids of documents surviving `level` go to `survivors_file`.
ValidateSummary cmd_validate(const std::vector<Candidate>& candidates, const Dataset& dataset, const SchemaDef& schema,
                             const RunConfig& config, FilterLevel level, const std::filesystem::path& verdicts_file,
                             const std::filesystem::path& survivors_file);

struct Selection {
  std::string doc_id;
  std::size_t sample_index = 0;
  std::optional<double> mean_token_prob;
  std::string raw_text;
};

/// Best fully-passing candidate per document, in dataset order.
std::vector<Selection> select_candidates(const std::vector<Candidate>& candidates,
                                         const std::vector<VerdictRecord>& verdicts, const Dataset& dataset,
                                         MeanKind mean);
std::vector<Selection> cmd_select(const std::vector<Candidate>& candidates, const std::vector<VerdictRecord>& verdicts,
                                  const Dataset& dataset, const RunConfig& config,
                                  const std::filesystem::path& selection_file);

struct EvaluateOutputs {
  std::filesystem::path text, csv, json, per_document;
};

/// Scores every document against its ground truth and writes the filter table
/// (text, CSV, JSON) plus per-document scores.
FilterTable cmd_evaluate(const std::vector<Candidate>& candidates, const std::vector<VerdictRecord>& verdicts,
                         const Dataset& dataset, const SchemaDef& schema, const RunConfig& config,
                         const EvaluateOutputs& outputs);

enum class DistillSubset { base, domain };

struct DistillRecord {
  std::string doc_id;
  std::size_t sample_index = 0;
  std::string prompt;
  std::string completion;
  CascadeLevel level = CascadeLevel::failed_syntactic;
  std::optional<double> mean_token_prob;

  nlohmann::json to_json() const;
};

/// Prompt/completion pairs for fine-tuning. `domain`: the selected fully
/// passing candidate of each document; `base`: the best parsable candidate.
std::vector<DistillRecord> cmd_distill(const std::vector<Candidate>& candidates,
                                       const std::vector<VerdictRecord>& verdicts, const Dataset& dataset,
                                       const SchemaDef& schema, const RunConfig& config, DistillSubset subset,
                                       const std::filesystem::path& distill_file);

/// Resolves one explicit document: {"resolved", "trace", "report"}.
/// Throws DataError when the input does not have the explicit-output shape.
nlohmann::json cmd_resolve(const std::string& document_text, const SchemaDef& schema, const Decimal& rel_tol);

}  // namespace docval
