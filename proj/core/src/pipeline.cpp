#include "docval/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include <spdlog/spdlog.h>

#include "parallel.hpp"

namespace docval {

namespace fs = std::filesystem;

// --- dataset --------------------------------------------------------------------

Dataset::Dataset(std::vector<DatasetRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.id.empty()) throw DataError("dataset record " + std::to_string(i) + " has an empty id");
    if (r.ocr_text.empty()) throw DataError("dataset record '" + r.id + "' has empty OCR text");
    if (!index_.emplace(r.id, i).second) throw DataError("duplicate dataset id '" + r.id + "'");
  }
}

const DatasetRecord* Dataset::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::size_t Dataset::position(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown document id '" + id + "'");
  return it->second;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
    out.push_back(std::move(j));
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string to_jsonl(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

Dataset load_dataset(const fs::path& path, const SchemaDef& schema) {
  std::vector<DatasetRecord> records;
  std::size_t n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    std::string where = path.string() + " record " + std::to_string(n);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw DataError(where + ": missing string 'id'");
    DatasetRecord r;
    r.id = j["id"].get<std::string>();
    if (j.contains("ocr_text") && j["ocr_text"].is_string()) {
      r.ocr_text = j["ocr_text"].get<std::string>();
    } else if (j.contains("ocr_words") && j["ocr_words"].is_array()) {
      for (const auto& w : j["ocr_words"]) {
        if (!w.is_string()) throw DataError(where + ": ocr_words must be strings");
        if (!r.ocr_text.empty()) r.ocr_text += ' ';
        r.ocr_text += w.get<std::string>();
      }
    } else {
      throw DataError(where + ": needs 'ocr_text' or 'ocr_words'");
    }
    if (j.contains("image_path") && j["image_path"].is_string()) r.image_path = j["image_path"].get<std::string>();
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      SyntacticResult gt = explicit_from_json(j["ground_truth"], schema);
      if (!gt.ok()) {
        const auto& e = gt.errors.front();
        throw DataError(where + ": ground truth " + e.path + ": " + e.message);
      }
      r.ground_truth = std::move(gt.document);
    }
    records.push_back(std::move(r));
  }
  return Dataset(std::move(records));
}

std::vector<Candidate> read_candidates(const fs::path& path) {
  std::vector<Candidate> out;
  std::size_t n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    try {
      out.push_back(candidate_from_json(j));
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<VerdictRecord> read_verdicts(const fs::path& path) {
  std::vector<VerdictRecord> out;
  for (const auto& j : read_jsonl(path)) {
    VerdictRecord v;
    try {
      v.doc_id = j.at("doc_id").get<std::string>();
      v.sample_index = j.at("sample_index").get<std::size_t>();
      auto level = cascade_level_from_string(j.at("level_reached").get<std::string>());
      if (!level) throw DataError("unknown level_reached in '" + path.string() + "'");
      v.level = *level;
      if (j.contains("mean_token_prob") && j["mean_token_prob"].is_number()) {
        v.mean_token_prob = j["mean_token_prob"].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed verdict in '" + path.string() + "': " + e.what());
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

using CandidateKey = std::pair<std::string, std::size_t>;

std::optional<double> mean_or_null(const Candidate& c, MeanKind kind) { return mean_token_prob(c, kind); }

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Candidates grouped per document, in dataset order then sample order.
std::vector<std::vector<Candidate>> group_candidates(const std::vector<Candidate>& candidates, const Dataset& dataset) {
  std::vector<std::vector<Candidate>> groups(dataset.records().size());
  for (const auto& c : candidates) groups[dataset.position(c.doc_id)].push_back(c);
  for (auto& g : groups) {
    std::sort(g.begin(), g.end(), [](const Candidate& a, const Candidate& b) { return a.sample_index < b.sample_index; });
  }
  return groups;
}

std::map<CandidateKey, CascadeLevel> verdict_index(const std::vector<VerdictRecord>& verdicts) {
  std::map<CandidateKey, CascadeLevel> out;
  for (const auto& v : verdicts) out[{v.doc_id, v.sample_index}] = v.level;
  return out;
}

CascadeLevel level_of(const std::map<CandidateKey, CascadeLevel>& index, const Candidate& c) {
  auto it = index.find({c.doc_id, c.sample_index});
  if (it == index.end()) {
    throw DataError("no verdict for document '" + c.doc_id + "' sample " + std::to_string(c.sample_index));
  }
  return it->second;
}

PromptSpec prompt_for(const DatasetRecord& rec, const SchemaDef& schema, const RunConfig& config) {
  PromptOptions opts = config.prompt;
  opts.include_image = config.include_image && rec.image_path.has_value();
  opts.image_path = rec.image_path;
  return build_prompt(schema, rec.ocr_text, opts);
}

}  // namespace

// --- extract --------------------------------------------------------------------

ExtractSummary cmd_extract(const Dataset& dataset, const SchemaDef& schema, Backend& backend, const RunConfig& config,
                           const fs::path& candidates_file, const fs::path& errors_file) {
  std::map<CandidateKey, Candidate> existing;
  if (fs::exists(candidates_file)) {
    for (auto& c : read_candidates(candidates_file)) {
      if (dataset.find(c.doc_id) == nullptr) {
        spdlog::warn("dropping candidate for unknown document '{}'", c.doc_id);
        continue;
      }
      existing.insert_or_assign({c.doc_id, c.sample_index}, std::move(c));
    }
  }

  ExtractSummary summary;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < dataset.records().size(); ++i) {
    const std::string& id = dataset.records()[i].id;
    bool complete = true;
    for (std::size_t s = 0; s < config.n_samples && complete; ++s) complete = existing.contains({id, s});
    if (complete) {
      ++summary.skipped;
    } else {
      todo.push_back(i);
    }
  }
  if (summary.skipped > 0) spdlog::info("resuming: {} documents already complete", summary.skipped);

  using Outcome = std::variant<std::vector<Candidate>, std::string>;
  std::vector<nlohmann::json> errors;
  if (candidates_file.has_parent_path()) fs::create_directories(candidates_file.parent_path());
  {
    // Progress is appended as documents complete so an interrupted run can resume.
    std::ofstream journal(candidates_file, std::ios::app);
    detail::ordered_parallel(
        todo.size(), config.concurrency,
        [&](std::size_t k) -> Outcome {
          const DatasetRecord& rec = dataset.records()[todo[k]];
          GenerationRequest req;
          req.doc_id = rec.id;
          req.temperature = config.temperature;
          req.n_samples = config.n_samples;
          req.max_tokens = config.max_tokens;
          req.seed = config.seed;
          try {
            req.prompt = prompt_for(rec, schema, config);
            req.validate();
            auto got = backend.generate(req);
            if (got.size() != config.n_samples) {
              return "backend returned " + std::to_string(got.size()) + " candidates, expected " +
                     std::to_string(config.n_samples);
            }
            for (std::size_t s = 0; s < got.size(); ++s) {
              got[s].doc_id = rec.id;
              got[s].sample_index = s;
            }
            return got;
          } catch (const std::exception& e) {
            return std::string(e.what());
          }
        },
        [&](std::size_t k, Outcome&& outcome) {
          const std::string& id = dataset.records()[todo[k]].id;
          if (auto* err = std::get_if<std::string>(&outcome)) {
            spdlog::error("document {}: {}", id, *err);
            errors.push_back({{"doc_id", id}, {"error", *err}});
            ++summary.failed;
            return;
          }
          for (auto& c : std::get<std::vector<Candidate>>(outcome)) {
            journal << candidate_to_json(c).dump() << '\n';
            existing.insert_or_assign({c.doc_id, c.sample_index}, std::move(c));
            ++summary.generated;
          }
          journal.flush();
        });
  }

  // Canonical rewrite: dataset order, then sample index, no duplicates.
  std::vector<const Candidate*> ordered;
  for (const auto& [_, c] : existing) ordered.push_back(&c);
  std::sort(ordered.begin(), ordered.end(), [&](const Candidate* a, const Candidate* b) {
    auto pa = dataset.position(a->doc_id);
    auto pb = dataset.position(b->doc_id);
    return pa != pb ? pa < pb : a->sample_index < b->sample_index;
  });
  std::vector<nlohmann::json> lines;
  for (const Candidate* c : ordered) lines.push_back(candidate_to_json(*c));
  write_text_file(candidates_file, to_jsonl(lines));
  write_text_file(errors_file, to_jsonl(errors));
  spdlog::info("extract: {} candidates generated, {} documents skipped, {} failed", summary.generated,
               summary.skipped, summary.failed);
  return summary;
}

// --- validate -------------------------------------------------------------------

ValidateSummary cmd_validate(const std::vector<Candidate>& candidates, const Dataset& dataset, const SchemaDef& schema,
                             const RunConfig& config, FilterLevel level, const fs::path& verdicts_file,
                             const fs::path& survivors_file) {
  auto groups = group_candidates(candidates, dataset);
  std::vector<const Candidate*> flat;
  for (const auto& g : groups) {
    for (const auto& c : g) flat.push_back(&c);
  }

  std::vector<nlohmann::json> lines;
  std::map<std::string, CascadeLevel> best;
  detail::ordered_parallel(
      flat.size(), config.concurrency,
      [&](std::size_t i) {
        const Candidate& c = *flat[i];
        const DatasetRecord* rec = dataset.find(c.doc_id);
        return run_cascade(c.raw_text, rec->ocr_text, schema, config.rel_tol);
      },
      [&](std::size_t i, CascadeVerdict&& v) {
        const Candidate& c = *flat[i];
        nlohmann::json reasons = nlohmann::json::array();
        for (const auto& d : v.reasons) reasons.push_back(d.to_json());
        nlohmann::json warnings = nlohmann::json::array();
        for (const auto& d : v.warnings) warnings.push_back(d.to_json());
        lines.push_back({{"doc_id", c.doc_id},
                         {"sample_index", c.sample_index},
                         {"level_reached", to_string(v.level)},
                         {"reasons", std::move(reasons)},
                         {"warnings", std::move(warnings)},
                         {"mean_token_prob", optional_number(mean_or_null(c, config.mean))}});
        auto [it, inserted] = best.emplace(c.doc_id, v.level);
        if (!inserted) it->second = std::max(it->second, v.level);
      });
  write_text_file(verdicts_file, to_jsonl(lines));

  ValidateSummary summary;
  summary.documents = dataset.records().size();
  std::string survivors;
  for (FilterLevel f : {FilterLevel::base, FilterLevel::syntactic, FilterLevel::task, FilterLevel::domain}) {
    summary.surviving[f] = 0;
  }
  for (const auto& rec : dataset.records()) {
    auto it = best.find(rec.id);
    for (FilterLevel f : {FilterLevel::base, FilterLevel::syntactic, FilterLevel::task, FilterLevel::domain}) {
      bool ok = f == FilterLevel::base || (it != best.end() && survives(it->second, f));
      if (ok) ++summary.surviving[f];
      if (ok && f == level) survivors += rec.id + "\n";
    }
  }
  write_text_file(survivors_file, survivors);
  spdlog::info("validate: {}/{} documents survive the {} filter", summary.surviving[level], summary.documents,
               to_string(level));
  return summary;
}

// --- select ---------------------------------------------------------------------

std::vector<Selection> select_candidates(const std::vector<Candidate>& candidates,
                                         const std::vector<VerdictRecord>& verdicts, const Dataset& dataset,
                                         MeanKind mean) {
  auto index = verdict_index(verdicts);
  std::vector<Selection> out;
  for (const auto& group : group_candidates(candidates, dataset)) {
    std::vector<Candidate> passed;
    for (const auto& c : group) {
      if (level_of(index, c) == CascadeLevel::passed) passed.push_back(c);
    }
    auto best = select_best(passed, mean);
    if (!best) continue;
    const Candidate& c = passed[*best];
    out.push_back({c.doc_id, c.sample_index, mean_token_prob(c, mean), c.raw_text});
  }
  return out;
}

std::vector<Selection> cmd_select(const std::vector<Candidate>& candidates, const std::vector<VerdictRecord>& verdicts,
                                  const Dataset& dataset, const RunConfig& config, const fs::path& selection_file) {
  auto selected = select_candidates(candidates, verdicts, dataset, config.mean);
  std::vector<nlohmann::json> lines;
  for (const auto& s : selected) {
    lines.push_back({{"doc_id", s.doc_id},
                     {"sample_index", s.sample_index},
                     {"mean_token_prob", optional_number(s.mean_token_prob)},
                     {"raw_text", s.raw_text}});
  }
  write_text_file(selection_file, to_jsonl(lines));
  spdlog::info("select: {} of {} documents have a valid candidate", selected.size(), dataset.records().size());
  return selected;
}

// --- evaluate -------------------------------------------------------------------

FilterTable cmd_evaluate(const std::vector<Candidate>& candidates, const std::vector<VerdictRecord>& verdicts,
                         const Dataset& dataset, const SchemaDef& schema, const RunConfig& config,
                         const EvaluateOutputs& outputs) {
  auto index = verdict_index(verdicts);
  auto groups = group_candidates(candidates, dataset);
  const auto& records = dataset.records();

  struct Prepared {
    DocumentScores scores;
    bool truth_valid = false;
  };
  std::vector<Prepared> prepared(records.size());
  detail::ordered_parallel(
      records.size(), config.concurrency,
      [&](std::size_t i) {
        const DatasetRecord& rec = records[i];
        if (!rec.ground_truth) throw DataError("missing ground truth for document '" + rec.id + "'");
        Prepared p;
        DomainResult truth = domain_validate(*rec.ground_truth, schema, config.rel_tol);
        p.truth_valid = truth.report.valid;
        p.scores.id = rec.id;
        p.scores.truth_bag = flatten(truth.resolved, schema);
        p.scores.truth_tree = to_tree(truth.resolved, schema);
        if (p.scores.truth_tree.empty()) throw DataError("ground truth of document '" + rec.id + "' is empty");

        const auto& group = groups[i];
        for (std::size_t k : rank_candidates(group, config.mean)) {
          const Candidate& c = group[k];
          ScoredCandidate sc;
          sc.sample_index = c.sample_index;
          sc.level = level_of(index, c);
          SyntacticResult syn = syntactic_validate(c.raw_text, schema);
          if (syn.ok()) {
            DomainResult d = domain_validate(*syn.document, schema, config.rel_tol);
            sc.bag = flatten(d.resolved, schema);
            sc.tree = to_tree(d.resolved, schema);
            sc.valid = d.report.valid;
          }
          p.scores.candidates.push_back(std::move(sc));
        }
        return p;
      },
      [&](std::size_t i, Prepared&& p) { prepared[i] = std::move(p); });

  std::vector<DocumentScores> scores;
  std::map<std::string, bool> truth_valid;
  for (auto& p : prepared) {
    truth_valid[p.scores.id] = p.truth_valid;
    scores.push_back(std::move(p.scores));
  }
  FilterTable table = filter_table(scores);

  std::vector<nlohmann::json> per_doc;
  for (const auto& d : table.documents) {
    per_doc.push_back({{"doc_id", d.id},
                       {"filter", to_string(d.filter)},
                       {"sample_index", d.sample_index ? nlohmann::json(*d.sample_index) : nlohmann::json(nullptr)},
                       {"true_positives", d.true_positives},
                       {"predicted", d.predicted},
                       {"expected", d.expected},
                       {"nted", d.nted},
                       {"valid", d.valid},
                       {"exact", d.exact},
                       {"truth_valid", truth_valid[d.id]}});
  }
  for (const auto& [id, ok] : truth_valid) {
    if (!ok) spdlog::warn("ground truth of document '{}' violates the schema constraints", id);
  }
  write_text_file(outputs.text, table.to_text());
  write_text_file(outputs.csv, table.to_csv());
  write_text_file(outputs.json, table.to_json().dump(2) + "\n");
  write_text_file(outputs.per_document, to_jsonl(per_doc));
  return table;
}

// --- distill --------------------------------------------------------------------

nlohmann::json DistillRecord::to_json() const {
  return {{"doc_id", doc_id},
          {"sample_index", sample_index},
          {"prompt", prompt},
          {"completion", completion},
          {"filter_level", to_string(level)},
          {"mean_token_prob", optional_number(mean_token_prob)}};
}

std::vector<DistillRecord> cmd_distill(const std::vector<Candidate>& candidates,
                                       const std::vector<VerdictRecord>& verdicts, const Dataset& dataset,
                                       const SchemaDef& schema, const RunConfig& config, DistillSubset subset,
                                       const fs::path& distill_file) {
  auto index = verdict_index(verdicts);
  auto groups = group_candidates(candidates, dataset);
  std::vector<DistillRecord> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& group = groups[i];
    const Candidate* chosen = nullptr;
    for (std::size_t k : rank_candidates(group, config.mean)) {
      const Candidate& c = group[k];
      FilterLevel needed = subset == DistillSubset::domain ? FilterLevel::domain : FilterLevel::syntactic;
      if (survives(level_of(index, c), needed)) {
        chosen = &c;
        break;
      }
    }
    if (chosen == nullptr) continue;
    auto block = extract_json_block(chosen->raw_text);
    if (!block) continue;
    DistillRecord r;
    r.doc_id = chosen->doc_id;
    r.sample_index = chosen->sample_index;
    r.prompt = prompt_for(dataset.records()[i], schema, config).render();
    r.completion = *block;
    r.level = level_of(index, *chosen);
    r.mean_token_prob = mean_token_prob(*chosen, config.mean);
    out.push_back(std::move(r));
  }
  std::vector<nlohmann::json> lines;
  for (const auto& r : out) lines.push_back(r.to_json());
  write_text_file(distill_file, to_jsonl(lines));
  spdlog::info("distill: {} records ({} subset)", out.size(), subset == DistillSubset::domain ? "domain" : "base");
  return out;
}

// --- resolve --------------------------------------------------------------------

nlohmann::json cmd_resolve(const std::string& document_text, const SchemaDef& schema, const Decimal& rel_tol) {
  auto parsed = nlohmann::json::parse(document_text, nullptr, false);
  if (parsed.is_discarded()) {
    auto block = extract_json_block(document_text);
    if (block) parsed = nlohmann::json::parse(*block, nullptr, false);
  }
  if (parsed.is_discarded()) throw DataError("document is not valid JSON");
  SyntacticResult syn = explicit_from_json(parsed, schema);
  if (!syn.ok()) {
    std::string msg = "document does not match the schema:";
    for (const auto& e : syn.errors) msg += "\n  " + e.path + ": " + e.message;
    throw DataError(msg);
  }
  DomainResult d = domain_validate(*syn.document, schema, rel_tol);
  return {{"resolved", implicit_to_json(d.resolved, schema)},
          {"trace", trace_to_json(d.trace)},
          {"report", report_to_json(d.report)}};
}

}  // namespace docval
