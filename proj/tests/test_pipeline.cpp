#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "docval/pipeline.hpp"
#include "testkit.hpp"

using namespace docval;
namespace fs = std::filesystem;

namespace {

const SchemaDef& schema() {
  static const SchemaDef s = builtin_transactional_schema();
  return s;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("docval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_lines(const fs::path& p, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l.dump() << "\n";
}

Candidate cand(const std::string& doc, std::size_t i, double p, std::string text) {
  Candidate c{doc, i, std::move(text), {}, "stop"};
  c.tokens = {{"a", p}, {"b", p}};
  return c;
}

// Three receipts; per document the samples are [truth, hallucinated, garbage]
// with probabilities chosen per document.
struct Fixture {
  fs::path dir;
  Dataset dataset;
  std::vector<Candidate> candidates;
  std::vector<std::string> truths;
};

Fixture make_fixture(const std::string& name) {
  Fixture f;
  f.dir = scratch(name);
  std::mt19937_64 rng(31);
  std::vector<nlohmann::json> records;
  for (int d = 0; d < 3; ++d) {
    std::string id = "doc" + std::to_string(d);
    auto truth = testkit::random_invoice(rng, {.price_step = 100});
    auto json = testkit::render_explicit(truth, schema(), testkit::receipt_format());
    std::string ocr = testkit::receipt_ocr(truth, schema(), "SHOP " + id);
    records.push_back({{"id", id}, {"ocr_text", ocr}, {"ground_truth", json}});
    auto halluc = json;
    halluc["currency"] = "XYZ";
    f.truths.push_back(json.dump());
    f.candidates.push_back(cand(id, 0, 0.5 + 0.1 * d, json.dump()));
    f.candidates.push_back(cand(id, 1, 0.9, halluc.dump()));
    f.candidates.push_back(cand(id, 2, 0.95, "Sorry, I cannot read this receipt."));
  }
  write_lines(f.dir / "dataset.jsonl", records);
  f.dataset = load_dataset(f.dir / "dataset.jsonl", schema());
  return f;
}

RunConfig sampled(std::size_t n) {
  RunConfig c;
  c.n_samples = n;
  c.temperature = 0.7;
  c.concurrency = 3;
  return c;
}

}  // namespace

TEST(Dataset, LoadsTextAndWords) {
  fs::path dir = scratch("dataset");
  write_lines(dir / "d.jsonl", {{{"id", "a"}, {"ocr_text", "TOTAL 1"}},
                                {{"id", "b"}, {"ocr_words", {"TOTAL", "2,00"}}, {"image_path", "b.png"}}});
  Dataset d = load_dataset(dir / "d.jsonl", schema());
  ASSERT_EQ(d.records().size(), 2u);
  EXPECT_EQ(d.find("b")->ocr_text, "TOTAL 2,00");
  EXPECT_EQ(*d.find("b")->image_path, "b.png");
  EXPECT_FALSE(d.find("a")->ground_truth);
  EXPECT_EQ(d.position("b"), 1u);
  EXPECT_THROW(d.position("zzz"), DataError);
}

TEST(Dataset, RejectsBadRecords) {
  fs::path dir = scratch("dataset_bad");
  write_lines(dir / "noocr.jsonl", {{{"id", "a"}}});
  EXPECT_THROW(load_dataset(dir / "noocr.jsonl", schema()), DataError);
  write_lines(dir / "gt.jsonl", {{{"id", "a"}, {"ocr_text", "x"}, {"ground_truth", {{"gross_total", "1"}}}}});
  EXPECT_THROW(load_dataset(dir / "gt.jsonl", schema()), DataError);
  write_lines(dir / "dup.jsonl", {{{"id", "a"}, {"ocr_text", "x"}}, {{"id", "a"}, {"ocr_text", "y"}}});
  EXPECT_THROW(load_dataset(dir / "dup.jsonl", schema()), DataError);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl", schema()), DataError);
}

TEST(Extract, WritesCandidatesInDatasetOrder) {
  Fixture f = make_fixture("extract");
  ReplayBackend backend(f.candidates);
  auto s = cmd_extract(f.dataset, schema(), backend, sampled(3), f.dir / "c.jsonl", f.dir / "e.jsonl");
  EXPECT_EQ(s.generated, 9u);
  EXPECT_EQ(s.failed, 0u);
  auto back = read_candidates(f.dir / "c.jsonl");
  EXPECT_EQ(back, f.candidates);
}

TEST(Extract, ResumesWithoutDuplicates) {
  Fixture f = make_fixture("resume");
  ReplayBackend backend(f.candidates);
  // A previous run finished doc0 and part of doc1.
  std::vector<nlohmann::json> partial{candidate_to_json(f.candidates[0]), candidate_to_json(f.candidates[1]),
                                      candidate_to_json(f.candidates[2]), candidate_to_json(f.candidates[3])};
  write_lines(f.dir / "c.jsonl", partial);
  auto s = cmd_extract(f.dataset, schema(), backend, sampled(3), f.dir / "c.jsonl", f.dir / "e.jsonl");
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_EQ(s.generated, 6u);
  EXPECT_EQ(read_candidates(f.dir / "c.jsonl"), f.candidates);

  s = cmd_extract(f.dataset, schema(), backend, sampled(3), f.dir / "c.jsonl", f.dir / "e.jsonl");
  EXPECT_EQ(s.skipped, 3u);
  EXPECT_EQ(s.generated, 0u);
  EXPECT_EQ(read_candidates(f.dir / "c.jsonl"), f.candidates);
}

TEST(Extract, RecordsFailuresAndContinues) {
  Fixture f = make_fixture("extract_fail");
  std::vector<Candidate> some(f.candidates.begin(), f.candidates.begin() + 6);  // doc2 missing
  ReplayBackend backend(some);
  auto s = cmd_extract(f.dataset, schema(), backend, sampled(3), f.dir / "c.jsonl", f.dir / "e.jsonl");
  EXPECT_EQ(s.failed, 1u);
  EXPECT_EQ(s.generated, 6u);
  auto errors = read_jsonl(f.dir / "e.jsonl");
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0]["doc_id"], "doc2");
}

TEST(Validate, VerdictsAndSurvivors) {
  Fixture f = make_fixture("validate");
  auto s = cmd_validate(f.candidates, f.dataset, schema(), sampled(3), FilterLevel::domain, f.dir / "v.jsonl",
                        f.dir / "s.txt");
  EXPECT_EQ(s.documents, 3u);
  EXPECT_EQ(s.surviving[FilterLevel::domain], 3u);
  auto verdicts = read_verdicts(f.dir / "v.jsonl");
  ASSERT_EQ(verdicts.size(), 9u);
  for (const auto& v : verdicts) {
    CascadeLevel expected = v.sample_index == 0   ? CascadeLevel::passed
                            : v.sample_index == 1 ? CascadeLevel::failed_task
                                                  : CascadeLevel::failed_syntactic;
    EXPECT_EQ(v.level, expected) << v.doc_id << " " << v.sample_index;
    EXPECT_TRUE(v.mean_token_prob);
  }
  std::ifstream in(f.dir / "s.txt");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all, "doc0\ndoc1\ndoc2\n");
}

TEST(Validate, ConcurrencyDoesNotChangeOutput) {
  Fixture f = make_fixture("validate_conc");
  RunConfig one = sampled(3);
  one.concurrency = 1;
  cmd_validate(f.candidates, f.dataset, schema(), one, FilterLevel::task, f.dir / "v1.jsonl", f.dir / "s1.txt");
  RunConfig many = sampled(3);
  many.concurrency = 8;
  cmd_validate(f.candidates, f.dataset, schema(), many, FilterLevel::task, f.dir / "v8.jsonl", f.dir / "s8.txt");
  EXPECT_EQ(read_jsonl(f.dir / "v1.jsonl"), read_jsonl(f.dir / "v8.jsonl"));
}

TEST(Select, PicksTheBestPassingCandidate) {
  Fixture f = make_fixture("select");
  cmd_validate(f.candidates, f.dataset, schema(), sampled(3), FilterLevel::domain, f.dir / "v.jsonl", f.dir / "s.txt");
  auto verdicts = read_verdicts(f.dir / "v.jsonl");
  auto sel = cmd_select(f.candidates, verdicts, f.dataset, sampled(3), f.dir / "sel.jsonl");
  ASSERT_EQ(sel.size(), 3u);
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(sel[d].sample_index, 0u);  // the higher-probability samples failed
    EXPECT_EQ(sel[d].raw_text, f.truths[d]);
  }
  EXPECT_EQ(read_jsonl(f.dir / "sel.jsonl").size(), 3u);

  // A candidate without a verdict is an input error, not a failure.
  EXPECT_THROW(select_candidates(f.candidates, {}, f.dataset, MeanKind::arithmetic), DataError);
}

TEST(Evaluate, PerfectCandidatesScorePerfectly) {
  Fixture f = make_fixture("evaluate");
  cmd_validate(f.candidates, f.dataset, schema(), sampled(3), FilterLevel::domain, f.dir / "v.jsonl", f.dir / "s.txt");
  auto verdicts = read_verdicts(f.dir / "v.jsonl");
  EvaluateOutputs out{f.dir / "r.txt", f.dir / "r.csv", f.dir / "r.json", f.dir / "pd.jsonl"};
  FilterTable t = cmd_evaluate(f.candidates, verdicts, f.dataset, schema(), sampled(3), out);
  const FilterRow& base = t.rows[0];
  const FilterRow& domain = t.rows[3];
  EXPECT_DOUBLE_EQ(domain.pct_remaining, 100.0);
  EXPECT_DOUBLE_EQ(domain.f1, 100.0);
  EXPECT_DOUBLE_EQ(domain.doc_accuracy, 100.0);
  EXPECT_DOUBLE_EQ(domain.nted, 0.0);
  // Base takes the best parsable sample, the hallucinated one.
  EXPECT_LT(base.f1, 100.0);
  EXPECT_DOUBLE_EQ(base.doc_accuracy, 0.0);
  EXPECT_TRUE(fs::exists(out.text));
  EXPECT_EQ(read_jsonl(out.per_document).size(), 12u);
}

TEST(Evaluate, MissingGroundTruthIsDataError) {
  fs::path dir = scratch("evaluate_nogt");
  write_lines(dir / "d.jsonl", {{{"id", "a"}, {"ocr_text", "x"}}});
  Dataset d = load_dataset(dir / "d.jsonl", schema());
  EvaluateOutputs out{dir / "r.txt", dir / "r.csv", dir / "r.json", dir / "pd.jsonl"};
  EXPECT_THROW(cmd_evaluate({}, {}, d, schema(), RunConfig{}, out), DataError);
}

TEST(Distill, DomainSubsetRepassesTheCascade) {
  Fixture f = make_fixture("distill");
  cmd_validate(f.candidates, f.dataset, schema(), sampled(3), FilterLevel::domain, f.dir / "v.jsonl", f.dir / "s.txt");
  auto verdicts = read_verdicts(f.dir / "v.jsonl");
  auto recs = cmd_distill(f.candidates, verdicts, f.dataset, schema(), sampled(3), DistillSubset::domain,
                          f.dir / "dd.jsonl");
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) {
    const auto* rec = f.dataset.find(r.doc_id);
    EXPECT_EQ(run_cascade(r.completion, rec->ocr_text, schema(), Decimal(5, 3)).level, CascadeLevel::passed);
    EXPECT_NE(r.prompt.find(rec->ocr_text), std::string::npos);
  }
  auto base = cmd_distill(f.candidates, verdicts, f.dataset, schema(), sampled(3), DistillSubset::base,
                          f.dir / "db.jsonl");
  ASSERT_EQ(base.size(), 3u);
  for (const auto& r : base) EXPECT_EQ(r.sample_index, 1u);
  EXPECT_EQ(read_jsonl(f.dir / "db.jsonl").size(), 3u);
}

TEST(Resolve, CommandOutputs) {
  auto doc = testkit::explicit_json(schema(), {{"line_items", {{{"net_total", "40.00"}}, {{"net_total", "60.00"}}}},
                                               {"tax_rate", "10%"},
                                               {"gross_total", "110.00"}});
  nlohmann::json out = cmd_resolve(doc.dump(), schema(), Decimal(5, 3));
  EXPECT_EQ(out["resolved"]["values"]["base_taxable_amount"], "100");
  EXPECT_EQ(out["resolved"]["values"]["total_tax"], "10");
  EXPECT_EQ(out["resolved"]["provenance"]["total_tax"], "inferred");
  EXPECT_FALSE(out["trace"].empty());
  EXPECT_TRUE(out["report"]["valid"]);
  EXPECT_THROW(cmd_resolve("not json", schema(), Decimal(5, 3)), DataError);
  EXPECT_THROW(cmd_resolve("{\"gross_total\": \"1\"}", schema(), Decimal(5, 3)), DataError);
}
