#include <benchmark/benchmark.h>

#include <filesystem>

#include "docval/metrics.hpp"
#include "docval/pipeline.hpp"
#include "docval/resolver.hpp"
#include "docval/validation.hpp"
#include "docval/values.hpp"

using namespace docval;

namespace {

const SchemaDef& schema() {
  static const SchemaDef s = builtin_transactional_schema();
  return s;
}

// Golden receipts: realistic sizes (2-4 line items, a few sub-items).
const std::vector<nlohmann::json>& receipts() {
  static const auto r = read_jsonl(std::filesystem::path(DOCVAL_FIXTURE_DIR) / "golden" / "dataset.jsonl");
  return r;
}

ImplicitDocument implicit(const nlohmann::json& explicit_doc) {
  return materialize(*explicit_from_json(explicit_doc, schema()).document, schema()).document;
}

void BM_ParseAmount(benchmark::State& state) {
  const std::vector<std::string> inputs = {"RP. 18,000.00", "1.234,56", "$ 12.50", "(3,5)", "18 000", "0,125", "EUR 7"};
  for (auto _ : state) {
    for (const auto& s : inputs) benchmark::DoNotOptimize(parse_amount(s));
  }
  state.SetItemsProcessed(state.iterations() * inputs.size());
}
BENCHMARK(BM_ParseAmount);

// Totals removed so the resolver has to infer them back.
void BM_Resolve(benchmark::State& state) {
  std::vector<ImplicitDocument> docs;
  for (const auto& r : receipts()) {
    auto j = r["ground_truth"];
    for (const char* k : {"base_taxable_amount", "total_tax", "net_total", "gross_total", "due_amount"}) j[k] = nullptr;
    docs.push_back(apply_defaults(implicit(j), schema()));
  }
  for (auto _ : state) {
    for (const auto& d : docs) benchmark::DoNotOptimize(resolve(d, schema()));
  }
  state.SetItemsProcessed(state.iterations() * docs.size());
}
BENCHMARK(BM_Resolve);

void BM_Ted(benchmark::State& state) {
  std::vector<DocTree> trees;
  for (const auto& r : receipts()) trees.push_back(to_tree(implicit(r["ground_truth"]), schema()));
  std::size_t pairs = 0;
  for (auto _ : state) {
    for (std::size_t i = 1; i < trees.size(); ++i, ++pairs) benchmark::DoNotOptimize(ted(trees[i - 1], trees[i]));
  }
  state.SetItemsProcessed(pairs);
}
BENCHMARK(BM_Ted);

void BM_Cascade(benchmark::State& state) {
  std::vector<std::pair<std::string, std::string>> inputs;
  for (const auto& r : receipts()) inputs.emplace_back(r["ground_truth"].dump(2), r["ocr_text"].get<std::string>());
  const Decimal tol(5, 3);
  for (auto _ : state) {
    for (const auto& [raw, ocr] : inputs) benchmark::DoNotOptimize(run_cascade(raw, ocr, schema(), tol));
  }
  state.SetItemsProcessed(state.iterations() * inputs.size());
}
BENCHMARK(BM_Cascade);

}  // namespace

// libbenchmark_main.a ships LTO bytecode from another compiler version.
BENCHMARK_MAIN();
