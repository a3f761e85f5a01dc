// docval: validate-first extraction pipeline for invoices and receipts.
//
//   docval extract  --dataset D --backend replay --replay F --samples 4 --temperature 1 --out run/
//   docval validate --dataset D --out run/ [--level domain]
//   docval select   --dataset D --out run/
//   docval evaluate --dataset D --out run/
//   docval distill  --dataset D --out run/ --subset domain
//   docval run      ... all of the above in sequence
//   docval resolve  document.json
//   docval schema   dump|output|check [--schema file]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "docval/backend.hpp"
#include "docval/pipeline.hpp"
#include "docval/schema.hpp"
#include "docval/values.hpp"

namespace fs = std::filesystem;
using namespace docval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

struct Options {
  std::string schema_path;
  std::string dataset;
  std::string out_dir = "docval-out";
  std::string candidates;
  std::string verdicts;
  std::string backend = "replay";
  std::string replay;
  std::string endpoint;
  std::string endpoint_config;
  std::string model;
  std::string tolerance = "0.005";
  std::string level = "domain";
  std::string subset = "domain";
  std::string mean = "arithmetic";
  std::string document;
  std::string schema_action = "dump";
  double temperature = 0.0;
  std::size_t samples = 1;
  std::size_t concurrency = 4;
  std::size_t max_tokens = 2048;
  std::int64_t seed = -1;
  bool image = false;
  bool verbose = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SchemaDef schema_of(const Options& o) {
  return o.schema_path.empty() ? builtin_transactional_schema() : load_schema_file(o.schema_path);
}

RunConfig config_of(const Options& o) {
  RunConfig c;
  c.temperature = o.temperature;
  c.n_samples = o.samples;
  c.max_tokens = o.max_tokens;
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  auto tol = Decimal::from_string(o.tolerance);
  if (!tol || tol->sign() < 0) throw UsageError("--tolerance must be a non-negative decimal, got '" + o.tolerance + "'");
  c.rel_tol = *tol;
  c.concurrency = std::max<std::size_t>(1, o.concurrency);
  c.mean = o.mean == "geometric" ? MeanKind::geometric : MeanKind::arithmetic;
  c.include_image = o.image;
  if (c.temperature == 0.0 && c.n_samples > 1) {
    throw UsageError("--samples > 1 needs a positive --temperature (temperature 0 is greedy decoding)");
  }
  return c;
}

fs::path out_path(const Options& o, const std::string& name) { return fs::path(o.out_dir) / name; }
fs::path candidates_path(const Options& o) {
  return o.candidates.empty() ? out_path(o, "candidates.jsonl") : fs::path(o.candidates);
}
fs::path verdicts_path(const Options& o) {
  return o.verdicts.empty() ? out_path(o, "verdicts.jsonl") : fs::path(o.verdicts);
}

Dataset dataset_of(const Options& o, const SchemaDef& schema) {
  if (o.dataset.empty()) throw UsageError("--dataset is required");
  return load_dataset(o.dataset, schema);
}

FilterLevel level_of(const std::string& name) {
  if (name == "syntactic") return FilterLevel::syntactic;
  if (name == "task") return FilterLevel::task;
  return FilterLevel::domain;
}

std::unique_ptr<Backend> backend_of(const Options& o) {
  if (o.backend == "replay") {
    if (o.replay.empty()) throw UsageError("--backend replay needs --replay FILE");
    return std::make_unique<ReplayBackend>(ReplayBackend::from_file(o.replay));
  }
  EndpointConfig cfg = o.endpoint_config.empty() ? EndpointConfig{} : EndpointConfig::from_file(o.endpoint_config);
  if (!o.endpoint.empty()) cfg.base_url = o.endpoint;
  if (!o.model.empty()) cfg.model = o.model;
  cfg.max_in_flight = std::max<std::size_t>(1, o.concurrency);
  cfg.apply_environment();
  if (cfg.model.empty()) throw UsageError("--backend http needs --model (or \"model\" in the endpoint config)");
  return std::make_unique<HttpBackend>(cfg);
}

int do_extract(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  Dataset dataset = dataset_of(o, schema);
  auto backend = backend_of(o);
  ExtractSummary s =
      cmd_extract(dataset, schema, *backend, config, candidates_path(o), out_path(o, "extract_errors.jsonl"));
  std::cout << "candidates: " << s.generated << " generated, " << s.skipped << " documents skipped, " << s.failed
            << " documents failed\n";
  return s.failed > 0 ? kExitBackend : kExitOk;
}

int do_validate(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  Dataset dataset = dataset_of(o, schema);
  ValidateSummary s = cmd_validate(read_candidates(candidates_path(o)), dataset, schema, config, level_of(o.level),
                                   verdicts_path(o), out_path(o, "survivors.txt"));
  for (FilterLevel f : {FilterLevel::base, FilterLevel::syntactic, FilterLevel::task, FilterLevel::domain}) {
    std::cout << to_string(f) << ": " << s.surviving[f] << "/" << s.documents << "\n";
  }
  return kExitOk;
}

int do_select(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  Dataset dataset = dataset_of(o, schema);
  auto sel = cmd_select(read_candidates(candidates_path(o)), read_verdicts(verdicts_path(o)), dataset, config,
                        out_path(o, "selection.jsonl"));
  std::cout << sel.size() << " of " << dataset.records().size() << " documents selected\n";
  return kExitOk;
}

int do_evaluate(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  Dataset dataset = dataset_of(o, schema);
  EvaluateOutputs outs{out_path(o, "report.txt"), out_path(o, "report.csv"), out_path(o, "report.json"),
                       out_path(o, "per_document.jsonl")};
  FilterTable t =
      cmd_evaluate(read_candidates(candidates_path(o)), read_verdicts(verdicts_path(o)), dataset, schema, config, outs);
  std::cout << t.to_text();
  return kExitOk;
}

int do_distill(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  Dataset dataset = dataset_of(o, schema);
  DistillSubset subset = o.subset == "base" ? DistillSubset::base : DistillSubset::domain;
  auto recs = cmd_distill(read_candidates(candidates_path(o)), read_verdicts(verdicts_path(o)), dataset, schema,
                          config, subset, out_path(o, "distill_" + o.subset + ".jsonl"));
  std::cout << recs.size() << " distillation records written\n";
  return kExitOk;
}

int do_run(const Options& o) {
  int rc = do_extract(o);
  if (rc != kExitOk) spdlog::warn("some documents failed generation; continuing with what was produced");
  do_validate(o);
  do_select(o);
  bool has_truth = false;
  {
    SchemaDef schema = schema_of(o);
    Dataset dataset = dataset_of(o, schema);
    for (const auto& r : dataset.records()) has_truth = has_truth || r.ground_truth.has_value();
  }
  if (has_truth) do_evaluate(o);
  do_distill(o);
  return rc;
}

int do_resolve(const Options& o) {
  SchemaDef schema = schema_of(o);
  RunConfig config = config_of(o);
  std::string text;
  if (o.document == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(o.document);
    if (!in) throw DataError("cannot open '" + o.document + "'");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  nlohmann::json out = cmd_resolve(text, schema, config.rel_tol);
  std::cout << out.dump(2) << "\n";
  return out["report"]["valid"].get<bool>() ? kExitOk : kExitData;
}

int do_schema(const Options& o) {
  SchemaDef schema = schema_of(o);
  if (o.schema_action == "dump") {
    std::cout << schema_to_json(schema).dump(2) << "\n";
  } else if (o.schema_action == "output") {
    std::cout << to_output_schema(schema).dump(2) << "\n";
  } else {
    std::cout << "ok: " << schema.fields().size() << " fields, " << schema.equations().size() << " equations, "
              << schema.rules().size() << " rules\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docval: validated information extraction for transactional documents"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--schema", o.schema_path, "Schema definition file (default: builtin)")->check(CLI::ExistingFile);
    cmd->add_option("--tolerance", o.tolerance, "Relative tolerance for equations")->capture_default_str();
    cmd->add_option("--concurrency", o.concurrency, "Parallel documents / in-flight requests")->capture_default_str();
    cmd->add_flag("-v,--verbose", o.verbose, "Debug logging");
  };
  auto data = [&](CLI::App* cmd) {
    common(cmd);
    cmd->add_option("--dataset", o.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--candidates", o.candidates, "Candidates JSONL (default: OUT/candidates.jsonl)");
    cmd->add_option("--mean", o.mean, "Token-probability mean used for selection")
        ->check(CLI::IsMember({"arithmetic", "geometric"}))
        ->capture_default_str();
  };
  auto generation = [&](CLI::App* cmd) {
    cmd->add_option("--backend", o.backend, "Generation backend")
        ->check(CLI::IsMember({"http", "replay"}))
        ->capture_default_str();
    cmd->add_option("--replay", o.replay, "Replay fixture JSONL")->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", o.endpoint, "OpenAI-compatible base URL, e.g. http://localhost:8000");
    cmd->add_option("--endpoint-config", o.endpoint_config, "Endpoint config JSON")->check(CLI::ExistingFile);
    cmd->add_option("--model", o.model, "Model name sent to the endpoint");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature (0 = greedy)")->capture_default_str();
    cmd->add_option("--samples", o.samples, "Samples per document")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--max-tokens", o.max_tokens, "Generation limit")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Sampling seed, if the backend supports it");
    cmd->add_flag("--image", o.image, "Attach the document image when the dataset has one");
  };
  auto verdict_input = [&](CLI::App* cmd) {
    cmd->add_option("--verdicts", o.verdicts, "Verdicts JSONL (default: OUT/verdicts.jsonl)");
  };
  auto level_opt = [&](CLI::App* cmd) {
    cmd->add_option("--level", o.level, "Filter level whose survivors are listed")
        ->check(CLI::IsMember({"syntactic", "task", "domain"}))
        ->capture_default_str();
  };
  auto subset_opt = [&](CLI::App* cmd) {
    cmd->add_option("--subset", o.subset, "Distill the domain-filtered or the unfiltered set")
        ->check(CLI::IsMember({"base", "domain"}))
        ->capture_default_str();
  };

  auto* extract = app.add_subcommand("extract", "Generate candidates for every document");
  data(extract);
  generation(extract);

  auto* validate = app.add_subcommand("validate", "Run the syntactic/task/domain cascade on candidates");
  data(validate);
  level_opt(validate);

  auto* select = app.add_subcommand("select", "Pick the best fully valid candidate per document");
  data(select);
  verdict_input(select);

  auto* evaluate = app.add_subcommand("evaluate", "Score against ground truth per filter level");
  data(evaluate);
  verdict_input(evaluate);

  auto* distill = app.add_subcommand("distill", "Export prompt/completion pairs for fine-tuning");
  data(distill);
  verdict_input(distill);
  subset_opt(distill);

  auto* run = app.add_subcommand("run", "extract, validate, select, evaluate and distill");
  data(run);
  generation(run);
  level_opt(run);
  subset_opt(run);

  auto* resolve = app.add_subcommand("resolve", "Resolve one explicit document and check its constraints");
  common(resolve);
  resolve->add_option("document", o.document, "Explicit document JSON ('-' for stdin)")->required();

  auto* schema = app.add_subcommand("schema", "Print or check a schema");
  common(schema);
  schema->add_option("action", o.schema_action, "dump | output | check")
      ->check(CLI::IsMember({"dump", "output", "check"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*extract) return do_extract(o);
    if (*validate) return do_validate(o);
    if (*select) return do_select(o);
    if (*evaluate) return do_evaluate(o);
    if (*distill) return do_distill(o);
    if (*run) return do_run(o);
    if (*resolve) return do_resolve(o);
    if (*schema) return do_schema(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
