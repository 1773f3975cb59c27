#include "stylefuse/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stylefuse/config.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/digest.hpp"
#include "stylefuse/evaluation.hpp"
#include "stylefuse/reasoning.hpp"
#include "stylefuse/runtime.hpp"
#include "stylefuse/service.hpp"

namespace stylefuse::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Common {
  std::string config;
  bool replay = false;
  std::string catalog;
  std::string cache_dir;
};

struct PipelineFlags {
  bool no_identify = false;
  bool no_svaf = false;
  bool no_aesthetics = false;
  std::optional<double> tau;
  std::optional<int> aava_sign;
  std::optional<std::size_t> pool_size;
  std::string model;
  std::string label;
};

void add_common(CLI::App* sub, Common& c, bool with_catalog = true) {
  sub->add_option("--config", c.config, "JSON config file (environment variables override it)");
  sub->add_flag("--replay", c.replay, "Replay mode: serve reasoning and embeddings from the cache only");
  if (with_catalog) {
    sub->add_option("--catalog", c.catalog,
                    "Catalog directory (manifest.ldj, embeddings.aemb, images)");
    sub->add_option("--cache-dir", c.cache_dir,
                    "Transcript and embedding cache directory (default: <catalog>/cache)");
  }
}

void add_pipeline_flags(CLI::App* sub, PipelineFlags& p, bool fusion = true) {
  sub->add_flag("--no-identify", p.no_identify, "Drop the identification step from the prompt");
  sub->add_flag("--no-aesthetics", p.no_aesthetics,
                "Drop the aesthetic-thoughts step (and the aesthetic cue)");
  sub->add_option("--model", p.model, "MLLM model name override");
  if (!fusion) return;
  sub->add_flag("--no-svaf", p.no_svaf, "Disable fusion: the query is the target-text embedding");
  sub->add_option("--tau", p.tau, "Saliency softmax temperature")->check(CLI::PositiveNumber);
  sub->add_option("--aava-sign", p.aava_sign, "Attribute weighting sign (+1 or -1)")
      ->check(CLI::IsMember({1, -1}));
  sub->add_option("--pool-size", p.pool_size, "Candidate pool size for entropy gating")
      ->check(CLI::PositiveNumber);
  sub->add_option("--label", p.label, "Label recorded in the report's config snapshot");
}

AppConfig resolve_config(const Common& c) {
  AppConfig config;
  if (!c.config.empty()) config = load_config(c.config);
  apply_env_overrides(config);
  if (!c.catalog.empty()) config.catalog_dir = c.catalog;
  if (!c.cache_dir.empty()) config.cache_dir = c.cache_dir;
  if (c.replay) config.mode = reasoning::CacheMode::kReplay;
  return config;
}

engine::PipelineConfig apply(engine::PipelineConfig config, const PipelineFlags& p) {
  if (p.no_identify) config.identify_step = false;
  if (p.no_svaf) config.svaf_enabled = false;
  if (p.no_aesthetics) config.aesthetic_thoughts = false;
  if (p.tau) config.tau = *p.tau;
  if (p.aava_sign) config.aava_sign = *p.aava_sign;
  if (p.pool_size) config.pool_size = *p.pool_size;
  if (!p.model.empty()) config.model = p.model;
  if (!p.label.empty()) config.label = p.label;
  engine::validate(config);
  return config;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  write_file_atomic(path, content);
}

// ---------------------------------------------------------------------------
// ingest validate

std::string detect_kind(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (!j.is_object()) throw Error(Errc::kSchemaError, "line 1: not a JSON object");
    if (j.contains("query_id")) return "cir";
    if (j.contains("test_kind")) return "a100";
    if (j.contains("candidate_item_ids")) return "fitb";
    if (j.contains("item_id")) return "manifest";
    throw Error(Errc::kSchemaError, "cannot infer the record kind of '" + path.string() +
                                        "'; pass --kind");
  }
  throw Error(Errc::kSchemaError, "'" + path.string() + "' holds no records");
}

int run_ingest_validate(const std::string& path_text, std::string kind, const Common& common,
                        std::ostream& out, std::ostream& err) {
  const fs::path path(path_text);
  if (fs::is_directory(path)) {
    if (fs::exists(path / "embeddings.aemb")) {
      const datastore::Catalog catalog = datastore::load_catalog_dir(path);
      for (const auto& w : catalog.warnings()) err << "warning: " << w << "\n";
      out << "ok: catalog " << path.string() << ": " << catalog.size() << " items, dim "
          << catalog.dim() << ", " << catalog.categories().size() << " categories\n";
    } else {
      const auto entries = datastore::read_manifest(path / "manifest.ldj");
      out << "ok: manifest " << (path / "manifest.ldj").string() << ": " << entries.size()
          << " items\n";
    }
    return kExitOk;
  }
  if (kind == "auto") kind = detect_kind(path);

  std::optional<datastore::Catalog> catalog;
  const AppConfig config = resolve_config(common);
  if (!config.catalog_dir.empty() && kind != "manifest") {
    catalog = datastore::load_catalog_dir(config.catalog_dir);
  }
  std::size_t count = 0;
  if (kind == "manifest") {
    count = datastore::read_manifest(path).size();
  } else if (kind == "fitb") {
    const auto q = datastore::read_fitb(path);
    if (catalog) datastore::validate(*catalog, std::span<const datastore::FitbQuestion>(q));
    count = q.size();
  } else if (kind == "cir") {
    const auto q = datastore::read_cir(path);
    if (catalog) datastore::validate(*catalog, std::span<const datastore::CirQuery>(q));
    count = q.size();
  } else if (kind == "a100") {
    const auto q = datastore::read_a100(path);
    if (catalog) datastore::validate(*catalog, std::span<const datastore::A100Question>(q));
    count = q.size();
  } else {
    throw Error(Errc::kInvalidArgument, "unknown kind '" + kind + "'");
  }
  out << "ok: " << kind << " " << path.string() << ": " << count << " records"
      << (catalog ? " (references checked)" : "") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// embed import

std::vector<datastore::EmbeddingRecord> import_jsonl(const fs::path& path) {
  const std::string text = read_file_bytes(path);
  std::vector<datastore::EmbeddingRecord> records;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    const char* id_key = j.is_object() && j.contains("item_id") ? "item_id" : "id";
    if (!j.is_object() || !j.contains(id_key) || !j[id_key].is_string() ||
        !j.contains("embedding") || !j["embedding"].is_array()) {
      throw Error(Errc::kSchemaError, "line " + std::to_string(line_no) +
                                          ": expected {\"id\": str, \"embedding\": [float]}");
    }
    datastore::EmbeddingRecord r{j[id_key].get<std::string>(), {}};
    for (const json& v : j["embedding"]) {
      if (!v.is_number()) {
        throw Error(Errc::kSchemaError, "line " + std::to_string(line_no) + ": non-numeric value");
      }
      r.values.push_back(v.get<float>());
    }
    records.push_back(std::move(r));
  }
  return records;
}

// .fvecs: per vector an int32 LE dimension followed by that many f32 LE.
std::vector<datastore::EmbeddingRecord> import_fvecs(const fs::path& path, const fs::path& ids_path) {
  if (ids_path.empty()) throw Error(Errc::kInvalidArgument, "fvecs input requires --ids");
  const std::string bytes = read_file_bytes(path);
  std::vector<std::string> ids;
  {
    std::istringstream lines(read_file_bytes(ids_path));
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
  }
  std::vector<datastore::EmbeddingRecord> records;
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < 4) throw Error(Errc::kFormatError, "truncated fvecs header");
    std::uint32_t dim = 0;
    for (int b = 3; b >= 0; --b) dim = (dim << 8) | static_cast<unsigned char>(bytes[offset + b]);
    offset += 4;
    if (dim == 0 || bytes.size() - offset < std::size_t{dim} * 4) {
      throw Error(Errc::kFormatError, "truncated fvecs record");
    }
    if (records.size() >= ids.size()) {
      throw Error(Errc::kSchemaError, "more vectors than ids in '" + ids_path.string() + "'");
    }
    datastore::EmbeddingRecord r{ids[records.size()], std::vector<float>(dim)};
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) {
        bits = (bits << 8) | static_cast<unsigned char>(bytes[offset + 4 * i + b]);
      }
      std::memcpy(&r.values[i], &bits, sizeof bits);
    }
    offset += std::size_t{dim} * 4;
    records.push_back(std::move(r));
  }
  if (records.size() != ids.size()) {
    throw Error(Errc::kSchemaError, "ids file lists " + std::to_string(ids.size()) +
                                        " ids for " + std::to_string(records.size()) + " vectors");
  }
  return records;
}

int run_embed_import(const std::string& input, std::string format, const std::string& ids,
                     const std::string& output, std::ostream& out) {
  if (format == "auto") format = fs::path(input).extension() == ".fvecs" ? "fvecs" : "jsonl";
  std::vector<datastore::EmbeddingRecord> records;
  if (format == "jsonl") {
    records = import_jsonl(input);
  } else if (format == "fvecs") {
    records = import_fvecs(input, ids);
  } else {
    throw Error(Errc::kInvalidArgument, "unknown format '" + format + "'");
  }
  if (records.empty()) throw Error(Errc::kSchemaError, "no embeddings in '" + input + "'");
  datastore::write_embeddings(output, records);
  out << "wrote " << records.size() << " embeddings (dim " << records.front().values.size()
      << ") to " << output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reason / query

int run_reason(const Common& common, const PipelineFlags& flags,
               const std::vector<std::string>& outfit, const std::string& category,
               const std::vector<std::string>& candidates, std::ostream& out) {
  if (category.empty() == candidates.empty()) {
    throw Error(Errc::kInvalidArgument, "pass exactly one of --category or --candidates");
  }
  Runtime runtime(resolve_config(common));
  const engine::PipelineConfig config = apply(runtime.config().pipeline, flags);
  std::vector<std::size_t> outfit_indices;
  for (const auto& id : outfit) outfit_indices.push_back(runtime.catalog().require(id));
  reasoning::TaskInput task;
  if (candidates.empty()) {
    if (runtime.catalog().category(category) == nullptr) {
      throw Error(Errc::kUnknownCategory, "unknown category '" + category + "'");
    }
    task.kind = reasoning::TaskInput::Kind::kCir;
    task.category = category;
  } else {
    task.kind = reasoning::TaskInput::Kind::kFitb;
    for (const auto& id : candidates) {
      const std::size_t i = runtime.catalog().require(id);
      task.candidates.push_back({runtime.catalog().image_path(i), runtime.catalog().item(i).image_ref});
    }
  }
  std::vector<reasoning::ImageSource> images;
  for (std::size_t i : outfit_indices) {
    images.push_back({runtime.catalog().image_path(i), runtime.catalog().item(i).image_ref});
  }
  const reasoning::ReasoningRecord record = runtime.reasoner().reason(
      images, task, config.prompt_options(runtime.config().mllm), config.model);
  out << reasoning::to_json(record).dump(2, ' ', false, json::error_handler_t::replace) << "\n";
  return kExitOk;
}

int run_query(const Common& common, const PipelineFlags& flags,
              const std::vector<std::string>& outfit, const std::string& category, std::size_t k,
              std::ostream& out) {
  Runtime runtime(resolve_config(common));
  const engine::PipelineConfig config = apply(runtime.config().pipeline, flags);
  const engine::Engine::Completion c = runtime.engine().complete(outfit, category, k, config);
  json items = json::array();
  std::size_t rank = 1;
  for (const auto& e : c.ranking.entries) {
    items.push_back(json{{"rank", rank++}, {"item_id", e.item_id}, {"score", e.score}});
  }
  const json result{{"items", items},
                    {"explanation",
                     {{"identification", c.record.identification_summary},
                      {"target_description", c.record.target_description},
                      {"attributes", reasoning::profile_to_json(c.record.profile)}}},
                    {"diagnostics", engine::diagnostics_json(c.query.diagnostics)}};
  out << result.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / ablate

struct EvalFlags {
  std::string questions;
  std::string out_path;
  unsigned parallelism = 0;
  std::vector<std::size_t> ks{10, 30, 50};
  std::optional<std::uint64_t> null_seed;
};

int run_eval(const std::string& task, const Common& common, const PipelineFlags& flags,
             const EvalFlags& e, std::ostream& out) {
  const AppConfig app = resolve_config(common);
  evaluation::EvalOptions options;
  options.parallelism = e.parallelism != 0 ? e.parallelism : app.parallelism;
  options.ks = e.ks;

  evaluation::EvalReport report;
  auto evaluate = [&](evaluation::Pipeline& pipeline, const datastore::Catalog& catalog) {
    if (task == "fitb") {
      const auto q = datastore::read_fitb(e.questions);
      datastore::validate(catalog, std::span<const datastore::FitbQuestion>(q));
      report = evaluation::eval_fitb(q, pipeline, options);
    } else if (task == "cir") {
      const auto q = datastore::read_cir(e.questions);
      datastore::validate(catalog, std::span<const datastore::CirQuery>(q));
      report = evaluation::eval_cir(q, pipeline, options);
    } else {
      const auto q = datastore::read_a100(e.questions);
      datastore::validate(catalog, std::span<const datastore::A100Question>(q));
      report = evaluation::eval_a100(q, pipeline, options);
    }
  };

  if (e.null_seed) {
    if (app.catalog_dir.empty()) throw Error(Errc::kConfigError, "no catalog directory configured");
    const datastore::Catalog catalog = datastore::load_catalog_dir(app.catalog_dir);
    evaluation::NullPipeline pipeline(catalog, *e.null_seed);
    evaluate(pipeline, catalog);
  } else {
    Runtime runtime(app);
    evaluation::EnginePipeline pipeline(runtime.engine(), apply(app.pipeline, flags));
    evaluate(pipeline, runtime.catalog());
  }
  out << evaluation::format_report(report);
  write_output(e.out_path, evaluation::to_jsonl(report));
  return kExitOk;
}

struct AblateFlags {
  std::string fitb, cir, a100, out_path;
  unsigned parallelism = 0;
  std::vector<std::size_t> ks{10, 30, 50};
};

int run_ablate(const Common& common, const PipelineFlags& flags, const AblateFlags& a,
               std::ostream& out) {
  if (a.fitb.empty() && a.cir.empty() && a.a100.empty()) {
    throw Error(Errc::kInvalidArgument, "pass at least one of --fitb, --cir, --a100");
  }
  const AppConfig app = resolve_config(common);
  Runtime runtime(app);
  evaluation::Datasets data;
  if (!a.fitb.empty()) data.fitb = datastore::read_fitb(a.fitb);
  if (!a.cir.empty()) data.cir = datastore::read_cir(a.cir);
  if (!a.a100.empty()) data.a100 = datastore::read_a100(a.a100);
  datastore::validate(runtime.catalog(), std::span<const datastore::FitbQuestion>(data.fitb));
  datastore::validate(runtime.catalog(), std::span<const datastore::CirQuery>(data.cir));
  datastore::validate(runtime.catalog(), std::span<const datastore::A100Question>(data.a100));

  evaluation::EvalOptions options;
  options.parallelism = a.parallelism != 0 ? a.parallelism : app.parallelism;
  options.ks = a.ks;
  const auto grid = evaluation::standard_grid(apply(app.pipeline, flags));
  const auto rows = evaluation::run_ablation(grid, data, runtime.engine(), options);
  out << evaluation::format_ablation_table(rows);
  write_output(a.out_path, evaluation::ablation_jsonl(rows));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

int run_serve(const Common& common, const std::optional<std::string>& host,
              const std::optional<int>& port, std::ostream& out) {
  AppConfig app = resolve_config(common);
  if (host) app.service.host = *host;
  if (port) app.service.port = *port;
  Runtime runtime(app);
  service::Service svc(runtime.engine(), app.pipeline, app.service);

  g_stop.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service::run_server(svc, app.service.host, app.service.port, g_stop, [&](int bound) {
    out << "listening on http://" << app.service.host << ":" << bound << " (mode "
        << to_string(app.mode) << ", " << runtime.catalog().size() << " items)" << std::endl;
  });
  return kExitOk;
}

}  // namespace

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::kEndpointUnavailable:
    case Errc::kTimeout:
    case Errc::kAuthFailure:
    case Errc::kRateLimited:
    case Errc::kEmbedderUnavailable:
    case Errc::kCacheMissInReplayMode:
      return kExitDependency;
    case Errc::kInvalidArgument:
    case Errc::kNonFinite:
    case Errc::kDimensionMismatch:
    case Errc::kEmptyOutfit:
    case Errc::kEmptyAttributes:
    case Errc::kEmptyCandidates:
    case Errc::kUnreadableImage:
    case Errc::kTooManyImages:
    case Errc::kFormatError:
    case Errc::kSchemaError:
    case Errc::kMissingEmbedding:
    case Errc::kDuplicateItemId:
    case Errc::kUnknownCategory:
    case Errc::kEmptyCategory:
    case Errc::kUnknownItem:
    case Errc::kEmptyCatalog:
    case Errc::kTooFewCandidates:
    case Errc::kMissingVoteShares:
    case Errc::kMissingAttributeTag:
    case Errc::kConfigError:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free outfit completion: reasoning, fusion, retrieval, evaluation",
               "stylefuse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::function<int()> action;

  // ingest validate
  Common ingest_common;
  std::string ingest_path;
  std::string ingest_kind = "auto";
  CLI::App* ingest = app.add_subcommand("ingest", "Validate input files")->require_subcommand(1);
  CLI::App* validate = ingest->add_subcommand("validate", "Validate a manifest, catalog or question set");
  validate->add_option("path", ingest_path, "File or catalog directory")->required();
  validate->add_option("--kind", ingest_kind, "Record kind (inferred from the first record by default)")
      ->check(CLI::IsMember({"auto", "manifest", "fitb", "cir", "a100"}));
  add_common(validate, ingest_common);
  validate->callback([&] {
    action = [&] { return run_ingest_validate(ingest_path, ingest_kind, ingest_common, out, err); };
  });

  // embed import
  Common embed_common;
  std::string embed_input, embed_format = "auto", embed_ids, embed_output;
  CLI::App* embed = app.add_subcommand("embed", "Embedding file tools")->require_subcommand(1);
  CLI::App* import = embed->add_subcommand("import", "Convert JSONL or .fvecs embeddings to AEMB");
  import->add_option("--input", embed_input, "Source file")->required();
  import->add_option("--format", embed_format, "Source format (by extension by default)")
      ->check(CLI::IsMember({"auto", "jsonl", "fvecs"}));
  import->add_option("--ids", embed_ids, "Item ids, one per line, in .fvecs order");
  import->add_option("--output", embed_output, "Destination .aemb file")->required();
  add_common(import, embed_common, false);
  import->callback([&] {
    action = [&] { return run_embed_import(embed_input, embed_format, embed_ids, embed_output, out); };
  });

  // reason
  Common reason_common;
  PipelineFlags reason_flags;
  std::vector<std::string> reason_outfit, reason_candidates;
  std::string reason_category;
  CLI::App* reason = app.add_subcommand("reason", "Run the reasoning stage for one query");
  reason->add_option("--outfit", reason_outfit, "Outfit item ids (comma-separated)")
      ->required()
      ->delimiter(',');
  reason->add_option("--category", reason_category, "Target category (retrieval task)");
  reason->add_option("--candidates", reason_candidates, "Candidate item ids (fill-in-the-blank)")
      ->delimiter(',');
  add_common(reason, reason_common);
  add_pipeline_flags(reason, reason_flags, false);
  reason->callback([&] {
    action = [&] {
      return run_reason(reason_common, reason_flags, reason_outfit, reason_category,
                        reason_candidates, out);
    };
  });

  // query
  Common query_common;
  PipelineFlags query_flags;
  std::vector<std::string> query_outfit;
  std::string query_category;
  std::size_t query_k = 10;
  CLI::App* query = app.add_subcommand("query", "Complete one outfit and print ranking and explanation");
  query->add_option("--outfit", query_outfit, "Outfit item ids (comma-separated)")
      ->required()
      ->delimiter(',');
  query->add_option("--category", query_category, "Target category")->required();
  query->add_option("--k", query_k, "Number of results")->check(CLI::Range(1, 100));
  add_common(query, query_common);
  add_pipeline_flags(query, query_flags);
  query->callback([&] {
    action = [&] {
      return run_query(query_common, query_flags, query_outfit, query_category, query_k, out);
    };
  });

  // eval fitb|cir|a100
  Common eval_common;
  PipelineFlags eval_flags;
  EvalFlags eval_opts;
  std::string eval_task;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a question set")->require_subcommand(1);
  for (const char* task : {"fitb", "cir", "a100"}) {
    CLI::App* sub = eval->add_subcommand(task, std::string("Evaluate ") + task + " questions");
    sub->add_option("--questions", eval_opts.questions, "Question file (JSONL)")->required();
    sub->add_option("--out", eval_opts.out_path, "Write the machine-readable report (JSONL) here");
    sub->add_option("--parallelism", eval_opts.parallelism, "Questions evaluated concurrently")
        ->check(CLI::PositiveNumber);
    sub->add_option("--null-seed", eval_opts.null_seed,
                    "Use the seeded uniform-random pipeline instead of the engine");
    if (std::string(task) == "cir") {
      sub->add_option("--ks", eval_opts.ks, "Recall cutoffs (comma-separated)")
          ->delimiter(',')
          ->check(CLI::PositiveNumber);
    }
    add_common(sub, eval_common);
    add_pipeline_flags(sub, eval_flags);
    sub->callback([&, task] {
      eval_task = task;
      action = [&] { return run_eval(eval_task, eval_common, eval_flags, eval_opts, out); };
    });
  }

  // ablate
  Common ablate_common;
  PipelineFlags ablate_flags;
  AblateFlags ablate_opts;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Run the ablation grid (full, ide-off, svaf-off, svaf+aes-off)");
  ablate->add_option("--fitb", ablate_opts.fitb, "FITB question file");
  ablate->add_option("--cir", ablate_opts.cir, "CIR query file");
  ablate->add_option("--a100", ablate_opts.a100, "A100-style question file");
  ablate->add_option("--out", ablate_opts.out_path, "Write machine-readable rows (JSONL) here");
  ablate->add_option("--parallelism", ablate_opts.parallelism, "Questions evaluated concurrently")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--ks", ablate_opts.ks, "Recall cutoffs (comma-separated)")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  add_common(ablate, ablate_common);
  ablate->add_option("--model", ablate_flags.model, "MLLM model name override");
  ablate->add_option("--tau", ablate_flags.tau, "Saliency softmax temperature")
      ->check(CLI::PositiveNumber);
  ablate->callback([&] {
    action = [&] { return run_ablate(ablate_common, ablate_flags, ablate_opts, out); };
  });

  // serve
  Common serve_common;
  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  CLI::App* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--host", serve_host, "Bind address (overrides the config)");
  serve->add_option("--port", serve_port, "Port, 0 for any free port (overrides the config)")
      ->check(CLI::Range(0, 65535));
  add_common(serve, serve_common);
  serve->callback([&] {
    action = [&] { return run_serve(serve_common, serve_host, serve_port, out); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    // CLI11 stops at the first level; nested commands (eval fitb, ...) are listed too.
    out << app.help("", CLI::AppFormatMode::All);
    for (const CLI::App* group : app.get_subcommands({})) {
      for (const CLI::App* leaf : group->get_subcommands({})) {
        out << "\n" << group->get_name() << " " << leaf->help("", CLI::AppFormatMode::Sub);
      }
    }
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }
  try {
    return action ? action() : kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace stylefuse::cli
