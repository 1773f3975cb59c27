#include "stylefuse/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "stylefuse/error.hpp"

namespace stylefuse::evaluation {
namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pipeline_label(const Pipeline& pipeline) {
  const json d = pipeline.describe();
  auto it = d.find("label");
  return it != d.end() && it->is_string() ? it->get<std::string>() : std::string();
}

// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Every index is
// attempted; the exception of the lowest failing index is rethrown.
template <typename Fn>
void for_each_index(std::size_t n, unsigned parallelism, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

[[noreturn]] void rethrow_in_context(const std::string& label, const std::string& question_id) {
  const std::string context =
      (label.empty() ? "" : "config '" + label + "' ") + "question '" + question_id + "'";
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), context + ": " + e.detail());
  }
}

void sort_records(std::vector<QuestionRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const QuestionRecord& a, const QuestionRecord& b) {
                     return a.question_id < b.question_id;
                   });
}

std::vector<std::size_t> normalized_ks(std::vector<std::size_t> ks) {
  if (ks.empty()) throw Error(Errc::kInvalidArgument, "at least one recall cutoff is required");
  for (std::size_t k : ks) {
    if (k == 0) throw Error(Errc::kInvalidArgument, "recall cutoffs must be positive");
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

std::string check(bool on) { return on ? "✓" : "✗"; }

}  // namespace

// ---------------------------------------------------------------------------
// Pipelines

EnginePipeline::EnginePipeline(engine::Engine& engine, PipelineConfig config)
    : engine_(engine), config_(std::move(config)) {
  engine::validate(config_);
}

ChoiceOutcome EnginePipeline::choose(const std::string&, std::span<const std::string> outfit_ids,
                                     std::span<const std::string> candidate_ids) {
  engine::Engine::Choice choice = engine_.choose(outfit_ids, candidate_ids, config_);
  return ChoiceOutcome{std::move(choice.scores.scores), choice.scores.argmax,
                       engine::diagnostics_json(choice.query.diagnostics)};
}

RankOutcome EnginePipeline::rank(const std::string&, std::span<const std::string> outfit_ids,
                                 const std::string& category, std::size_t k) {
  engine::Engine::Completion completion = engine_.complete(outfit_ids, category, k, config_);
  RankOutcome out;
  for (const auto& entry : completion.ranking.entries) out.ranked_ids.push_back(entry.item_id);
  out.diagnostics = engine::diagnostics_json(completion.query.diagnostics);
  return out;
}

json EnginePipeline::describe() const {
  json j = engine::to_json(config_);
  if (config_.model.empty()) j["model"] = engine_.reasoner().config().model;
  j["mode"] = engine_.reasoner().mode() == reasoning::CacheMode::kReplay ? "replay" : "live";
  j["embedder"] = engine_.embedder().model();
  return j;
}

NullPipeline::NullPipeline(const datastore::Catalog& catalog, std::uint64_t seed)
    : catalog_(catalog), seed_(seed) {}

std::uint64_t NullPipeline::question_seed(const std::string& question_id) const {
  return seed_ ^ fnv1a(question_id);
}

ChoiceOutcome NullPipeline::choose(const std::string& question_id, std::span<const std::string>,
                                   std::span<const std::string> candidate_ids) {
  if (candidate_ids.size() < 2) {
    throw Error(Errc::kTooFewCandidates, "FITB needs at least two candidates");
  }
  std::mt19937_64 rng(question_seed(question_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ChoiceOutcome out;
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) out.scores.push_back(unit(rng));
  out.chosen = static_cast<std::size_t>(
      std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
  return out;
}

RankOutcome NullPipeline::rank(const std::string& question_id, std::span<const std::string>,
                               const std::string& category, std::size_t k) {
  const std::vector<std::size_t>* members = catalog_.category(category);
  if (members == nullptr) throw Error(Errc::kUnknownCategory, "unknown category '" + category + "'");
  std::vector<std::size_t> order = *members;
  std::mt19937_64 rng(question_seed(question_id));
  std::shuffle(order.begin(), order.end(), rng);
  RankOutcome out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    out.ranked_ids.push_back(catalog_.item(order[i]).item_id);
  }
  return out;
}

json NullPipeline::describe() const {
  return json{{"label", "null"}, {"pipeline", "uniform-random"}, {"seed", seed_}};
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport eval_fitb(std::span<const datastore::FitbQuestion> questions, Pipeline& pipeline,
                     const EvalOptions& options) {
  const std::string label = pipeline_label(pipeline);
  std::vector<QuestionRecord> records(questions.size());
  for_each_index(questions.size(), options.parallelism, [&](std::size_t i) {
    const datastore::FitbQuestion& q = questions[i];
    try {
      ChoiceOutcome outcome = pipeline.choose(q.question_id, q.outfit_item_ids, q.candidate_item_ids);
      QuestionRecord& r = records[i];
      r.question_id = q.question_id;
      r.task = "fitb";
      r.chosen = outcome.chosen;
      r.correct = outcome.chosen == q.answer_index;
      r.scores = std::move(outcome.scores);
      r.diagnostics = std::move(outcome.diagnostics);
    } catch (...) {
      rethrow_in_context(label, q.question_id);
    }
  });
  EvalReport report;
  report.config = pipeline.describe();
  report.records = std::move(records);
  sort_records(report.records);
  recompute_aggregates(report);
  return report;
}

EvalReport eval_cir(std::span<const datastore::CirQuery> queries, Pipeline& pipeline,
                    const EvalOptions& options) {
  const std::vector<std::size_t> ks = normalized_ks(options.ks);
  const std::size_t max_k = ks.back();
  const std::string label = pipeline_label(pipeline);
  std::vector<QuestionRecord> records(queries.size());
  for_each_index(queries.size(), options.parallelism, [&](std::size_t i) {
    const datastore::CirQuery& q = queries[i];
    try {
      RankOutcome outcome = pipeline.rank(q.query_id, q.outfit_item_ids, q.target_category, max_k);
      QuestionRecord& r = records[i];
      r.question_id = q.query_id;
      r.task = "cir";
      auto it = std::find(outcome.ranked_ids.begin(), outcome.ranked_ids.end(),
                          q.ground_truth_item_id);
      if (it != outcome.ranked_ids.end()) {
        r.ground_truth_rank = static_cast<std::size_t>(it - outcome.ranked_ids.begin()) + 1;
      }
      r.correct = r.ground_truth_rank == std::optional<std::size_t>(1);
      r.top_ids = std::move(outcome.ranked_ids);
      r.diagnostics = std::move(outcome.diagnostics);
    } catch (...) {
      rethrow_in_context(label, q.query_id);
    }
  });
  EvalReport report;
  report.config = pipeline.describe();
  report.ks = ks;
  report.records = std::move(records);
  sort_records(report.records);
  recompute_aggregates(report);
  return report;
}

EvalReport eval_a100(std::span<const datastore::A100Question> questions, Pipeline& pipeline,
                     const EvalOptions& options) {
  for (const auto& q : questions) {
    if (q.test_kind == datastore::TestKind::kLat && !q.vote_shares) {
      throw Error(Errc::kMissingVoteShares, "question '" + q.question_id + "' has no vote_shares");
    }
    if (q.test_kind == datastore::TestKind::kAat && !q.attribute_tag) {
      throw Error(Errc::kMissingAttributeTag,
                  "question '" + q.question_id + "' has no attribute_tag");
    }
  }
  const std::string label = pipeline_label(pipeline);
  std::vector<QuestionRecord> records(questions.size());
  for_each_index(questions.size(), options.parallelism, [&](std::size_t i) {
    const datastore::A100Question& q = questions[i];
    try {
      ChoiceOutcome outcome = pipeline.choose(q.question_id, q.outfit_item_ids, q.candidate_item_ids);
      QuestionRecord& r = records[i];
      r.question_id = q.question_id;
      r.chosen = outcome.chosen;
      r.correct = outcome.chosen == q.answer_index;
      if (q.test_kind == datastore::TestKind::kLat) {
        r.task = "lat";
        r.vote_share = q.vote_shares->at(outcome.chosen);
      } else {
        r.task = "aat";
        r.attribute = std::string(to_string(*q.attribute_tag));
      }
      r.scores = std::move(outcome.scores);
      r.diagnostics = std::move(outcome.diagnostics);
    } catch (...) {
      rethrow_in_context(label, q.question_id);
    }
  });
  EvalReport report;
  report.config = pipeline.describe();
  report.records = std::move(records);
  sort_records(report.records);
  recompute_aggregates(report);
  return report;
}

void recompute_aggregates(EvalReport& report) {
  std::size_t fitb_n = 0, fitb_ok = 0, cir_n = 0, lat_n = 0, lat_ok = 0, aat_n = 0, aat_ok = 0;
  double lat_share = 0.0;
  std::map<std::size_t, std::size_t> hits;
  std::map<Attribute, std::pair<std::size_t, std::size_t>> per_attribute;  // correct, total
  for (const QuestionRecord& r : report.records) {
    if (r.task == "fitb") {
      ++fitb_n;
      fitb_ok += r.correct ? 1 : 0;
    } else if (r.task == "cir") {
      ++cir_n;
      for (std::size_t k : report.ks) {
        if (r.ground_truth_rank && *r.ground_truth_rank <= k) ++hits[k];
      }
    } else if (r.task == "lat") {
      ++lat_n;
      lat_ok += r.correct ? 1 : 0;
      lat_share += r.vote_share.value_or(0.0);
    } else if (r.task == "aat") {
      ++aat_n;
      aat_ok += r.correct ? 1 : 0;
      const std::optional<Attribute> tag = parse_attribute(r.attribute.value_or(""));
      if (!tag) throw Error(Errc::kMissingAttributeTag, "record '" + r.question_id + "' has no attribute");
      auto& [ok, total] = per_attribute[*tag];
      ok += r.correct ? 1 : 0;
      ++total;
    }
  }
  auto frac = [](std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); };
  report.fitb_accuracy = fitb_n ? std::optional<double>(frac(fitb_ok, fitb_n)) : std::nullopt;
  report.recall_at.clear();
  if (cir_n) {
    for (std::size_t k : report.ks) report.recall_at[k] = frac(hits[k], cir_n);
  }
  report.lat_hard = lat_n ? std::optional<double>(frac(lat_ok, lat_n)) : std::nullopt;
  report.lat_soft =
      lat_n ? std::optional<double>(lat_share / static_cast<double>(lat_n)) : std::nullopt;
  report.aat_per_attribute.clear();
  for (const auto& [a, counts] : per_attribute) {
    report.aat_per_attribute[a] = frac(counts.first, counts.second);
  }
  report.aat_total = aat_n ? std::optional<double>(frac(aat_ok, aat_n)) : std::nullopt;
}

EvalReport merge(std::vector<EvalReport> parts) {
  EvalReport out;
  std::set<std::size_t> ks;
  for (EvalReport& part : parts) {
    if (out.config.empty()) out.config = part.config;
    ks.insert(part.ks.begin(), part.ks.end());
    for (QuestionRecord& r : part.records) out.records.push_back(std::move(r));
  }
  out.ks.assign(ks.begin(), ks.end());
  recompute_aggregates(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json summary_json(const EvalReport& report) {
  json j{{"config", report.config}};
  std::map<std::string, std::size_t> counts;
  for (const auto& r : report.records) ++counts[r.task];
  j["counts"] = counts;
  if (report.fitb_accuracy) j["fitb_accuracy"] = *report.fitb_accuracy;
  if (!report.recall_at.empty()) {
    json recall = json::object();
    for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
    j["recall_at"] = recall;
  }
  if (report.lat_hard) j["lat_hard"] = *report.lat_hard;
  if (report.lat_soft) {
    j["lat_soft"] = *report.lat_soft;
    j["soft_metric"] = kSoftMetric;
  }
  if (!report.aat_per_attribute.empty()) {
    json per = json::object();
    for (const auto& [a, v] : report.aat_per_attribute) per[std::string(to_string(a))] = v;
    j["aat_per_attribute"] = per;
  }
  if (report.aat_total) j["aat_total"] = *report.aat_total;
  return j;
}

json to_json(const QuestionRecord& r) {
  json j{{"question_id", r.question_id}, {"task", r.task}, {"correct", r.correct}};
  if (r.chosen) j["chosen"] = *r.chosen;
  if (!r.scores.empty()) j["scores"] = r.scores;
  if (r.attribute) j["attribute"] = *r.attribute;
  if (r.vote_share) j["vote_share"] = *r.vote_share;
  if (r.task == "cir") {
    j["top_ids"] = r.top_ids;
    j["ground_truth_rank"] = r.ground_truth_rank ? json(*r.ground_truth_rank) : json(nullptr);
  }
  j["diagnostics"] = r.diagnostics;
  return j;
}

std::string to_jsonl(const EvalReport& report) {
  std::string out = json{{"summary", summary_json(report)}}.dump() + "\n";
  for (const auto& r : report.records) out += to_json(r).dump() + "\n";
  return out;
}

std::string format_report(const EvalReport& report) {
  std::map<std::string, std::size_t> total, correct;
  for (const auto& r : report.records) {
    ++total[r.task];
    correct[r.task] += r.correct ? 1 : 0;
  }
  std::ostringstream os;
  const json& c = report.config;
  if (c.contains("label") && !c["label"].get<std::string>().empty()) {
    os << "config          " << c["label"].get<std::string>() << "\n";
  }
  if (c.contains("model")) os << "model           " << c["model"].get<std::string>() << "\n";
  if (report.fitb_accuracy) {
    os << "FITB accuracy   " << fixed3(*report.fitb_accuracy) << "  (" << correct["fitb"] << "/"
       << total["fitb"] << ")\n";
  }
  for (const auto& [k, v] : report.recall_at) {
    std::string name = "R@" + std::to_string(k);
    name.resize(16, ' ');
    os << name << fixed3(v) << "\n";
  }
  if (report.lat_hard) {
    os << "LAT hard        " << fixed3(*report.lat_hard) << "  (" << correct["lat"] << "/"
       << total["lat"] << ")\n";
    os << "LAT soft        " << fixed3(*report.lat_soft) << "  [" << kSoftMetric << "]\n";
  }
  for (const auto& [a, v] : report.aat_per_attribute) {
    std::string name = "AAT " + std::string(to_string(a));
    name.resize(16, ' ');
    os << name << fixed3(v) << "\n";
  }
  if (report.aat_total) {
    os << "AAT total       " << fixed3(*report.aat_total) << "  (" << correct["aat"] << "/"
       << total["aat"] << ")\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Ablations

std::vector<PipelineConfig> standard_grid(const PipelineConfig& base) {
  PipelineConfig full = base;
  full.label = "full";
  full.identify_step = full.svaf_enabled = full.aesthetic_thoughts = true;
  PipelineConfig ide_off = full;
  ide_off.label = "ide-off";
  ide_off.identify_step = false;
  PipelineConfig svaf_off = full;
  svaf_off.label = "svaf-off";
  svaf_off.svaf_enabled = false;
  PipelineConfig svaf_aes_off = svaf_off;
  svaf_aes_off.label = "svaf+aes-off";
  svaf_aes_off.aesthetic_thoughts = false;
  return {full, ide_off, svaf_off, svaf_aes_off};
}

std::vector<AblationRow> run_ablation(std::span<const PipelineConfig> grid,
                                      const Datasets& datasets, engine::Engine& engine,
                                      const EvalOptions& options) {
  std::vector<AblationRow> rows;
  for (const PipelineConfig& config : grid) {
    EnginePipeline pipeline(engine, config);
    std::vector<EvalReport> parts;
    if (!datasets.fitb.empty()) parts.push_back(eval_fitb(datasets.fitb, pipeline, options));
    if (!datasets.cir.empty()) parts.push_back(eval_cir(datasets.cir, pipeline, options));
    if (!datasets.a100.empty()) parts.push_back(eval_a100(datasets.a100, pipeline, options));
    EvalReport report = merge(std::move(parts));
    if (report.config.empty()) report.config = pipeline.describe();
    rows.push_back(AblationRow{config, std::move(report)});
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::vector<std::string> header{"MLLM", "Ide.", "SVAF", "Aes.", "LATs", "mLATs", "AATs"};
  bool has_fitb = false;
  std::set<std::size_t> ks;
  for (const auto& row : rows) {
    has_fitb = has_fitb || row.report.fitb_accuracy.has_value();
    for (const auto& [k, v] : row.report.recall_at) ks.insert(k);
  }
  if (has_fitb) header.push_back("FITB");
  for (std::size_t k : ks) header.push_back("R@" + std::to_string(k));

  auto opt = [](const std::optional<double>& v) { return v ? fixed3(*v) : std::string("-"); };
  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    const json& c = row.report.config;
    std::vector<std::string> cells{
        c.value("model", row.config.model), check(row.config.identify_step),
        check(row.config.svaf_enabled), check(row.config.aesthetic_thoughts),
        opt(row.report.lat_hard), opt(row.report.lat_soft), opt(row.report.aat_total)};
    if (has_fitb) cells.push_back(opt(row.report.fitb_accuracy));
    for (std::size_t k : ks) {
      auto it = row.report.recall_at.find(k);
      cells.push_back(it == row.report.recall_at.end() ? "-" : fixed3(it->second));
    }
    body.push_back(std::move(cells));
  }

  // Width in code points so the check marks line up.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    widths[i] = width(header[i]);
    for (const auto& cells : body) widths[i] = std::max(widths[i], width(cells[i]));
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += " " + cells[i] + std::string(widths[i] - width(cells[i]), ' ') + " |";
    }
    return out + "\n";
  };
  std::string out = line(header) + "|";
  for (std::size_t w : widths) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (const auto& cells : body) out += line(cells);
  return out;
}

std::string ablation_jsonl(std::span<const AblationRow> rows) {
  std::string out;
  for (const auto& row : rows) {
    out += json{{"label", row.config.label},
                {"config", engine::to_json(row.config)},
                {"summary", summary_json(row.report)}}
               .dump() +
           "\n";
    for (const auto& r : row.report.records) {
      json j = to_json(r);
      j["label"] = row.config.label;
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace stylefuse::evaluation
