#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylefuse/attributes.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/engine.hpp"

namespace stylefuse::evaluation {

using engine::PipelineConfig;

// ---------------------------------------------------------------------------
// Pipelines under evaluation
// ---------------------------------------------------------------------------

struct ChoiceOutcome {
  std::vector<double> scores;
  std::size_t chosen = 0;
  nlohmann::json diagnostics = nlohmann::json::object();
};

struct RankOutcome {
  std::vector<std::string> ranked_ids;  // best first
  nlohmann::json diagnostics = nlohmann::json::object();
};

// Implementations must be safe to call concurrently and deterministic per
// question.
class Pipeline {
 public:
  virtual ~Pipeline() = default;
  virtual ChoiceOutcome choose(const std::string& question_id,
                               std::span<const std::string> outfit_ids,
                               std::span<const std::string> candidate_ids) = 0;
  virtual RankOutcome rank(const std::string& question_id, std::span<const std::string> outfit_ids,
                           const std::string& category, std::size_t k) = 0;
  // Snapshot embedded in every report.
  virtual nlohmann::json describe() const = 0;
};

// The full reasoning + fusion + retrieval stack.
class EnginePipeline final : public Pipeline {
 public:
  EnginePipeline(engine::Engine& engine, PipelineConfig config);
  ChoiceOutcome choose(const std::string& question_id, std::span<const std::string> outfit_ids,
                       std::span<const std::string> candidate_ids) override;
  RankOutcome rank(const std::string& question_id, std::span<const std::string> outfit_ids,
                   const std::string& category, std::size_t k) override;
  nlohmann::json describe() const override;
  const PipelineConfig& config() const noexcept { return config_; }

 private:
  engine::Engine& engine_;
  PipelineConfig config_;
};

// Uniform random choices, seeded per question: seed ^ hash(question_id).
class NullPipeline final : public Pipeline {
 public:
  NullPipeline(const datastore::Catalog& catalog, std::uint64_t seed);
  ChoiceOutcome choose(const std::string& question_id, std::span<const std::string> outfit_ids,
                       std::span<const std::string> candidate_ids) override;
  RankOutcome rank(const std::string& question_id, std::span<const std::string> outfit_ids,
                   const std::string& category, std::size_t k) override;
  nlohmann::json describe() const override;

 private:
  std::uint64_t question_seed(const std::string& question_id) const;
  const datastore::Catalog& catalog_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kSoftMetric = "mean_vote_share_of_chosen";

struct QuestionRecord {
  std::string question_id;
  std::string task;  // "fitb" | "cir" | "lat" | "aat"
  std::optional<std::size_t> chosen;
  bool correct = false;
  std::vector<double> scores;
  std::optional<std::string> attribute;       // aat
  std::optional<double> vote_share;           // lat: share of the chosen option
  std::vector<std::string> top_ids;           // cir: top max(K) ids
  std::optional<std::size_t> ground_truth_rank;  // cir: 1-based, absent past max(K)
  nlohmann::json diagnostics = nlohmann::json::object();
};

struct EvalReport {
  nlohmann::json config = nlohmann::json::object();
  std::optional<double> fitb_accuracy;
  std::map<std::size_t, double> recall_at;
  std::optional<double> lat_hard;
  std::optional<double> lat_soft;
  std::map<Attribute, double> aat_per_attribute;
  std::optional<double> aat_total;
  std::vector<std::size_t> ks;  // recall cutoffs, ascending
  // Sorted by question_id within each evaluated set; sets in evaluation order.
  std::vector<QuestionRecord> records;
};

struct EvalOptions {
  unsigned parallelism = 1;
  std::vector<std::size_t> ks{10, 30, 50};
};

// Per-question errors are rethrown with the question id (and pipeline label)
// prefixed, keeping their code. With several failures, the one belonging to
// the lowest question index wins.
EvalReport eval_fitb(std::span<const datastore::FitbQuestion> questions, Pipeline& pipeline,
                     const EvalOptions& options = {});
EvalReport eval_cir(std::span<const datastore::CirQuery> queries, Pipeline& pipeline,
                    const EvalOptions& options = {});
EvalReport eval_a100(std::span<const datastore::A100Question> questions, Pipeline& pipeline,
                     const EvalOptions& options = {});

// Aggregates are recomputed from the combined records.
EvalReport merge(std::vector<EvalReport> parts);

// Recomputes every aggregate from the records. Used by merge and by tests.
void recompute_aggregates(EvalReport& report);

nlohmann::json summary_json(const EvalReport& report);
nlohmann::json to_json(const QuestionRecord& record);
// One summary line followed by one line per question record.
std::string to_jsonl(const EvalReport& report);
std::string format_report(const EvalReport& report);

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

struct Datasets {
  std::vector<datastore::FitbQuestion> fitb;
  std::vector<datastore::CirQuery> cir;
  std::vector<datastore::A100Question> a100;
};

struct AblationRow {
  PipelineConfig config;
  EvalReport report;
};

// full, Ide.-off, SVAF-off, (SVAF + Aes.)-off; all other fields from base.
std::vector<PipelineConfig> standard_grid(const PipelineConfig& base = {});

std::vector<AblationRow> run_ablation(std::span<const PipelineConfig> grid,
                                      const Datasets& datasets, engine::Engine& engine,
                                      const EvalOptions& options = {});

std::string format_ablation_table(std::span<const AblationRow> rows);
// One line per row: {"label", "config", "summary"} followed by its records.
std::string ablation_jsonl(std::span<const AblationRow> rows);

}  // namespace stylefuse::evaluation
