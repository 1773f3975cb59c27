#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylefuse/datastore.hpp"
#include "stylefuse/embedder.hpp"
#include "stylefuse/fusion.hpp"
#include "stylefuse/reasoning.hpp"
#include "stylefuse/retrieval.hpp"
#include "stylefuse/transcript_cache.hpp"

namespace stylefuse::engine {

// One point of the ablation grid. The reasoning toggles (identify_step,
// aesthetic_thoughts) change the prompt and therefore the transcript cache
// key; svaf_enabled only changes fusion.
struct PipelineConfig {
  std::string label;
  bool identify_step = true;
  bool svaf_enabled = true;
  bool aesthetic_thoughts = true;
  double tau = fusion::kDefaultTau;
  int aava_sign = +1;
  double entropy_temperature = 1.0;
  std::size_t pool_size = datastore::kDefaultPoolSize;
  std::string model;  // empty: the reasoner's configured model
  bool restrict_category = true;

  reasoning::PromptOptions prompt_options(const reasoning::MllmConfig& mllm) const;
  fusion::FusionConfig fusion_config() const;
};

// Throws kConfigError.
void validate(const PipelineConfig& config);
nlohmann::json to_json(const PipelineConfig& config);
// Missing keys keep their defaults. Throws kConfigError on wrong types.
PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig base = {});

// {"saliency_weights", "attribute_scores", "attribute_weights", "cue_entropies",
// "gates"}; {} for empty diagnostics.
nlohmann::json diagnostics_json(const fusion::FusionDiagnostics& diagnostics);

// End-to-end composition: reasoning, text embedding, fusion, retrieval.
// Shares the catalog read-only; safe to call concurrently.
class Engine {
 public:
  Engine(const datastore::Catalog& catalog, reasoning::Reasoner& reasoner,
         embedding::TextEmbedder& embedder);

  struct Reasoned {
    reasoning::ReasoningRecord record;
    UnitVector target_text;
    fusion::AttributeVectors attributes;
  };

  struct Completion {
    reasoning::ReasoningRecord record;
    fusion::QueryVector query;
    retrieval::RankedResult ranking;
  };

  struct Choice {
    reasoning::ReasoningRecord record;
    fusion::QueryVector query;
    retrieval::FitbScores scores;
  };

  Reasoned reason(std::span<const std::size_t> outfit, const reasoning::TaskInput& task,
                  const PipelineConfig& config);

  // Complementary item retrieval within (by default) the target category.
  Completion complete(std::span<const std::string> outfit_ids, const std::string& category,
                      std::size_t k, const PipelineConfig& config, unsigned threads = 1);

  // Fill-in-the-blank: the candidates' image embeddings are the gating set.
  Choice choose(std::span<const std::string> outfit_ids,
                std::span<const std::string> candidate_ids, const PipelineConfig& config);

  const datastore::Catalog& catalog() const noexcept { return catalog_; }
  reasoning::Reasoner& reasoner() noexcept { return reasoner_; }
  embedding::TextEmbedder& embedder() noexcept { return embedder_; }

 private:
  std::vector<std::size_t> resolve(std::span<const std::string> ids) const;
  std::vector<UnitVector> image_embeddings(std::span<const std::size_t> indices) const;
  reasoning::ImageSource image_source(std::size_t index) const;

  const datastore::Catalog& catalog_;
  reasoning::Reasoner& reasoner_;
  embedding::TextEmbedder& embedder_;
};

}  // namespace stylefuse::engine
