#include "stylefuse/engine.hpp"

#include "stylefuse/error.hpp"

namespace stylefuse::engine {
namespace {

using json = nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::kConfigError, std::string("pipeline field '") + key + "' has the wrong type");
  }
}

}  // namespace

reasoning::PromptOptions PipelineConfig::prompt_options(const reasoning::MllmConfig& mllm) const {
  reasoning::PromptOptions options;
  options.identify_step = identify_step;
  options.aesthetic_thoughts = aesthetic_thoughts;
  options.max_images = mllm.max_images;
  options.transport = mllm.transport;
  options.image_base_url = mllm.image_base_url;
  return options;
}

fusion::FusionConfig PipelineConfig::fusion_config() const {
  return fusion::FusionConfig{tau, aava_sign, entropy_temperature, svaf_enabled};
}

void validate(const PipelineConfig& config) {
  if (!(config.tau > 0.0)) throw Error(Errc::kConfigError, "tau must be positive");
  if (config.aava_sign != 1 && config.aava_sign != -1) {
    throw Error(Errc::kConfigError, "aava_sign must be +1 or -1");
  }
  if (!(config.entropy_temperature > 0.0)) {
    throw Error(Errc::kConfigError, "entropy_temperature must be positive");
  }
  if (config.pool_size == 0) throw Error(Errc::kConfigError, "pool_size must be at least 1");
}

json to_json(const PipelineConfig& config) {
  return json{{"label", config.label},
              {"identify_step", config.identify_step},
              {"svaf_enabled", config.svaf_enabled},
              {"aesthetic_thoughts", config.aesthetic_thoughts},
              {"tau", config.tau},
              {"aava_sign", config.aava_sign},
              {"entropy_temperature", config.entropy_temperature},
              {"pool_size", config.pool_size},
              {"model", config.model},
              {"restrict_category", config.restrict_category}};
}

PipelineConfig pipeline_from_json(const json& j, PipelineConfig base) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "pipeline config must be an object");
  read_field(j, "label", base.label);
  read_field(j, "identify_step", base.identify_step);
  read_field(j, "svaf_enabled", base.svaf_enabled);
  read_field(j, "aesthetic_thoughts", base.aesthetic_thoughts);
  read_field(j, "tau", base.tau);
  read_field(j, "aava_sign", base.aava_sign);
  read_field(j, "entropy_temperature", base.entropy_temperature);
  read_field(j, "pool_size", base.pool_size);
  read_field(j, "model", base.model);
  read_field(j, "restrict_category", base.restrict_category);
  validate(base);
  return base;
}

json diagnostics_json(const fusion::FusionDiagnostics& d) {
  json out = json::object();
  if (d.empty()) return out;
  auto by_attribute = [](const std::map<Attribute, double>& m) {
    json j = json::object();
    for (const auto& [a, v] : m) j[std::string(to_string(a))] = v;
    return j;
  };
  out["saliency_weights"] = d.saliency_weights;
  out["attribute_scores"] = by_attribute(d.attribute_scores);
  out["attribute_weights"] = by_attribute(d.attribute_weights);
  out["cue_entropies"] = d.cue_entropies;
  out["gates"] = d.gates;
  return out;
}

Engine::Engine(const datastore::Catalog& catalog, reasoning::Reasoner& reasoner,
               embedding::TextEmbedder& embedder)
    : catalog_(catalog), reasoner_(reasoner), embedder_(embedder) {}

std::vector<std::size_t> Engine::resolve(std::span<const std::string> ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(catalog_.require(id));
  return out;
}

std::vector<UnitVector> Engine::image_embeddings(std::span<const std::size_t> indices) const {
  std::vector<UnitVector> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(catalog_.image_embedding(i));
  return out;
}

reasoning::ImageSource Engine::image_source(std::size_t index) const {
  return reasoning::ImageSource{catalog_.image_path(index), catalog_.item(index).image_ref};
}

Engine::Reasoned Engine::reason(std::span<const std::size_t> outfit,
                                const reasoning::TaskInput& task, const PipelineConfig& config) {
  std::vector<reasoning::ImageSource> images;
  images.reserve(outfit.size());
  for (std::size_t i : outfit) images.push_back(image_source(i));
  reasoning::ReasoningRecord record = reasoner_.reason(
      images, task, config.prompt_options(reasoner_.config()), config.model);

  std::vector<std::string> texts{record.target_description};
  std::vector<Attribute> attributes;
  if (config.aesthetic_thoughts) {
    for (const auto& [attribute, thought] : record.profile.thoughts) {
      attributes.push_back(attribute);
      texts.push_back(reasoning::attribute_text(thought));
    }
  }
  const std::vector<Embedding> embedded = embedder_.embed(texts);
  for (const Embedding& e : embedded) {
    if (e.dim() != catalog_.dim()) {
      throw Error(Errc::kDimensionMismatch, "embedder '" + embedder_.model() + "' returned dim " +
                                                std::to_string(e.dim()) + ", catalog dim is " +
                                                std::to_string(catalog_.dim()));
    }
  }
  Reasoned out{std::move(record), normalize(embedded.front()), {}};
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    out.attributes.emplace(attributes[i], normalize(embedded[i + 1]));
  }
  return out;
}

Engine::Completion Engine::complete(std::span<const std::string> outfit_ids,
                                    const std::string& category, std::size_t k,
                                    const PipelineConfig& config, unsigned threads) {
  validate(config);
  if (k == 0) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  if (outfit_ids.empty()) throw Error(Errc::kEmptyOutfit, "outfit has no items");
  const std::vector<std::size_t> outfit = resolve(outfit_ids);
  if (catalog_.category(category) == nullptr) {
    throw Error(Errc::kUnknownCategory, "unknown category '" + category + "'");
  }

  reasoning::TaskInput task;
  task.kind = reasoning::TaskInput::Kind::kCir;
  task.category = category;
  Reasoned reasoned = reason(outfit, task, config);

  const std::vector<UnitVector> outfit_vectors = image_embeddings(outfit);
  const fusion::PoolProvider pool = [&](const fusion::CueSet& cues) {
    std::vector<UnitVector> vectors;
    for (auto& entry : datastore::candidate_pool(catalog_, category, cues, config.pool_size)) {
      vectors.push_back(std::move(entry.vector));
    }
    return vectors;
  };
  fusion::QueryVector query = fusion::build_query(outfit_vectors, reasoned.target_text,
                                                  reasoned.attributes, pool,
                                                  config.fusion_config());
  const std::optional<std::string> filter =
      config.restrict_category ? std::optional<std::string>(category) : std::nullopt;
  retrieval::RankedResult ranking = retrieval::retrieve_top_k(query.q, catalog_, k, filter, threads);
  return Completion{std::move(reasoned.record), std::move(query), std::move(ranking)};
}

Engine::Choice Engine::choose(std::span<const std::string> outfit_ids,
                              std::span<const std::string> candidate_ids,
                              const PipelineConfig& config) {
  validate(config);
  if (outfit_ids.empty()) throw Error(Errc::kEmptyOutfit, "outfit has no items");
  if (candidate_ids.size() < 2) {
    throw Error(Errc::kTooFewCandidates, "FITB needs at least two candidates");
  }
  const std::vector<std::size_t> outfit = resolve(outfit_ids);
  const std::vector<std::size_t> candidates = resolve(candidate_ids);

  reasoning::TaskInput task;
  task.kind = reasoning::TaskInput::Kind::kFitb;
  for (std::size_t i : candidates) task.candidates.push_back(image_source(i));
  Reasoned reasoned = reason(outfit, task, config);

  const std::vector<UnitVector> outfit_vectors = image_embeddings(outfit);
  const std::vector<UnitVector> candidate_vectors = image_embeddings(candidates);
  fusion::QueryVector query =
      fusion::build_query(outfit_vectors, reasoned.target_text, reasoned.attributes,
                          std::span<const UnitVector>(candidate_vectors), config.fusion_config());
  retrieval::FitbScores scores = retrieval::score_fitb(query.q, catalog_, candidates);
  return Choice{std::move(reasoned.record), std::move(query), std::move(scores)};
}

}  // namespace stylefuse::engine
