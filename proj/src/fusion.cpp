#include "stylefuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stylefuse/error.hpp"

namespace stylefuse::fusion {
namespace {

void require_dim(const UnitVector& v, std::size_t dim, const char* what) {
  if (v.dim() != dim) {
    throw Error(Errc::kDimensionMismatch, std::string(what) + " has dim " +
                                              std::to_string(v.dim()) + ", expected " +
                                              std::to_string(dim));
  }
}

// Numerically stable softmax over logits.
std::vector<double> softmax(std::span<const double> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

void accumulate(std::vector<double>& acc, const UnitVector& v, double weight) {
  const auto values = v.values();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weight * static_cast<double>(values[i]);
}

}  // namespace

SaliencyResult ta_isa(const UnitVector& target_text, std::span<const UnitVector> outfit,
                      double tau) {
  if (outfit.empty()) throw Error(Errc::kEmptyOutfit, "outfit has no items");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(Errc::kInvalidArgument, "tau must be a positive finite number");
  }
  const std::size_t dim = target_text.dim();
  std::vector<double> logits;
  logits.reserve(outfit.size());
  for (const UnitVector& item : outfit) {
    require_dim(item, dim, "outfit item");
    logits.push_back(dot(target_text, item) / tau);
  }
  std::vector<double> weights = softmax(logits);

  std::vector<double> acc(dim, 0.0);
  for (std::size_t k = 0; k < outfit.size(); ++k) accumulate(acc, outfit[k], weights[k]);
  return SaliencyResult{std::move(weights), normalize(std::span<const double>(acc))};
}

AestheticResult aa_va(const AttributeVectors& attributes, const UnitVector& target_text,
                      const UnitVector& visual, int sign) {
  if (attributes.empty()) throw Error(Errc::kEmptyAttributes, "no attribute embeddings");
  if (sign != 1 && sign != -1) throw Error(Errc::kInvalidArgument, "sign must be +1 or -1");
  const std::size_t dim = target_text.dim();
  require_dim(visual, dim, "visual cue");

  AestheticResult result{{}, {}, {}, target_text};
  std::vector<double> logits;
  for (const auto& [attribute, embedding] : attributes) {
    require_dim(embedding, dim, "attribute embedding");
    const double score = 0.5 * (dot(embedding, target_text) + dot(embedding, visual));
    result.scores[attribute] = score;
    result.raw_weights[attribute] = std::exp(sign * score);
    logits.push_back(sign * score);
  }
  // The final normalization cancels any common scale, so the shifted softmax
  // weights give the same direction as the raw exponentials.
  const std::vector<double> weights = softmax(logits);
  std::vector<double> acc(dim, 0.0);
  std::size_t i = 0;
  for (const auto& [attribute, embedding] : attributes) {
    result.weights[attribute] = weights[i];
    accumulate(acc, embedding, weights[i]);
    ++i;
  }
  result.aesthetic = normalize(std::span<const double>(acc));
  return result;
}

EntropyResult entropy_of_distribution(std::span<const double> similarities, double temperature) {
  if (similarities.empty()) throw Error(Errc::kEmptyCandidates, "no candidate similarities");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::kInvalidArgument, "temperature must be a positive finite number");
  }
  std::vector<double> logits;
  logits.reserve(similarities.size());
  for (double s : similarities) {
    if (!std::isfinite(s)) throw Error(Errc::kNonFinite, "non-finite similarity");
    logits.push_back(s / temperature);
  }
  EntropyResult result;
  result.probabilities = softmax(logits);
  double h = 0.0;
  for (double p : result.probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  const double upper = std::log(static_cast<double>(similarities.size()));
  result.entropy = std::clamp(h, 0.0, upper);
  return result;
}

std::vector<std::pair<std::string, const UnitVector*>> CueSet::present() const {
  std::vector<std::pair<std::string, const UnitVector*>> out;
  if (visual) out.emplace_back(kVisualCue, &*visual);
  out.emplace_back(kTextCue, &text);
  if (aesthetic) out.emplace_back(kAestheticCue, &*aesthetic);
  return out;
}

QueryVector de_gf(const CueSet& cues, std::span<const UnitVector> candidates,
                  double entropy_temperature) {
  if (candidates.empty()) throw Error(Errc::kEmptyCandidates, "candidate set is empty");
  const std::size_t dim = cues.text.dim();
  for (const UnitVector& c : candidates) require_dim(c, dim, "candidate");

  const auto present = cues.present();
  FusionDiagnostics diagnostics;
  std::vector<double> raw_gates;
  double gate_total = 0.0;
  std::vector<double> similarities(candidates.size());
  for (const auto& [name, cue] : present) {
    require_dim(*cue, dim, "cue");
    for (std::size_t i = 0; i < candidates.size(); ++i) similarities[i] = dot(candidates[i], *cue);
    const double h = entropy_of_distribution(similarities, entropy_temperature).entropy;
    diagnostics.cue_entropies[name] = h;
    raw_gates.push_back(std::exp(-h));
    gate_total += raw_gates.back();
  }

  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < present.size(); ++i) {
    const double gate = raw_gates[i] / gate_total;
    diagnostics.gates[present[i].first] = gate;
    accumulate(acc, *present[i].second, gate);
  }
  return QueryVector{normalize(std::span<const double>(acc)), std::move(diagnostics)};
}

namespace {

struct Cues {
  CueSet cues;
  FusionDiagnostics diagnostics;
};

Cues compute_cues(std::span<const UnitVector> outfit, const UnitVector& target_text,
                  const AttributeVectors& attributes, const FusionConfig& config) {
  SaliencyResult saliency = ta_isa(target_text, outfit, config.tau);
  Cues out{CueSet{saliency.visual, target_text, std::nullopt}, {}};
  out.diagnostics.saliency_weights = std::move(saliency.weights);
  if (!attributes.empty()) {
    AestheticResult aesthetic =
        aa_va(attributes, target_text, *out.cues.visual, config.aava_sign);
    out.cues.aesthetic = std::move(aesthetic.aesthetic);
    out.diagnostics.attribute_scores = std::move(aesthetic.scores);
    out.diagnostics.attribute_weights = std::move(aesthetic.weights);
  }
  return out;
}

QueryVector gate(Cues cues, std::span<const UnitVector> candidates, const FusionConfig& config) {
  QueryVector fused = de_gf(cues.cues, candidates, config.entropy_temperature);
  cues.diagnostics.cue_entropies = std::move(fused.diagnostics.cue_entropies);
  cues.diagnostics.gates = std::move(fused.diagnostics.gates);
  return QueryVector{std::move(fused.q), std::move(cues.diagnostics)};
}

}  // namespace

QueryVector build_query(std::span<const UnitVector> outfit, const UnitVector& target_text,
                        const AttributeVectors& attributes, const PoolProvider& pool,
                        const FusionConfig& config) {
  if (!config.svaf_enabled) return QueryVector{target_text, {}};
  Cues cues = compute_cues(outfit, target_text, attributes, config);
  const std::vector<UnitVector> candidates = pool(cues.cues);
  return gate(std::move(cues), candidates, config);
}

QueryVector build_query(std::span<const UnitVector> outfit, const UnitVector& target_text,
                        const AttributeVectors& attributes,
                        std::span<const UnitVector> candidate_pool, const FusionConfig& config) {
  if (!config.svaf_enabled) return QueryVector{target_text, {}};
  if (candidate_pool.empty()) throw Error(Errc::kEmptyCandidates, "candidate pool is empty");
  return gate(compute_cues(outfit, target_text, attributes, config), candidate_pool, config);
}

}  // namespace stylefuse::fusion
