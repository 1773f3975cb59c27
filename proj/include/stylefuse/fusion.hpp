#pragma once

// Query fusion: turns outfit image embeddings, the generated target
// description, and the per-attribute aesthetic thoughts into a single unit
// query vector. Every function here is pure and safe to call concurrently.
//
// Pipeline, in order:
//   1. ta_isa   - softmax saliency of each outfit image against the target text,
//                 aggregated into a target-aware visual cue.
//   2. aa_va    - exponential weighting of attribute embeddings by their mean
//                 alignment with the text and visual cues.
//   3. de_gf    - per-cue entropy over the candidate similarity distribution,
//                 gates exp(-H) normalized across cues, convex fusion.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylefuse/attributes.hpp"
#include "stylefuse/vector.hpp"

namespace stylefuse::fusion {

inline constexpr double kDefaultTau = 0.01;

struct SaliencyResult {
  std::vector<double> weights;  // one per outfit item, sums to 1
  UnitVector visual;
};

// Throws kEmptyOutfit for an empty outfit, kInvalidArgument for tau <= 0,
// kZeroVector when the weighted sum cancels out.
SaliencyResult ta_isa(const UnitVector& target_text, std::span<const UnitVector> outfit,
                      double tau = kDefaultTau);

using AttributeVectors = std::map<Attribute, UnitVector>;

struct AestheticResult {
  std::map<Attribute, double> scores;       // mean of text and visual alignment
  std::map<Attribute, double> raw_weights;  // exp(sign * score)
  std::map<Attribute, double> weights;      // raw_weights normalized to sum 1
  UnitVector aesthetic;
};

// sign = +1 weights aligned attributes up; sign = -1 weights them down.
AestheticResult aa_va(const AttributeVectors& attributes, const UnitVector& target_text,
                      const UnitVector& visual, int sign = +1);

struct EntropyResult {
  std::vector<double> probabilities;
  double entropy = 0.0;  // nats
};

// Softmax of similarities / temperature and its Shannon entropy.
EntropyResult entropy_of_distribution(std::span<const double> similarities,
                                      double temperature = 1.0);

inline constexpr const char* kVisualCue = "visual";
inline constexpr const char* kTextCue = "text";
inline constexpr const char* kAestheticCue = "aesthetic";

struct CueSet {
  std::optional<UnitVector> visual;
  UnitVector text;
  std::optional<UnitVector> aesthetic;

  // Present cues in canonical order (visual, text, aesthetic).
  std::vector<std::pair<std::string, const UnitVector*>> present() const;
};

struct FusionDiagnostics {
  std::vector<double> saliency_weights;
  std::map<Attribute, double> attribute_scores;
  std::map<Attribute, double> attribute_weights;
  std::map<std::string, double> cue_entropies;
  std::map<std::string, double> gates;

  bool empty() const noexcept {
    return saliency_weights.empty() && attribute_scores.empty() && attribute_weights.empty() &&
           cue_entropies.empty() && gates.empty();
  }
};

struct QueryVector {
  UnitVector q;
  FusionDiagnostics diagnostics;
};

// Only cue_entropies and gates are filled in the returned diagnostics.
QueryVector de_gf(const CueSet& cues, std::span<const UnitVector> candidates,
                  double entropy_temperature = 1.0);

struct FusionConfig {
  double tau = kDefaultTau;
  int aava_sign = +1;
  double entropy_temperature = 1.0;
  bool svaf_enabled = true;
};

// Supplies the candidate set for gating once the cues are known (CIR pools
// depend on the cues themselves).
using PoolProvider = std::function<std::vector<UnitVector>(const CueSet&)>;

// An empty attribute map means aesthetic thoughts are absent: gating then runs
// over {visual, text}. With svaf_enabled = false the query is the text cue and
// the diagnostics stay empty.
QueryVector build_query(std::span<const UnitVector> outfit, const UnitVector& target_text,
                        const AttributeVectors& attributes,
                        std::span<const UnitVector> candidate_pool, const FusionConfig& config);

QueryVector build_query(std::span<const UnitVector> outfit, const UnitVector& target_text,
                        const AttributeVectors& attributes, const PoolProvider& pool,
                        const FusionConfig& config);

}  // namespace stylefuse::fusion
