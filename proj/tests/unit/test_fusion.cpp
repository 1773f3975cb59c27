#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "stylefuse/datastore.hpp"
#include "stylefuse/error.hpp"
#include "stylefuse/fusion.hpp"
#include "test_support.hpp"

using namespace stylefuse;
using namespace stylefuse::fusion;
using stylefuse::testing::random_unit;

namespace {

std::vector<UnitVector> load_units(const std::filesystem::path& path) {
  std::vector<UnitVector> out;
  for (const auto& r : datastore::read_embeddings(path).records) {
    out.push_back(normalize(std::span<const float>(r.values)));
  }
  return out;
}

UnitVector unit(std::vector<float> v) { return normalize(std::span<const float>(v)); }

}  // namespace

// Golden values produced by the numpy reference in tools/make_fixtures.py.
TEST(FusionGolden, MatchesReferenceCase) {
  const auto dir = stylefuse::testing::fixtures() / "fusion_case_01";
  const auto golden = nlohmann::json::parse(read_file_bytes(dir / "golden.json"));
  const auto outfit = load_units(dir / "outfit.aemb");
  const UnitVector text = load_units(dir / "text.aemb").front();
  const auto pool = load_units(dir / "pool.aemb");
  AttributeVectors attributes;
  for (const auto& r : datastore::read_embeddings(dir / "attributes.aemb").records) {
    attributes.emplace(*parse_attribute(r.id), normalize(std::span<const float>(r.values)));
  }

  const SaliencyResult s = ta_isa(text, outfit, golden["tau"].get<double>());
  for (std::size_t i = 0; i < outfit.size(); ++i) {
    EXPECT_NEAR(s.weights[i], golden["saliency_weights"][i].get<double>(), 1e-6);
  }
  for (std::size_t i = 0; i < text.dim(); ++i) {
    EXPECT_NEAR(s.visual.values()[i], golden["visual"][i].get<double>(), 1e-5);
  }

  const AestheticResult a = aa_va(attributes, text, s.visual);
  for (const auto& [attr, w] : a.weights) {
    const std::string name(to_string(attr));
    EXPECT_NEAR(w, golden["attribute_weights"][name].get<double>(), 1e-6);
    EXPECT_NEAR(a.scores.at(attr), golden["attribute_scores"][name].get<double>(), 1e-6);
  }

  const QueryVector q = build_query(outfit, text, attributes, std::span<const UnitVector>(pool),
                                    FusionConfig{});
  for (const auto& [cue, g] : q.diagnostics.gates) {
    EXPECT_NEAR(g, golden["gates"][cue].get<double>(), 1e-6) << cue;
    EXPECT_NEAR(q.diagnostics.cue_entropies.at(cue), golden["cue_entropies"][cue].get<double>(),
                1e-6);
  }
  for (std::size_t i = 0; i < text.dim(); ++i) {
    EXPECT_NEAR(q.q.values()[i], golden["q"][i].get<double>(), 1e-5);
  }
}

TEST(TaIsa, WeightsSumToOneAndFavorAlignedItem) {
  std::mt19937_64 rng(1);
  const UnitVector t = random_unit(rng, 16);
  std::vector<UnitVector> outfit{random_unit(rng, 16), t, random_unit(rng, 16)};
  const SaliencyResult s = ta_isa(t, outfit);
  EXPECT_NEAR(std::accumulate(s.weights.begin(), s.weights.end(), 0.0), 1.0, 1e-12);
  EXPECT_GT(s.weights[1], 0.99);
}

TEST(TaIsa, SingleItemHasWeightOne) {
  std::mt19937_64 rng(2);
  const UnitVector t = random_unit(rng, 8);
  const std::vector<UnitVector> outfit{random_unit(rng, 8)};
  const SaliencyResult s = ta_isa(t, outfit);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
  EXPECT_EQ(s.visual, outfit[0]);
}

TEST(TaIsa, Errors) {
  std::mt19937_64 rng(3);
  const UnitVector t = random_unit(rng, 8);
  EXPECT_THROW(ta_isa(t, {}), Error);
  const std::vector<UnitVector> outfit{random_unit(rng, 8)};
  EXPECT_THROW(ta_isa(t, outfit, 0.0), Error);
  EXPECT_THROW(ta_isa(t, outfit, -1.0), Error);
  const std::vector<UnitVector> wrong{random_unit(rng, 4)};
  try {
    ta_isa(t, wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDimensionMismatch);
  }
}

TEST(AaVa, SignFlipsPreference) {
  const UnitVector t = unit({1, 0, 0, 0});
  const UnitVector v = unit({0, 1, 0, 0});
  AttributeVectors attrs;
  attrs.emplace(Attribute::kColor, unit({1, 1, 0, 0}));   // aligned
  attrs.emplace(Attribute::kStyle, unit({-1, -1, 0, 0}));  // opposed
  const auto up = aa_va(attrs, t, v, +1);
  const auto down = aa_va(attrs, t, v, -1);
  EXPECT_GT(up.weights.at(Attribute::kColor), up.weights.at(Attribute::kStyle));
  EXPECT_LT(down.weights.at(Attribute::kColor), down.weights.at(Attribute::kStyle));
  EXPECT_NEAR(up.raw_weights.at(Attribute::kColor), std::exp(up.scores.at(Attribute::kColor)), 1e-12);
  EXPECT_THROW(aa_va({}, t, v), Error);
  EXPECT_THROW(aa_va(attrs, t, v, 0), Error);
}

TEST(Entropy, UniformAndPeaked) {
  const std::vector<double> flat(5, 0.3);
  EXPECT_NEAR(entropy_of_distribution(flat).entropy, std::log(5.0), 1e-12);
  const std::vector<double> one{0.7};
  EXPECT_EQ(entropy_of_distribution(one).entropy, 0.0);
  const std::vector<double> peaked{100.0, 0.0, 0.0};
  EXPECT_LT(entropy_of_distribution(peaked).entropy, 1e-30);
  EXPECT_THROW(entropy_of_distribution(std::vector<double>{}), Error);
}

TEST(DeGf, SingleCandidateGivesEqualGates) {
  std::mt19937_64 rng(4);
  CueSet cues{random_unit(rng, 8), random_unit(rng, 8), random_unit(rng, 8)};
  const std::vector<UnitVector> one{random_unit(rng, 8)};
  const QueryVector q = de_gf(cues, one);
  ASSERT_EQ(q.diagnostics.gates.size(), 3u);
  for (const auto& [name, g] : q.diagnostics.gates) EXPECT_NEAR(g, 1.0 / 3.0, 1e-12) << name;
}

TEST(DeGf, ConfidentCueGetsLargerGate) {
  // Candidates spread along axis 0; the text cue separates them, the visual
  // cue is orthogonal to all of them.
  std::vector<UnitVector> candidates{unit({1, 0, 0}), unit({-1, 0.01f, 0})};
  CueSet cues{unit({0, 0, 1}), unit({1, 0, 0}), std::nullopt};
  const QueryVector q = de_gf(cues, candidates, 0.1);
  EXPECT_GT(q.diagnostics.gates.at(kTextCue), q.diagnostics.gates.at(kVisualCue));
  EXPECT_EQ(q.diagnostics.gates.count(kAestheticCue), 0u);
}

TEST(BuildQuery, SvafOffReturnsTextWithEmptyDiagnostics) {
  std::mt19937_64 rng(5);
  const UnitVector t = random_unit(rng, 12);
  const std::vector<UnitVector> outfit{random_unit(rng, 12)};
  FusionConfig config;
  config.svaf_enabled = false;
  bool pool_called = false;
  const QueryVector q = build_query(outfit, t, {}, PoolProvider([&](const CueSet&) {
                                      pool_called = true;
                                      return std::vector<UnitVector>{};
                                    }),
                                    config);
  EXPECT_EQ(q.q, t);
  EXPECT_TRUE(q.diagnostics.empty());
  EXPECT_FALSE(pool_called);
}

TEST(BuildQuery, NoAttributesGatesTwoCues) {
  std::mt19937_64 rng(6);
  const UnitVector t = random_unit(rng, 12);
  const std::vector<UnitVector> outfit{random_unit(rng, 12), random_unit(rng, 12)};
  const std::vector<UnitVector> pool{random_unit(rng, 12), random_unit(rng, 12)};
  const QueryVector q = build_query(outfit, t, {}, std::span<const UnitVector>(pool), {});
  EXPECT_EQ(q.diagnostics.gates.size(), 2u);
  EXPECT_TRUE(q.diagnostics.attribute_weights.empty());
  EXPECT_EQ(q.diagnostics.saliency_weights.size(), 2u);
}

TEST(BuildQuery, PoolProviderSeesAllCues) {
  std::mt19937_64 rng(7);
  const UnitVector t = random_unit(rng, 6);
  const std::vector<UnitVector> outfit{random_unit(rng, 6)};
  AttributeVectors attrs;
  attrs.emplace(Attribute::kSeason, random_unit(rng, 6));
  std::size_t seen = 0;
  const QueryVector q = build_query(outfit, t, attrs, PoolProvider([&](const CueSet& cues) {
                                      seen = cues.present().size();
                                      return std::vector<UnitVector>{random_unit(rng, 6)};
                                    }),
                                    {});
  EXPECT_EQ(seen, 3u);
  EXPECT_NEAR(l2_norm(q.q.values()), 1.0, 1e-6);
  const std::vector<UnitVector> empty;
  EXPECT_THROW(build_query(outfit, t, attrs, std::span<const UnitVector>(empty), {}), Error);
}
