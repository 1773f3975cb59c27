#include <algorithm>

#include <gtest/gtest.h>

#include "stylefuse/datastore.hpp"
#include "stylefuse/error.hpp"
#include "stylefuse/retrieval.hpp"
#include "test_support.hpp"

using namespace stylefuse;
using namespace stylefuse::retrieval;
using stylefuse::testing::fixtures;

namespace {

datastore::Catalog random_catalog(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<datastore::Item> items;
  std::vector<std::vector<float>> vectors;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "item-%05zu", (i * 7919) % n);  // ids not in row order
    items.push_back({id, i % 3 == 0 ? "shoes" : "top", "", ""});
    vectors.push_back(stylefuse::testing::random_vector(rng, dim));
  }
  return datastore::make_catalog(std::move(items), std::move(vectors));
}

}  // namespace

TEST(Retrieval, FitbCaseMatchesBruteForceGolden) {
  const auto dir = fixtures() / "fitb_case_01";
  const auto golden = nlohmann::json::parse(read_file_bytes(dir / "golden.json"));
  const datastore::Catalog catalog = datastore::load_catalog_dir(dir);
  const auto q_rec = datastore::read_embeddings(dir / "query.aemb").records.front();
  const UnitVector q = normalize(std::span<const float>(q_rec.values));
  std::vector<std::size_t> candidates;
  for (const auto& id : golden["candidate_item_ids"]) candidates.push_back(catalog.require(id.get<std::string>()));
  const FitbScores scores = score_fitb(q, catalog, candidates);
  EXPECT_EQ(scores.argmax, golden["argmax"].get<std::size_t>());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    EXPECT_NEAR(scores.scores[i], golden["scores"][i].get<double>(), 1e-6);
  }
}

TEST(Retrieval, TiesBreakByAscendingItemId) {
  const datastore::Catalog catalog = datastore::make_catalog(
      {{"d", "x", "", ""}, {"b", "x", "", ""}, {"c", "x", "", ""}, {"a", "x", "", ""}},
      {{1, 0}, {1, 0}, {0, 1}, {1, 0}});
  const UnitVector q = normalize(std::span<const float>(std::vector<float>{1, 0}));
  const RankedResult r = retrieve_top_k(q, catalog, 4);
  std::vector<std::string> ids;
  for (const auto& e : r.entries) ids.push_back(e.item_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b", "d", "c"}));
}

TEST(Retrieval, OrthogonalQueryFallsBackToIdOrder) {
  const datastore::Catalog catalog = datastore::make_catalog(
      {{"z", "x", "", ""}, {"m", "x", "", ""}, {"a", "x", "", ""}}, {{0, 1, 0}, {0, 0, 1}, {0, 1, 1}});
  const UnitVector q = normalize(std::span<const float>(std::vector<float>{1, 0, 0}));
  const RankedResult r = retrieve_top_k(q, catalog, 2);
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[0].item_id, "a");
  EXPECT_EQ(r.entries[1].item_id, "m");  // "z" falls past k
}

TEST(Retrieval, ThreadCountDoesNotChangeResult) {
  const datastore::Catalog catalog = random_catalog(3000, 24, 11);
  std::mt19937_64 rng(12);
  const UnitVector q = stylefuse::testing::random_unit(rng, 24);
  const RankedResult one = retrieve_top_k(q, catalog, 40, std::nullopt, 1);
  for (unsigned threads : {2u, 3u, 8u}) {
    const RankedResult many = retrieve_top_k(q, catalog, 40, std::nullopt, threads);
    ASSERT_EQ(many.entries.size(), one.entries.size());
    for (std::size_t i = 0; i < one.entries.size(); ++i) {
      EXPECT_EQ(many.entries[i].index, one.entries[i].index);
      EXPECT_EQ(many.entries[i].score, one.entries[i].score);
    }
  }
}

TEST(Retrieval, CategoryFilterAndBounds) {
  const datastore::Catalog catalog = random_catalog(30, 8, 3);
  std::mt19937_64 rng(4);
  const UnitVector q = stylefuse::testing::random_unit(rng, 8);
  const RankedResult r = retrieve_top_k(q, catalog, 100, std::string("shoes"));
  EXPECT_EQ(r.entries.size(), 10u);
  for (const auto& e : r.entries) EXPECT_EQ(catalog.item(e.index).category, "shoes");
  for (std::size_t i = 1; i < r.entries.size(); ++i) {
    EXPECT_GE(r.entries[i - 1].score, r.entries[i].score);
  }
  EXPECT_THROW(retrieve_top_k(q, catalog, 0), Error);
  EXPECT_THROW(retrieve_top_k(q, catalog, 5, std::string("hats")), Error);
  const datastore::Catalog empty = datastore::make_catalog({}, {});
  EXPECT_THROW(retrieve_top_k(q, empty, 5), Error);
}

TEST(Retrieval, FitbNeedsTwoCandidates) {
  const datastore::Catalog catalog = random_catalog(5, 4, 5);
  std::mt19937_64 rng(6);
  const UnitVector q = stylefuse::testing::random_unit(rng, 4);
  const std::vector<std::size_t> one{0};
  try {
    score_fitb(q, catalog, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTooFewCandidates);
  }
}
