#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylefuse/datastore.hpp"
#include "stylefuse/vector.hpp"

namespace stylefuse::retrieval {

struct RankedEntry {
  std::string item_id;
  std::size_t index = 0;
  double score = 0.0;  // cosine similarity
};

// Scores non-increasing; equal scores ordered by ascending item_id.
struct RankedResult {
  std::vector<RankedEntry> entries;
};

// Exact scan over the catalog (or one category of it). Row blocks are scored
// on `threads` workers; the merged order does not depend on the thread count.
// Throws kInvalidArgument (k = 0), kEmptyCatalog, kUnknownCategory.
RankedResult retrieve_top_k(const UnitVector& q, const datastore::Catalog& catalog, std::size_t k,
                            const std::optional<std::string>& category = std::nullopt,
                            unsigned threads = 1);

struct FitbScores {
  std::vector<double> scores;
  std::size_t argmax = 0;
};

// Cosine scores against each candidate's image embedding; ties go to the
// lower item_id. Throws kTooFewCandidates below two candidates.
FitbScores score_fitb(const UnitVector& q, const datastore::Catalog& catalog,
                      std::span<const std::size_t> candidate_indices);

}  // namespace stylefuse::retrieval
