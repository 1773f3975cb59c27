#include "stylefuse/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "stylefuse/error.hpp"

namespace stylefuse::retrieval {
namespace {

struct Candidate {
  double score;
  std::size_t index;
};

}  // namespace

RankedResult retrieve_top_k(const UnitVector& q, const datastore::Catalog& catalog, std::size_t k,
                            const std::optional<std::string>& category, unsigned threads) {
  if (k == 0) throw Error(Errc::kInvalidArgument, "k must be at least 1");
  if (q.dim() != catalog.dim() && !catalog.empty()) {
    throw Error(Errc::kDimensionMismatch, "query dim " + std::to_string(q.dim()) +
                                              " vs catalog dim " + std::to_string(catalog.dim()));
  }

  std::vector<std::size_t> universe;
  if (category) {
    const auto* members = catalog.category(*category);
    if (members == nullptr) throw Error(Errc::kUnknownCategory, "unknown category '" + *category + "'");
    universe = *members;
  } else {
    universe.resize(catalog.size());
    std::iota(universe.begin(), universe.end(), std::size_t{0});
  }
  if (universe.empty()) throw Error(Errc::kEmptyCatalog, "nothing to search");

  const auto before = [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return catalog.item(a.index).item_id < catalog.item(b.index).item_id;
  };
  const std::size_t keep = std::min(k, universe.size());

  // Each block keeps its own top-`keep`; the union of block winners contains
  // the global winners, and re-sorting with the same total order merges them.
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(universe.size())));
  const std::size_t block = (universe.size() + workers - 1) / workers;
  std::vector<std::vector<Candidate>> partial(workers);
  auto scan = [&](unsigned w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(universe.size(), begin + block);
    std::vector<Candidate>& out = partial[w];
    out.reserve(end > begin ? end - begin : 0);
    for (std::size_t i = begin; i < end; ++i) {
      out.push_back({dot(q.values(), catalog.row(universe[i])), universe[i]});
    }
    const std::size_t local = std::min(keep, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(local), out.end(),
                      before);
    out.resize(local);
  };
  if (workers == 1) {
    scan(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(scan, w);
  }

  std::vector<Candidate> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), before);
  merged.resize(keep);

  RankedResult result;
  result.entries.reserve(keep);
  for (const Candidate& c : merged) {
    result.entries.push_back({catalog.item(c.index).item_id, c.index, c.score});
  }
  return result;
}

FitbScores score_fitb(const UnitVector& q, const datastore::Catalog& catalog,
                      std::span<const std::size_t> candidate_indices) {
  if (candidate_indices.size() < 2) {
    throw Error(Errc::kTooFewCandidates, "FITB needs at least two candidates");
  }
  FitbScores out;
  out.scores.reserve(candidate_indices.size());
  for (std::size_t index : candidate_indices) out.scores.push_back(dot(q.values(), catalog.row(index)));
  for (std::size_t i = 1; i < out.scores.size(); ++i) {
    const double best = out.scores[out.argmax];
    if (out.scores[i] > best ||
        (out.scores[i] == best && catalog.item(candidate_indices[i]).item_id <
                                      catalog.item(candidate_indices[out.argmax]).item_id)) {
      out.argmax = i;
    }
  }
  return out;
}

}  // namespace stylefuse::retrieval
