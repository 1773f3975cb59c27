#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stylefuse/attributes.hpp"
#include "stylefuse/fusion.hpp"
#include "stylefuse/vector.hpp"

namespace stylefuse::datastore {

// ---------------------------------------------------------------------------
// AEMB embedding files
//
//   offset 0   magic "AEMB"
//          4   version   u32 LE (= 1)
//          8   dim       u32 LE
//         12   count     u64 LE
//         20   count x { id_len u16 LE, id bytes (UTF-8), dim x f32 LE }
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kAembVersion = 1;

struct EmbeddingRecord {
  std::string id;
  std::vector<float> values;
};

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

std::string encode_embeddings(std::span<const EmbeddingRecord> records, std::uint32_t dim = 0);
EmbeddingFile decode_embeddings(std::string_view bytes);

// dim = 0 infers the dimension from the first record. Throws
// kDimensionMismatch on mixed dimensions, kNonFinite on NaN/Inf, kIoError.
void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      std::uint32_t dim = 0);
EmbeddingFile read_embeddings(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string item_id;
  std::string category;
  std::string description;
  std::string image_ref;
};

// One JSON object per line. Throws kSchemaError (with line number) or
// kDuplicateItemId naming the offender.
std::vector<ManifestEntry> parse_manifest(std::string_view text);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

using Item = ManifestEntry;

// Immutable after load; share freely across threads.
class Catalog {
 public:
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  const std::vector<Item>& items() const noexcept { return items_; }
  const Item& item(std::size_t index) const { return items_.at(index); }

  // Row k of the contiguous image-embedding matrix belongs to items()[k].
  std::span<const float> matrix() const noexcept { return matrix_; }
  std::span<const float> row(std::size_t index) const;
  UnitVector image_embedding(std::size_t index) const;
  std::optional<UnitVector> text_embedding(std::size_t index) const;

  std::optional<std::size_t> find(std::string_view item_id) const;
  // Throws kUnknownItem.
  std::size_t require(std::string_view item_id) const;

  // nullptr for unknown categories. Indices are in catalog order.
  const std::vector<std::size_t>* category(std::string_view name) const;
  std::vector<std::string> categories() const;

  // Directory that relative image_refs resolve against.
  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path image_path(std::size_t index) const;

  // Non-fatal notes from load (renormalized rows, unused embedding rows).
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  friend Catalog load_catalog(const std::filesystem::path&, const std::filesystem::path&,
                              const std::optional<std::filesystem::path>&);
  friend Catalog make_catalog(std::vector<Item>, std::vector<std::vector<float>>,
                              std::filesystem::path);

  std::size_t dim_ = 0;
  std::vector<Item> items_;
  std::vector<float> matrix_;
  std::vector<float> text_matrix_;
  std::vector<bool> has_text_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_category_;
  std::filesystem::path root_;
  std::vector<std::string> warnings_;
};

// Joins manifest and embeddings by item_id. Rows within 1e-2 of unit norm are
// renormalized (a warning is recorded past 1e-4); rows outside that band are
// rejected with kDimensionMismatch. Other errors: kFormatError,
// kMissingEmbedding, kDuplicateItemId, kNonFinite.
Catalog load_catalog(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& embedding_path,
                     const std::optional<std::filesystem::path>& text_embedding_path = std::nullopt);

// Directory layout: manifest.ldj, embeddings.aemb, optional text_embeddings.aemb.
Catalog load_catalog_dir(const std::filesystem::path& dir);

// In-memory construction (tests, synthetic benchmarks). Vectors are
// normalized; ids must be unique.
Catalog make_catalog(std::vector<Item> items, std::vector<std::vector<float>> image_embeddings,
                     std::filesystem::path root = {});

struct PoolEntry {
  std::size_t index;
  double mean_similarity;
  UnitVector vector;
};

inline constexpr std::size_t kDefaultPoolSize = 100;

// All items of the category ranked by mean cosine similarity to the present
// cues, ties broken by ascending item_id, truncated to pool_size.
// Throws kUnknownCategory, kEmptyCategory, kInvalidArgument (pool_size = 0).
std::vector<PoolEntry> candidate_pool(const Catalog& catalog, std::string_view target_category,
                                      const fusion::CueSet& cues,
                                      std::size_t pool_size = kDefaultPoolSize);

// ---------------------------------------------------------------------------
// Question sets (one JSON object per line)
// ---------------------------------------------------------------------------

struct FitbQuestion {
  std::string question_id;
  std::vector<std::string> outfit_item_ids;
  std::vector<std::string> candidate_item_ids;
  std::size_t answer_index = 0;
};

struct CirQuery {
  std::string query_id;
  std::vector<std::string> outfit_item_ids;
  std::string target_category;
  std::string ground_truth_item_id;
};

enum class TestKind { kLat, kAat };

struct A100Question {
  std::string question_id;
  TestKind test_kind = TestKind::kLat;
  std::optional<Attribute> attribute_tag;
  std::vector<std::string> outfit_item_ids;
  std::vector<std::string> candidate_item_ids;
  std::size_t answer_index = 0;
  std::optional<std::vector<double>> vote_shares;
};

std::vector<FitbQuestion> parse_fitb(std::string_view text);
std::vector<CirQuery> parse_cir(std::string_view text);
std::vector<A100Question> parse_a100(std::string_view text);

std::vector<FitbQuestion> read_fitb(const std::filesystem::path& path);
std::vector<CirQuery> read_cir(const std::filesystem::path& path);
std::vector<A100Question> read_a100(const std::filesystem::path& path);

// Referential checks against a loaded catalog. Throw kUnknownItem or
// kSchemaError naming the question.
void validate(const Catalog& catalog, std::span<const FitbQuestion> questions);
void validate(const Catalog& catalog, std::span<const CirQuery> queries);
void validate(const Catalog& catalog, std::span<const A100Question> questions);

}  // namespace stylefuse::datastore
