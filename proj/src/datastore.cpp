#include "stylefuse/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::datastore {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'A', 'E', 'M', 'B'};
constexpr std::size_t kHeaderSize = 20;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return static_cast<T>(value);
}

std::string line_context(std::size_t line) { return "line " + std::to_string(line); }

// Splits on '\n', skipping blank lines, and parses each as a JSON object.
template <typename F>
void for_each_record(std::string_view text, F&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw Error(Errc::kSchemaError, line_context(line_no) + ": not a JSON object");
    }
    fn(record, line_no);
    if (end == text.size()) break;
  }
}

std::string require_string(const json& record, const char* field, std::size_t line,
                           bool allow_empty = false) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw Error(Errc::kSchemaError,
                line_context(line) + ": field '" + field + "' missing or not a string");
  }
  std::string value = it->get<std::string>();
  if (!allow_empty && value.empty()) {
    throw Error(Errc::kSchemaError, line_context(line) + ": field '" + field + "' is empty");
  }
  return value;
}

std::vector<std::string> require_ids(const json& record, const char* field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_array() || it->empty()) {
    throw Error(Errc::kSchemaError,
                line_context(line) + ": field '" + field + "' must be a nonempty array");
  }
  std::vector<std::string> ids;
  for (const json& id : *it) {
    if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
      throw Error(Errc::kSchemaError,
                  line_context(line) + ": field '" + field + "' must hold nonempty strings");
    }
    ids.push_back(id.get<std::string>());
  }
  return ids;
}

std::size_t require_index(const json& record, const char* field, std::size_t line,
                          std::size_t bound) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_number_unsigned()) {
    throw Error(Errc::kSchemaError,
                line_context(line) + ": field '" + field + "' must be a nonnegative integer");
  }
  const auto value = it->get<std::size_t>();
  if (value >= bound) {
    throw Error(Errc::kSchemaError, line_context(line) + ": field '" + field +
                                        "' out of range for " + std::to_string(bound) +
                                        " candidates");
  }
  return value;
}

template <typename Q>
void require_unique_ids(const std::vector<Q>& questions, std::string Q::*id_field) {
  std::unordered_set<std::string> seen;
  for (const Q& q : questions) {
    if (!seen.insert(q.*id_field).second) {
      throw Error(Errc::kSchemaError, "duplicate question id '" + q.*id_field + "'");
    }
  }
}

std::vector<float> checked_row(std::span<const float> values, const std::string& id,
                               std::vector<std::string>& warnings) {
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(Errc::kNonFinite, "embedding of '" + id + "'");
  }
  const double norm = l2_norm(values);
  const double deviation = std::abs(norm - 1.0);
  if (deviation > 1e-2) {
    throw Error(Errc::kDimensionMismatch, "embedding of '" + id + "' has norm " +
                                              std::to_string(norm) +
                                              ", outside the renormalization band [0.99, 1.01]");
  }
  if (deviation <= 1e-6) return std::vector<float>(values.begin(), values.end());
  if (deviation > 1e-4) {
    warnings.push_back("renormalized embedding of '" + id + "' (norm " + std::to_string(norm) +
                       ")");
  }
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(values[i]) / norm);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// AEMB

std::string encode_embeddings(std::span<const EmbeddingRecord> records, std::uint32_t dim) {
  if (dim == 0 && !records.empty()) dim = static_cast<std::uint32_t>(records.front().values.size());
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kAembVersion);
  put_le<std::uint32_t>(out, dim);
  put_le<std::uint64_t>(out, records.size());
  for (const EmbeddingRecord& r : records) {
    if (r.values.size() != dim) {
      throw Error(Errc::kDimensionMismatch, "record '" + r.id + "' has dim " +
                                                std::to_string(r.values.size()) + ", file dim " +
                                                std::to_string(dim));
    }
    if (r.id.size() > 0xffff) throw Error(Errc::kInvalidArgument, "item id longer than 65535 bytes");
    for (float v : r.values) {
      if (!std::isfinite(v)) throw Error(Errc::kNonFinite, "record '" + r.id + "'");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.id.size()));
    out.append(r.id);
    for (float v : r.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

EmbeddingFile decode_embeddings(std::string_view bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::kFormatError, "missing AEMB magic");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kAembVersion) {
    throw Error(Errc::kFormatError, "unsupported AEMB version " + std::to_string(version));
  }
  EmbeddingFile file;
  file.dim = get_le<std::uint32_t>(bytes, 8);
  const auto count = get_le<std::uint64_t>(bytes, 12);
  const std::size_t row_bytes = static_cast<std::size_t>(file.dim) * 4;
  // Each record needs at least 2 + row_bytes bytes; bound count before reserving.
  if (count > (bytes.size() - kHeaderSize) / (2 + row_bytes)) {
    throw Error(Errc::kFormatError, "record count exceeds file size");
  }
  file.records.reserve(static_cast<std::size_t>(count));
  std::size_t offset = kHeaderSize;
  for (std::uint64_t r = 0; r < count; ++r) {
    if (offset + 2 > bytes.size()) throw Error(Errc::kFormatError, "truncated record header");
    const auto id_len = get_le<std::uint16_t>(bytes, offset);
    offset += 2;
    if (offset + id_len + row_bytes > bytes.size()) {
      throw Error(Errc::kFormatError, "truncated record " + std::to_string(r));
    }
    EmbeddingRecord record;
    record.id.assign(bytes.substr(offset, id_len));
    offset += id_len;
    record.values.resize(file.dim);
    for (std::uint32_t i = 0; i < file.dim; ++i) {
      record.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
      offset += 4;
    }
    file.records.push_back(std::move(record));
  }
  if (offset != bytes.size()) throw Error(Errc::kFormatError, "trailing bytes after last record");
  return file;
}

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      std::uint32_t dim) {
  write_file_atomic(path, encode_embeddings(records, dim));
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Manifest and catalog

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  std::unordered_map<std::string, std::size_t> first_line;
  for_each_record(text, [&](const json& record, std::size_t line) {
    ManifestEntry entry{require_string(record, "item_id", line),
                        require_string(record, "category", line),
                        require_string(record, "description", line, /*allow_empty=*/true),
                        require_string(record, "image_ref", line)};
    auto [it, inserted] = first_line.emplace(entry.item_id, line);
    if (!inserted) {
      throw Error(Errc::kDuplicateItemId, "duplicate item_id '" + entry.item_id + "' at " +
                                              line_context(line) + " (first seen at " +
                                              line_context(it->second) + ")");
    }
    entries.push_back(std::move(entry));
  });
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file_bytes(path));
}

std::span<const float> Catalog::row(std::size_t index) const {
  if (index >= items_.size()) throw Error(Errc::kInvalidArgument, "row index out of range");
  return std::span<const float>(matrix_).subspan(index * dim_, dim_);
}

UnitVector Catalog::image_embedding(std::size_t index) const {
  return UnitVector::from_unit(row(index));
}

std::optional<UnitVector> Catalog::text_embedding(std::size_t index) const {
  if (index >= items_.size()) throw Error(Errc::kInvalidArgument, "row index out of range");
  if (!has_text_[index]) return std::nullopt;
  return UnitVector::from_unit(std::span<const float>(text_matrix_).subspan(index * dim_, dim_));
}

std::optional<std::size_t> Catalog::find(std::string_view item_id) const {
  auto it = by_id_.find(std::string(item_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Catalog::require(std::string_view item_id) const {
  if (auto index = find(item_id)) return *index;
  throw Error(Errc::kUnknownItem, "unknown item '" + std::string(item_id) + "'");
}

const std::vector<std::size_t>* Catalog::category(std::string_view name) const {
  auto it = by_category_.find(std::string(name));
  return it == by_category_.end() ? nullptr : &it->second;
}

std::vector<std::string> Catalog::categories() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : by_category_) out.push_back(name);
  std::sort(out.begin(), out.end());
  return out;
}

std::filesystem::path Catalog::image_path(std::size_t index) const {
  std::filesystem::path ref(item(index).image_ref);
  return ref.is_absolute() ? ref : root_ / ref;
}

Catalog load_catalog(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& embedding_path,
                     const std::optional<std::filesystem::path>& text_embedding_path) {
  Catalog catalog;
  catalog.items_ = read_manifest(manifest_path);
  catalog.root_ = manifest_path.parent_path();

  EmbeddingFile images = read_embeddings(embedding_path);
  catalog.dim_ = images.dim;
  std::unordered_map<std::string, std::size_t> rows;
  for (std::size_t i = 0; i < images.records.size(); ++i) {
    if (!rows.emplace(images.records[i].id, i).second) {
      throw Error(Errc::kDuplicateItemId,
                  "duplicate id '" + images.records[i].id + "' in " + embedding_path.string());
    }
  }
  if (!catalog.items_.empty() && catalog.dim_ == 0) {
    throw Error(Errc::kDimensionMismatch, "embedding file declares dim 0");
  }

  catalog.matrix_.reserve(catalog.items_.size() * catalog.dim_);
  for (std::size_t k = 0; k < catalog.items_.size(); ++k) {
    const Item& item = catalog.items_[k];
    auto it = rows.find(item.item_id);
    if (it == rows.end()) {
      throw Error(Errc::kMissingEmbedding, "no embedding row for item '" + item.item_id + "'");
    }
    const std::vector<float> row =
        checked_row(images.records[it->second].values, item.item_id, catalog.warnings_);
    catalog.matrix_.insert(catalog.matrix_.end(), row.begin(), row.end());
    rows.erase(it);
    catalog.by_id_.emplace(item.item_id, k);
    catalog.by_category_[item.category].push_back(k);
  }
  if (!rows.empty()) {
    catalog.warnings_.push_back(std::to_string(rows.size()) +
                                " embedding rows have no manifest entry");
  }

  catalog.has_text_.assign(catalog.items_.size(), false);
  if (text_embedding_path) {
    EmbeddingFile texts = read_embeddings(*text_embedding_path);
    if (texts.dim != catalog.dim_ && !texts.records.empty()) {
      throw Error(Errc::kDimensionMismatch, "text embeddings have dim " +
                                                std::to_string(texts.dim) + ", image dim " +
                                                std::to_string(catalog.dim_));
    }
    catalog.text_matrix_.assign(catalog.items_.size() * catalog.dim_, 0.0f);
    for (const EmbeddingRecord& r : texts.records) {
      auto index = catalog.find(r.id);
      if (!index) continue;
      if (catalog.has_text_[*index]) {
        throw Error(Errc::kDuplicateItemId, "duplicate text embedding for '" + r.id + "'");
      }
      const std::vector<float> row = checked_row(r.values, r.id, catalog.warnings_);
      std::copy(row.begin(), row.end(), catalog.text_matrix_.begin() + *index * catalog.dim_);
      catalog.has_text_[*index] = true;
    }
  }
  return catalog;
}

Catalog load_catalog_dir(const std::filesystem::path& dir) {
  std::optional<std::filesystem::path> text_path = dir / "text_embeddings.aemb";
  if (!std::filesystem::exists(*text_path)) text_path.reset();
  return load_catalog(dir / "manifest.ldj", dir / "embeddings.aemb", text_path);
}

Catalog make_catalog(std::vector<Item> items, std::vector<std::vector<float>> image_embeddings,
                     std::filesystem::path root) {
  if (items.size() != image_embeddings.size()) {
    throw Error(Errc::kInvalidArgument, "items and embeddings differ in length");
  }
  Catalog catalog;
  catalog.root_ = std::move(root);
  catalog.dim_ = image_embeddings.empty() ? 0 : image_embeddings.front().size();
  catalog.matrix_.reserve(items.size() * catalog.dim_);
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (image_embeddings[k].size() != catalog.dim_) {
      throw Error(Errc::kDimensionMismatch, "embedding of '" + items[k].item_id + "'");
    }
    const UnitVector unit = normalize(std::span<const float>(image_embeddings[k]));
    catalog.matrix_.insert(catalog.matrix_.end(), unit.values().begin(), unit.values().end());
    if (!catalog.by_id_.emplace(items[k].item_id, k).second) {
      throw Error(Errc::kDuplicateItemId, "duplicate item_id '" + items[k].item_id + "'");
    }
    catalog.by_category_[items[k].category].push_back(k);
  }
  catalog.items_ = std::move(items);
  catalog.has_text_.assign(catalog.items_.size(), false);
  return catalog;
}

std::vector<PoolEntry> candidate_pool(const Catalog& catalog, std::string_view target_category,
                                      const fusion::CueSet& cues, std::size_t pool_size) {
  if (pool_size == 0) throw Error(Errc::kInvalidArgument, "pool size must be at least 1");
  const std::vector<std::size_t>* members = catalog.category(target_category);
  if (members == nullptr) {
    throw Error(Errc::kUnknownCategory, "unknown category '" + std::string(target_category) + "'");
  }
  if (members->empty()) {
    throw Error(Errc::kEmptyCategory, "category '" + std::string(target_category) + "' is empty");
  }
  const auto present = cues.present();
  struct Scored {
    std::size_t index;
    double mean;
  };
  std::vector<Scored> scored;
  scored.reserve(members->size());
  for (std::size_t index : *members) {
    const std::span<const float> row = catalog.row(index);
    double total = 0.0;
    for (const auto& [_, cue] : present) total += dot(row, cue->values());
    scored.push_back({index, total / static_cast<double>(present.size())});
  }
  auto order = [&](const Scored& a, const Scored& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    return catalog.item(a.index).item_id < catalog.item(b.index).item_id;
  };
  const std::size_t keep = std::min(pool_size, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), order);
  std::vector<PoolEntry> pool;
  pool.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    pool.push_back({scored[i].index, scored[i].mean, catalog.image_embedding(scored[i].index)});
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Question sets

std::vector<FitbQuestion> parse_fitb(std::string_view text) {
  std::vector<FitbQuestion> out;
  for_each_record(text, [&](const json& record, std::size_t line) {
    FitbQuestion q;
    q.question_id = require_string(record, "question_id", line);
    q.outfit_item_ids = require_ids(record, "outfit_item_ids", line);
    q.candidate_item_ids = require_ids(record, "candidate_item_ids", line);
    q.answer_index = require_index(record, "answer_index", line, q.candidate_item_ids.size());
    out.push_back(std::move(q));
  });
  require_unique_ids(out, &FitbQuestion::question_id);
  return out;
}

std::vector<CirQuery> parse_cir(std::string_view text) {
  std::vector<CirQuery> out;
  for_each_record(text, [&](const json& record, std::size_t line) {
    CirQuery q;
    q.query_id = require_string(record, "query_id", line);
    q.outfit_item_ids = require_ids(record, "outfit_item_ids", line);
    q.target_category = require_string(record, "target_category", line);
    q.ground_truth_item_id = require_string(record, "ground_truth_item_id", line);
    out.push_back(std::move(q));
  });
  require_unique_ids(out, &CirQuery::query_id);
  return out;
}

std::vector<A100Question> parse_a100(std::string_view text) {
  std::vector<A100Question> out;
  for_each_record(text, [&](const json& record, std::size_t line) {
    A100Question q;
    q.question_id = require_string(record, "question_id", line);
    const std::string kind = require_string(record, "test_kind", line);
    if (kind == "LAT") {
      q.test_kind = TestKind::kLat;
    } else if (kind == "AAT") {
      q.test_kind = TestKind::kAat;
    } else {
      throw Error(Errc::kSchemaError, line_context(line) + ": test_kind must be LAT or AAT");
    }
    if (auto it = record.find("attribute_tag"); it != record.end() && !it->is_null()) {
      auto tag = it->is_string() ? parse_attribute(it->get<std::string>()) : std::nullopt;
      if (!tag) throw Error(Errc::kSchemaError, line_context(line) + ": unknown attribute_tag");
      q.attribute_tag = *tag;
    }
    q.outfit_item_ids = require_ids(record, "outfit_item_ids", line);
    q.candidate_item_ids = require_ids(record, "candidate_item_ids", line);
    q.answer_index = require_index(record, "answer_index", line, q.candidate_item_ids.size());
    if (auto it = record.find("vote_shares"); it != record.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != q.candidate_item_ids.size()) {
        throw Error(Errc::kSchemaError,
                    line_context(line) + ": vote_shares must have one entry per candidate");
      }
      std::vector<double> shares;
      double total = 0.0;
      for (const json& s : *it) {
        if (!s.is_number() || s.get<double>() < 0.0) {
          throw Error(Errc::kSchemaError, line_context(line) + ": vote_shares must be >= 0");
        }
        shares.push_back(s.get<double>());
        total += shares.back();
      }
      if (std::abs(total - 1.0) > 1e-6) {
        throw Error(Errc::kSchemaError, line_context(line) + ": vote_shares sum to " +
                                            std::to_string(total) + ", expected 1");
      }
      q.vote_shares = std::move(shares);
    }
    out.push_back(std::move(q));
  });
  require_unique_ids(out, &A100Question::question_id);
  return out;
}

std::vector<FitbQuestion> read_fitb(const std::filesystem::path& path) {
  return parse_fitb(read_file_bytes(path));
}

std::vector<CirQuery> read_cir(const std::filesystem::path& path) {
  return parse_cir(read_file_bytes(path));
}

std::vector<A100Question> read_a100(const std::filesystem::path& path) {
  return parse_a100(read_file_bytes(path));
}

namespace {

void require_items(const Catalog& catalog, const std::string& question_id,
                   const std::vector<std::string>& ids) {
  for (const std::string& id : ids) {
    if (!catalog.find(id)) {
      throw Error(Errc::kUnknownItem,
                  "question '" + question_id + "' references unknown item '" + id + "'");
    }
  }
}

}  // namespace

void validate(const Catalog& catalog, std::span<const FitbQuestion> questions) {
  for (const FitbQuestion& q : questions) {
    require_items(catalog, q.question_id, q.outfit_item_ids);
    require_items(catalog, q.question_id, q.candidate_item_ids);
  }
}

void validate(const Catalog& catalog, std::span<const CirQuery> queries) {
  for (const CirQuery& q : queries) {
    require_items(catalog, q.query_id, q.outfit_item_ids);
    require_items(catalog, q.query_id, {q.ground_truth_item_id});
    if (catalog.item(catalog.require(q.ground_truth_item_id)).category != q.target_category) {
      throw Error(Errc::kSchemaError, "query '" + q.query_id +
                                          "': ground truth is not in category '" +
                                          q.target_category + "'");
    }
  }
}

void validate(const Catalog& catalog, std::span<const A100Question> questions) {
  for (const A100Question& q : questions) {
    if (q.test_kind == TestKind::kLat && !q.vote_shares) {
      throw Error(Errc::kMissingVoteShares, "LAT question '" + q.question_id + "' has no vote_shares");
    }
    if (q.test_kind == TestKind::kAat && !q.attribute_tag) {
      throw Error(Errc::kMissingAttributeTag,
                  "AAT question '" + q.question_id + "' has no attribute_tag");
    }
    require_items(catalog, q.question_id, q.outfit_item_ids);
    require_items(catalog, q.question_id, q.candidate_item_ids);
  }
}

}  // namespace stylefuse::datastore
