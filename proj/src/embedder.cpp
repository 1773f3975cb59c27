#include "stylefuse/embedder.hpp"

#include <thread>

#include <json.hpp>

#include "http_util.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::embedding {
namespace {

using json = nlohmann::json;

std::vector<Embedding> decode_batch(const std::string& body, std::size_t expected) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("embeddings") ||
      !j["embeddings"].is_array()) {
    throw Error(Errc::kBadResponse, "embedder response lacks an embeddings array");
  }
  const json& rows = j["embeddings"];
  if (rows.size() != expected) {
    throw Error(Errc::kBadResponse, "embedder returned " + std::to_string(rows.size()) +
                                        " vectors for " + std::to_string(expected) + " texts");
  }
  std::vector<Embedding> out;
  out.reserve(expected);
  try {
    for (const json& row : rows) out.emplace_back(row.get<std::vector<float>>());
  } catch (const json::exception&) {
    throw Error(Errc::kBadResponse, "embedder returned a non-numeric vector");
  }
  return out;
}

}  // namespace

HttpTextEmbedder::HttpTextEmbedder(EmbedderConfig config) : config_(std::move(config)) {
  if (config_.max_batch == 0) config_.max_batch = 1;
}

std::vector<Embedding> HttpTextEmbedder::embed(std::span<const std::string> texts) {
  const http::ParsedUrl base = http::parse_url(config_.url);
  const std::string path = http::join_path(base.path, "/embed/text");
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += config_.max_batch) {
    const std::size_t end = std::min(texts.size(), begin + config_.max_batch);
    const std::string body =
        json{{"model", config_.model},
             {"texts", std::vector<std::string>(texts.begin() + begin, texts.begin() + end)}}
            .dump();
    std::string failure;
    bool done = false;
    for (int attempt = 0; attempt <= config_.max_retries && !done; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
      auto client = http::make_client(base, config_.timeout_s);
      auto result = client->Post(path, body, "application/json");
      if (!result) {
        failure = httplib::to_string(result.error());
        continue;
      }
      if (result->status >= 500) {
        failure = "HTTP " + std::to_string(result->status);
        continue;
      }
      if (result->status != 200) {
        throw Error(Errc::kBadResponse, "embedder answered HTTP " + std::to_string(result->status) +
                                            ": " + result->body);
      }
      auto batch = decode_batch(result->body, end - begin);
      std::move(batch.begin(), batch.end(), std::back_inserter(out));
      done = true;
    }
    if (!done) throw Error(Errc::kEmbedderUnavailable, config_.url + ": " + failure);
  }
  return out;
}

bool HttpTextEmbedder::reachable() {
  try {
    const http::ParsedUrl base = http::parse_url(config_.url);
    auto client = http::make_client(base, std::min(config_.timeout_s, 2.0));
    auto result = client->Get(http::join_path(base.path, "/health"));
    return result && result->status == 200;
  } catch (const Error&) {
    return false;
  }
}

std::string embedding_cache_key(const std::string& model, const std::string& text) {
  return sha256_hex(model + "\n" + text);
}

CachedTextEmbedder::CachedTextEmbedder(std::filesystem::path root, std::string model,
                                       reasoning::CacheMode mode, TextEmbedder* inner)
    : root_(std::move(root)), model_(std::move(model)), mode_(mode), inner_(inner) {}

std::filesystem::path CachedTextEmbedder::path_for(const std::string& text) const {
  return root_ / "embeddings" / (embedding_cache_key(model_, text) + ".aemb");
}

std::vector<Embedding> CachedTextEmbedder::embed(std::span<const std::string> texts) {
  std::vector<std::optional<Embedding>> found(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto path = path_for(texts[i]);
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) {
      datastore::EmbeddingFile file = datastore::read_embeddings(path);
      if (file.records.size() != 1) {
        throw Error(Errc::kFormatError, "embedding cache entry " + path.string());
      }
      found[i].emplace(std::move(file.records.front().values));
    } else {
      missing.push_back(texts[i]);
      missing_at.push_back(i);
    }
  }
  if (!missing.empty()) {
    if (mode_ == reasoning::CacheMode::kReplay || inner_ == nullptr) {
      throw Error(Errc::kEmbedderUnavailable,
                  "no cached embedding for \"" + missing.front().substr(0, 60) + "\" (replay mode)");
    }
    std::vector<Embedding> fresh = inner_->embed(missing);
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      const std::string key = embedding_cache_key(model_, missing[j]);
      const std::vector<float> values(fresh[j].values().begin(), fresh[j].values().end());
      const datastore::EmbeddingRecord record{key, values};
      datastore::write_embeddings(path_for(missing[j]), std::span(&record, 1));
      found[missing_at[j]].emplace(std::move(fresh[j]));
    }
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (auto& e : found) out.push_back(std::move(*e));
  return out;
}

bool CachedTextEmbedder::reachable() {
  if (mode_ == reasoning::CacheMode::kReplay) return true;
  return inner_ != nullptr && inner_->reachable();
}

}  // namespace stylefuse::embedding
