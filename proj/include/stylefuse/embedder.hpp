#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stylefuse/transcript_cache.hpp"
#include "stylefuse/vector.hpp"

namespace stylefuse::embedding {

// Query-time text encoder. Implementations return raw encoder outputs;
// normalization happens engine-side.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  // Order-preserving. Throws kEmbedderUnavailable when the encoder cannot be
  // reached.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
  virtual std::string model() const = 0;
  virtual bool reachable() = 0;
};

struct EmbedderConfig {
  std::string url = "http://127.0.0.1:8090";
  std::string model = "fashion-clip";
  double timeout_s = 30.0;
  int max_retries = 2;
  std::size_t max_batch = 64;
};

// Client for the embedding sidecar:
//   POST {url}/embed/text  {"model": m, "texts": [...]}  -> {"dim": d, "embeddings": [[...], ...]}
//   GET  {url}/health                                    -> {"model": m, "dim": d}
class HttpTextEmbedder final : public TextEmbedder {
 public:
  explicit HttpTextEmbedder(EmbedderConfig config);

  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string model() const override { return config_.model; }
  bool reachable() override;

 private:
  EmbedderConfig config_;
};

// Hex SHA-256 of model + '\n' + text.
std::string embedding_cache_key(const std::string& model, const std::string& text);

// Content-addressed store under <root>/embeddings/<key>.aemb (one-record AEMB
// file). Replay mode never touches the inner embedder and reports a miss as
// kEmbedderUnavailable.
class CachedTextEmbedder final : public TextEmbedder {
 public:
  CachedTextEmbedder(std::filesystem::path root, std::string model, reasoning::CacheMode mode,
                     TextEmbedder* inner);

  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string model() const override { return model_; }
  bool reachable() override;

  std::filesystem::path path_for(const std::string& text) const;

 private:
  std::filesystem::path root_;
  std::string model_;
  reasoning::CacheMode mode_;
  TextEmbedder* inner_;
};

}  // namespace stylefuse::embedding
