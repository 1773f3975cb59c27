#pragma once

#include <memory>

#include "stylefuse/config.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/embedder.hpp"
#include "stylefuse/engine.hpp"
#include "stylefuse/mllm_client.hpp"
#include "stylefuse/transcript_cache.hpp"

namespace stylefuse {

// Owns everything a configured engine needs: the catalog, the MLLM client,
// the transcript cache, the cached text embedder.
class Runtime {
 public:
  // HTTP clients are created in live mode only. Throws kConfigError when no
  // catalog is configured, plus any catalog load error.
  explicit Runtime(AppConfig config);

  // Injected dependencies (not owned); either may be null.
  Runtime(AppConfig config, reasoning::MllmClient* client, embedding::TextEmbedder* inner_embedder,
          reasoning::Clock clock = reasoning::utc_now_iso8601);

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const AppConfig& config() const noexcept { return config_; }
  const datastore::Catalog& catalog() const noexcept { return catalog_; }
  reasoning::Reasoner& reasoner() noexcept { return *reasoner_; }
  embedding::TextEmbedder& embedder() noexcept { return *embedder_; }
  engine::Engine& engine() noexcept { return *engine_; }

 private:
  void init(reasoning::MllmClient* client, embedding::TextEmbedder* inner, reasoning::Clock clock);

  AppConfig config_;
  datastore::Catalog catalog_;
  std::unique_ptr<reasoning::HttpMllmClient> owned_client_;
  std::unique_ptr<embedding::HttpTextEmbedder> owned_embedder_;
  std::unique_ptr<reasoning::Reasoner> reasoner_;
  std::unique_ptr<embedding::CachedTextEmbedder> embedder_;
  std::unique_ptr<engine::Engine> engine_;
};

}  // namespace stylefuse
