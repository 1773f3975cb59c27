#include "stylefuse/runtime.hpp"

#include "stylefuse/error.hpp"

namespace stylefuse {
namespace {

datastore::Catalog load(const AppConfig& config) {
  if (config.catalog_dir.empty()) throw Error(Errc::kConfigError, "no catalog directory configured");
  return datastore::load_catalog_dir(config.catalog_dir);
}

}  // namespace

Runtime::Runtime(AppConfig config) : config_(std::move(config)), catalog_(load(config_)) {
  if (config_.mode == reasoning::CacheMode::kLive) {
    owned_client_ = std::make_unique<reasoning::HttpMllmClient>(config_.mllm.max_in_flight,
                                                                config_.mllm.requests_per_second);
    owned_embedder_ = std::make_unique<embedding::HttpTextEmbedder>(config_.embedder);
  }
  init(owned_client_.get(), owned_embedder_.get(), reasoning::utc_now_iso8601);
}

Runtime::Runtime(AppConfig config, reasoning::MllmClient* client,
                 embedding::TextEmbedder* inner_embedder, reasoning::Clock clock)
    : config_(std::move(config)), catalog_(load(config_)) {
  init(client, inner_embedder, std::move(clock));
}

void Runtime::init(reasoning::MllmClient* client, embedding::TextEmbedder* inner,
                   reasoning::Clock clock) {
  if (config_.cache_dir.empty()) config_.cache_dir = config_.catalog_dir / "cache";
  reasoning::validate(config_.mllm);
  engine::validate(config_.pipeline);
  reasoner_ = std::make_unique<reasoning::Reasoner>(
      config_.mllm, client, reasoning::TranscriptCache(config_.cache_dir), config_.mode,
      std::move(clock));
  embedder_ = std::make_unique<embedding::CachedTextEmbedder>(config_.cache_dir,
                                                              config_.embedder.model,
                                                              config_.mode, inner);
  engine_ = std::make_unique<engine::Engine>(catalog_, *reasoner_, *embedder_);
}

}  // namespace stylefuse
