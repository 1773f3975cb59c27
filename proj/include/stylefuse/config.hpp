#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include <json.hpp>

#include "stylefuse/embedder.hpp"
#include "stylefuse/engine.hpp"
#include "stylefuse/mllm_client.hpp"
#include "stylefuse/transcript_cache.hpp"

namespace stylefuse {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin;  // empty: no CORS headers
  double request_timeout_s = 120.0;
  std::size_t threads = 8;
};

// Shared by the CLI and the service. File format (all sections optional):
//
//   {
//     "catalog": "catalog-dir",
//     "cache_dir": "cache",          (default: <catalog>/cache)
//     "mode": "live" | "replay",
//     "parallelism": 4,
//     "mllm": {"endpoint", "model", "temperature", "timeout_s", "max_retries",
//              "max_images", "max_in_flight", "requests_per_second",
//              "image_transport": "inline" | "url", "image_base_url"},
//     "embedder": {"url", "model", "timeout_s", "max_retries", "max_batch"},
//     "pipeline": {see engine::pipeline_from_json},
//     "service": {"host", "port", "cors_origin", "request_timeout_s", "threads"}
//   }
//
// Relative paths resolve against the directory holding the file. Credentials
// are never read from the file; see apply_env_overrides.
struct AppConfig {
  std::filesystem::path catalog_dir;
  std::filesystem::path cache_dir;  // empty: <catalog_dir>/cache
  reasoning::CacheMode mode = reasoning::CacheMode::kLive;
  unsigned parallelism = 1;
  reasoning::MllmConfig mllm;
  embedding::EmbedderConfig embedder;
  engine::PipelineConfig pipeline;
  ServiceConfig service;
};

// Throws kConfigError.
AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
// Throws kConfigError for a missing or unparsable file.
AppConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;

// STYLEFUSE_CATALOG, STYLEFUSE_CACHE_DIR, STYLEFUSE_MODE, STYLEFUSE_PARALLELISM,
// STYLEFUSE_MLLM_ENDPOINT, STYLEFUSE_MLLM_MODEL, STYLEFUSE_MLLM_API_KEY (falls
// back to OPENAI_API_KEY), STYLEFUSE_EMBEDDER_URL, STYLEFUSE_EMBEDDER_MODEL,
// STYLEFUSE_HOST, STYLEFUSE_PORT, STYLEFUSE_CORS_ORIGIN.
void apply_env_overrides(AppConfig& config, const EnvLookup& lookup = [](const char* name) {
  return std::getenv(name);
});

reasoning::CacheMode parse_mode(const std::string& text);
std::string to_string(reasoning::CacheMode mode);

}  // namespace stylefuse
