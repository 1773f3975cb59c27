#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "stylefuse/mllm_client.hpp"
#include "stylefuse/reasoning.hpp"

namespace stylefuse::reasoning {

enum class CacheMode { kLive, kReplay };

// Hex SHA-256 over the canonical prompt bytes (which carry the image content
// digests), the model name and the sampling temperature.
std::string cache_key(const PromptBundle& prompt, const MllmConfig& config);

// One file per key: <root>/reasoning/<key>.record. Reads are lock-free; writes
// for the same key are serialized in-process and land by atomic rename.
class TranscriptCache {
 public:
  explicit TranscriptCache(std::filesystem::path root);

  std::filesystem::path path_for(const std::string& key) const;
  std::optional<ReasoningRecord> load(const std::string& key) const;
  void store(const std::string& key, const ReasoningRecord& record) const;

  std::mutex& writer_lock(const std::string& key) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  std::shared_ptr<std::array<std::mutex, 64>> stripes_;
};

using Clock = std::function<std::string()>;
std::string utc_now_iso8601();

struct ReasonStats {
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<std::size_t> invocations{0};
};

// Cache hit: the stored record, no network. Miss in live mode: invoke, parse
// (one re-invocation on a parse failure), store. Miss in replay mode:
// kCacheMissInReplayMode.
ReasoningRecord reason_cached(std::span<const ImageSource> outfit, const TaskInput& task,
                              const PromptOptions& options, const MllmConfig& config,
                              MllmClient* client, const TranscriptCache& cache, CacheMode mode,
                              const Clock& clock = utc_now_iso8601, ReasonStats* stats = nullptr);

// Bundles the reasoning dependencies for callers that issue many queries.
class Reasoner {
 public:
  Reasoner(MllmConfig config, MllmClient* client, TranscriptCache cache, CacheMode mode,
           Clock clock = utc_now_iso8601);

  ReasoningRecord reason(std::span<const ImageSource> outfit, const TaskInput& task,
                         const PromptOptions& options, const std::string& model_override = {});

  const MllmConfig& config() const noexcept { return config_; }
  CacheMode mode() const noexcept { return mode_; }
  MllmClient* client() const noexcept { return client_; }
  const ReasonStats& stats() const noexcept { return stats_; }

 private:
  MllmConfig config_;
  MllmClient* client_;
  TranscriptCache cache_;
  CacheMode mode_;
  Clock clock_;
  ReasonStats stats_;
};

}  // namespace stylefuse::reasoning
