#include "stylefuse/transcript_cache.hpp"

#include <charconv>
#include <ctime>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::reasoning {

std::string cache_key(const PromptBundle& prompt, const MllmConfig& config) {
  char temperature[64];
  const auto [end, ec] = std::to_chars(temperature, temperature + sizeof temperature,
                                       config.temperature);
  std::string material = prompt.canonical_bytes();
  material.append("model=").append(config.model).push_back('\0');
  material.append("temperature=").append(temperature, end).push_back('\0');
  return sha256_hex(material);
}

TranscriptCache::TranscriptCache(std::filesystem::path root)
    : root_(std::move(root)), stripes_(std::make_shared<std::array<std::mutex, 64>>()) {}

std::filesystem::path TranscriptCache::path_for(const std::string& key) const {
  return root_ / "reasoning" / (key + ".record");
}

std::optional<ReasoningRecord> TranscriptCache::load(const std::string& key) const {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return deserialize_record(read_file_bytes(path));
}

void TranscriptCache::store(const std::string& key, const ReasoningRecord& record) const {
  write_file_atomic(path_for(key), serialize_record(record));
}

std::mutex& TranscriptCache::writer_lock(const std::string& key) const {
  return (*stripes_)[std::hash<std::string>{}(key) % stripes_->size()];
}

std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

ReasoningRecord reason_cached(std::span<const ImageSource> outfit, const TaskInput& task,
                              const PromptOptions& options, const MllmConfig& config,
                              MllmClient* client, const TranscriptCache& cache, CacheMode mode,
                              const Clock& clock, ReasonStats* stats) {
  const PromptBundle prompt = build_prompt(outfit, task, options);
  const std::string key = cache_key(prompt, config);
  if (auto hit = cache.load(key)) {
    if (stats) ++stats->cache_hits;
    return *hit;
  }
  if (mode == CacheMode::kReplay) {
    throw Error(Errc::kCacheMissInReplayMode, "no transcript for key " + key);
  }
  if (client == nullptr) throw Error(Errc::kEndpointUnavailable, "no MLLM client configured");

  std::lock_guard lock(cache.writer_lock(key));
  if (auto hit = cache.load(key)) {
    if (stats) ++stats->cache_hits;
    return *hit;
  }
  ReasoningRecord record;
  for (int round = 0;; ++round) {
    if (stats) ++stats->invocations;
    const InvokeResult response = client->invoke(prompt, config);
    try {
      record = parse_reasoning(response.text);
      break;
    } catch (const Error& e) {
      const bool parse_failure =
          e.code() == Errc::kNoParsableObject || e.code() == Errc::kMissingTargetDescription;
      if (!parse_failure || round == 1) throw;
    }
  }
  record.model_id = config.model;
  record.prompt_hash = prompt.prompt_hash();
  record.created_at = clock();
  cache.store(key, record);
  return record;
}

Reasoner::Reasoner(MllmConfig config, MllmClient* client, TranscriptCache cache, CacheMode mode,
                   Clock clock)
    : config_(std::move(config)),
      client_(client),
      cache_(std::move(cache)),
      mode_(mode),
      clock_(std::move(clock)) {}

ReasoningRecord Reasoner::reason(std::span<const ImageSource> outfit, const TaskInput& task,
                                 const PromptOptions& options, const std::string& model_override) {
  if (model_override.empty() || model_override == config_.model) {
    return reason_cached(outfit, task, options, config_, client_, cache_, mode_, clock_, &stats_);
  }
  MllmConfig config = config_;
  config.model = model_override;
  return reason_cached(outfit, task, options, config, client_, cache_, mode_, clock_, &stats_);
}

}  // namespace stylefuse::reasoning
