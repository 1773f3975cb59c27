#pragma once

// Offline stand-ins for the two network dependencies. Used to build the
// frozen fixture caches and by tests.

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "stylefuse/embedder.hpp"
#include "stylefuse/mllm_client.hpp"

namespace stylefuse::scripted {

// Answers each prompt with the response registered under its prompt hash, or
// with the fallback when one is set. Unknown prompts raise kBadResponse.
class ScriptedMllmClient final : public reasoning::MllmClient {
 public:
  using Fallback = std::function<std::string(const reasoning::PromptBundle&)>;

  void add(const std::string& prompt_hash, std::string response);
  void set_fallback(Fallback fallback);
  void set_reachable(bool reachable) { reachable_ = reachable; }

  reasoning::InvokeResult invoke(const reasoning::PromptBundle& prompt,
                                 const reasoning::MllmConfig& config) override;
  bool reachable(const reasoning::MllmConfig&) override { return reachable_; }
  std::size_t invocations() const noexcept { return invocations_.load(); }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> responses_;
  Fallback fallback_;
  std::atomic<bool> reachable_{true};
  std::atomic<std::size_t> invocations_{0};
};

// Serves embeddings from a text -> vector table; unknown texts go to the
// fallback when one is set, otherwise kEmbedderUnavailable.
class TableTextEmbedder final : public embedding::TextEmbedder {
 public:
  using Fallback = std::function<std::vector<float>(const std::string&)>;

  explicit TableTextEmbedder(std::string model = "fashion-clip");

  void add(const std::string& text, std::vector<float> values);
  void set_fallback(Fallback fallback);
  void set_reachable(bool reachable) { reachable_ = reachable; }
  // One {"text": str, "embedding": [float]} object per line.
  void load_jsonl(const std::filesystem::path& path);

  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string model() const override { return model_; }
  bool reachable() override { return reachable_; }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::string model_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<float>> table_;
  Fallback fallback_;
  std::atomic<bool> reachable_{true};
  std::atomic<std::size_t> calls_{0};
};

}  // namespace stylefuse::scripted
