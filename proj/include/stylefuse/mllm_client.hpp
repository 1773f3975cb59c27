#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "stylefuse/reasoning.hpp"

namespace stylefuse::reasoning {

struct MllmConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 0.0;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_images = 16;
  std::string api_key;  // usually injected from the environment
  double backoff_initial_s = 0.5;
  double backoff_max_s = 8.0;
  std::size_t max_in_flight = 4;
  double requests_per_second = 0.0;  // 0 disables the token bucket
  ImageTransport transport = ImageTransport::kInline;
  std::string image_base_url;
};

// Throws kConfigError on invalid settings (negative temperature or retries).
void validate(const MllmConfig& config);

struct InvokeResult {
  std::string text;
  int attempts = 1;
};

class MllmClient {
 public:
  virtual ~MllmClient() = default;
  // Returns the completion text verbatim or throws kEndpointUnavailable,
  // kTimeout, kAuthFailure, kRateLimited, kBadResponse.
  virtual InvokeResult invoke(const PromptBundle& prompt, const MllmConfig& config) = 0;
  virtual bool reachable(const MllmConfig& config) = 0;
};

// Chat-completions request body: a system message, then a user message with
// the prompt text followed by one labeled image part per attachment.
nlohmann::json chat_request_body(const PromptBundle& prompt, const MllmConfig& config);

// choices[0].message.content; string or array-of-text-parts. Throws kBadResponse.
std::string completion_text(const nlohmann::json& response);

class HttpMllmClient final : public MllmClient {
 public:
  HttpMllmClient(std::size_t max_in_flight = 4, double requests_per_second = 0.0);

  InvokeResult invoke(const PromptBundle& prompt, const MllmConfig& config) override;
  bool reachable(const MllmConfig& config) override;

  // HTTP requests sent over the client's lifetime, including retries.
  std::size_t requests_sent() const noexcept { return requests_sent_.load(); }

 private:
  void acquire_token();

  std::counting_semaphore<1024> in_flight_;
  double requests_per_second_;
  std::mutex bucket_mutex_;
  double tokens_;
  std::chrono::steady_clock::time_point last_refill_;
  std::atomic<std::size_t> requests_sent_{0};
};

}  // namespace stylefuse::reasoning
