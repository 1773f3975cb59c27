#include "stylefuse/mllm_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "http_util.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::reasoning {
namespace {

using json = nlohmann::json;

struct Attempt {
  std::optional<std::string> text;
  Errc error = Errc::kEndpointUnavailable;
  std::string message;
  bool retryable = false;
  std::optional<double> retry_after_s;
};

Attempt classify(const httplib::Result& result) {
  Attempt out;
  if (!result) {
    const httplib::Error err = result.error();
    out.retryable = true;
    out.message = httplib::to_string(err);
    out.error = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                    ? Errc::kTimeout
                    : Errc::kEndpointUnavailable;
    return out;
  }
  const int status = result->status;
  out.message = "HTTP " + std::to_string(status);
  if (status == 200) {
    json body = json::parse(result->body, nullptr, false);
    if (body.is_discarded()) {
      out.error = Errc::kBadResponse;
      out.message = "completion body is not JSON";
      return out;
    }
    try {
      out.text = completion_text(body);
    } catch (const Error& e) {
      out.error = e.code();
      out.message = e.what();
    }
    return out;
  }
  if (result->has_header("Retry-After")) {
    char* end = nullptr;
    const std::string value = result->get_header_value("Retry-After");
    const double seconds = std::strtod(value.c_str(), &end);
    if (end != value.c_str() && std::isfinite(seconds) && seconds >= 0) out.retry_after_s = seconds;
  }
  if (status == 401 || status == 403) {
    out.error = Errc::kAuthFailure;
  } else if (status == 429) {
    out.error = Errc::kRateLimited;
    out.retryable = true;
  } else if (status == 408 || status == 504) {
    out.error = Errc::kTimeout;
    out.retryable = true;
  } else if (status >= 500) {
    out.error = Errc::kEndpointUnavailable;
    out.retryable = true;
  } else {
    out.error = Errc::kBadResponse;
  }
  return out;
}

}  // namespace

void validate(const MllmConfig& config) {
  if (!(config.temperature >= 0.0)) throw Error(Errc::kConfigError, "temperature must be >= 0");
  if (config.max_retries < 0) throw Error(Errc::kConfigError, "max_retries must be >= 0");
  if (!(config.timeout_s > 0.0)) throw Error(Errc::kConfigError, "timeout must be positive");
  if (config.model.empty()) throw Error(Errc::kConfigError, "model name is empty");
}

json chat_request_body(const PromptBundle& prompt, const MllmConfig& config) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.user_text}});
  for (const PromptImage& image : prompt.images) {
    content.push_back({{"type", "text"}, {"text", image.label + ":"}});
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", image.url}}}});
  }
  return json{{"model", config.model},
              {"temperature", config.temperature},
              {"messages",
               json::array({json{{"role", "system"}, {"content", prompt.system_text}},
                            json{{"role", "user"}, {"content", std::move(content)}}})}};
}

std::string completion_text(const json& response) {
  try {
    const json& content = response.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string text;
      for (const json& part : content) {
        if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
      }
      return text;
    }
  } catch (const json::exception&) {
  }
  throw Error(Errc::kBadResponse, "completion has no message content");
}

HttpMllmClient::HttpMllmClient(std::size_t max_in_flight, double requests_per_second)
    : in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))),
      requests_per_second_(requests_per_second),
      tokens_(std::max(1.0, requests_per_second)),
      last_refill_(std::chrono::steady_clock::now()) {}

void HttpMllmClient::acquire_token() {
  if (requests_per_second_ <= 0.0) return;
  const double capacity = std::max(1.0, requests_per_second_);
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(bucket_mutex_);
      const auto now = std::chrono::steady_clock::now();
      const std::chrono::duration<double> elapsed = now - last_refill_;
      tokens_ = std::min(capacity, tokens_ + elapsed.count() * requests_per_second_);
      last_refill_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / requests_per_second_);
    }
    std::this_thread::sleep_for(wait);
  }
}

InvokeResult HttpMllmClient::invoke(const PromptBundle& prompt, const MllmConfig& config) {
  validate(config);
  const http::ParsedUrl url = http::parse_url(config.endpoint);
  const std::string body = chat_request_body(prompt, config).dump();

  Attempt last;
  int attempts = 0;
  const int max_attempts = config.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    acquire_token();
    attempts = attempt;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& slot;
        ~Release() { slot.release(); }
      } release{in_flight_};
      auto client = http::make_client(url, config.timeout_s);
      if (!config.api_key.empty()) client->set_bearer_token_auth(config.api_key);
      ++requests_sent_;
      last = classify(client->Post(url.path, body, "application/json"));
    }
    if (last.text) return InvokeResult{std::move(*last.text), attempt};
    if (!last.retryable || attempt == max_attempts) break;

    double delay = config.backoff_initial_s * std::pow(2.0, attempt - 1);
    if (last.retry_after_s) delay = std::max(delay, *last.retry_after_s);
    delay = std::min(delay, config.backoff_max_s);
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
  throw Error(last.error, config.endpoint + ": " + last.message + " after " +
                              std::to_string(attempts) + " attempt(s)");
}

bool HttpMllmClient::reachable(const MllmConfig& config) {
  try {
    const http::ParsedUrl url = http::parse_url(config.endpoint);
    auto client = http::make_client(url, std::min(config.timeout_s, 2.0));
    // Any HTTP answer, even an error status, means the endpoint is up.
    return static_cast<bool>(client->Get(url.path));
  } catch (const Error&) {
    return false;
  }
}

}  // namespace stylefuse::reasoning
