#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "stylefuse/config.hpp"
#include "stylefuse/datastore.hpp"
#include "stylefuse/engine.hpp"
#include "stylefuse/error.hpp"

namespace httplib {
class Server;
}

namespace stylefuse::service {

inline constexpr std::size_t kMaxK = 100;
inline constexpr std::size_t kMaxPageSize = 200;

struct Response {
  int status = 200;
  nlohmann::json body = nlohmann::json::object();
  std::map<std::string, std::string> headers;
};

// Error body: {"error": {"code": "<machine code>", "message": "..."}}.
Response error_response(int status, const std::string& code, const std::string& message);

// Maps a library error to an HTTP status and machine code.
Response error_response(const Error& error);

// HTTP handlers as plain functions over parsed inputs, so they can be tested
// without a socket. Thread-safe.
class Service {
 public:
  Service(engine::Engine& engine, engine::PipelineConfig base, ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response health();
  Response items(const std::optional<std::string>& category, const std::optional<std::string>& page,
                 const std::optional<std::string>& size) const;
  Response recommend(const std::string& body);
  Response fitb(const std::string& body);
  Response explain(const std::string& request_id) const;

  // Routes plus CORS handling.
  void mount(httplib::Server& server);

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  // Runs work on a helper thread; 504 when it outlives the request timeout.
  Response with_timeout(std::function<Response()> work);
  void remember(const std::string& request_id, nlohmann::json explanation);

  engine::Engine& engine_;
  engine::PipelineConfig base_;
  ServiceConfig config_;

  mutable std::mutex explain_mutex_;
  std::map<std::string, nlohmann::json> explanations_;
  std::deque<std::string> explain_order_;

  std::mutex workers_mutex_;
  std::condition_variable workers_done_;
  std::size_t workers_ = 0;
};

// Hex prefix of SHA-256 over the endpoint name and the canonical request.
std::string request_id(const std::string& endpoint, const nlohmann::json& canonical_request);

// Binds, reports the bound port through on_bound, then blocks until
// stop_requested turns true (set on return). Throws kIoError when the port cannot be bound.
void run_server(Service& service, const std::string& host, int port,
                std::atomic<bool>& stop_requested,
                const std::function<void(int)>& on_bound = {});

}  // namespace stylefuse::service
