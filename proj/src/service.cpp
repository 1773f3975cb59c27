#include "stylefuse/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::service {
namespace {

using json = nlohmann::json;

constexpr std::size_t kExplainCapacity = 4096;
constexpr std::size_t kDefaultK = 10;
constexpr std::size_t kDefaultPageSize = 20;

std::optional<long long> parse_int(const std::string& text) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::kSchemaError, "request body must be a JSON object");
  }
  return j;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw Error(Errc::kSchemaError, std::string(key) + " must be an array of item ids");
  }
  std::vector<std::string> out;
  for (const json& v : *it) {
    if (!v.is_string()) throw Error(Errc::kSchemaError, std::string(key) + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

json explanation_json(const reasoning::ReasoningRecord& record) {
  return json{{"identification", record.identification_summary},
              {"target_description", record.target_description},
              {"attributes", reasoning::profile_to_json(record.profile)},
              {"model_id", record.model_id},
              {"prompt_hash", record.prompt_hash}};
}

json item_json(const datastore::Item& item) {
  return json{{"item_id", item.item_id},
              {"category", item.category},
              {"description", item.description},
              {"image_ref", item.image_ref}};
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

Response error_response(int status, const std::string& code, const std::string& message) {
  Response r;
  r.status = status;
  r.body = json{{"error", {{"code", code}, {"message", message}}}};
  return r;
}

Response error_response(const Error& e) {
  switch (e.code()) {
    case Errc::kUnknownItem:
      return error_response(400, "unknown_item", e.detail());
    case Errc::kUnknownCategory:
    case Errc::kEmptyCategory:
      return error_response(400, "unknown_category", e.detail());
    case Errc::kEmptyOutfit:
      return error_response(400, "empty_outfit", e.detail());
    case Errc::kTooFewCandidates:
      return error_response(400, "too_few_candidates", e.detail());
    case Errc::kTooManyImages:
      return error_response(400, "too_many_images", e.detail());
    case Errc::kSchemaError:
    case Errc::kInvalidArgument:
      return error_response(400, "bad_request", e.detail());
    case Errc::kEndpointUnavailable:
    case Errc::kTimeout:
    case Errc::kAuthFailure:
    case Errc::kRateLimited:
    case Errc::kBadResponse:
    case Errc::kNoParsableObject:
    case Errc::kMissingTargetDescription:
    case Errc::kCacheMissInReplayMode:
      return error_response(503, "reasoning_unavailable", e.what());
    case Errc::kEmbedderUnavailable:
      return error_response(503, "embedder_unavailable", e.detail());
    default:
      return error_response(500, "internal_error", e.what());
  }
}

std::string request_id(const std::string& endpoint, const json& canonical_request) {
  return sha256_hex(endpoint + "\n" + dump(canonical_request)).substr(0, 16);
}

Service::Service(engine::Engine& engine, engine::PipelineConfig base, ServiceConfig config)
    : engine_(engine), base_(std::move(base)), config_(std::move(config)) {
  engine::validate(base_);
}

Service::~Service() {
  std::unique_lock lock(workers_mutex_);
  workers_done_.wait(lock, [this] { return workers_ == 0; });
}

Response Service::with_timeout(std::function<Response()> work) {
  struct State {
    std::mutex m;
    std::condition_variable cv;
    bool done = false;
    Response response;
  };
  auto state = std::make_shared<State>();
  {
    std::lock_guard lock(workers_mutex_);
    ++workers_;
  }
  std::thread([this, state, work = std::move(work)] {
    Response r;
    try {
      r = work();
    } catch (const Error& e) {
      r = error_response(e);
    } catch (const std::exception& e) {
      r = error_response(500, "internal_error", e.what());
    }
    {
      std::lock_guard lock(state->m);
      state->response = std::move(r);
      state->done = true;
    }
    state->cv.notify_all();
    std::lock_guard lock(workers_mutex_);
    --workers_;
    workers_done_.notify_all();
  }).detach();

  std::unique_lock lock(state->m);
  const auto timeout = std::chrono::duration<double>(config_.request_timeout_s);
  if (!state->cv.wait_for(lock, timeout, [&] { return state->done; })) {
    return error_response(504, "timeout", "request exceeded the configured timeout");
  }
  return state->response;
}

void Service::remember(const std::string& id, json explanation) {
  std::lock_guard lock(explain_mutex_);
  if (explanations_.emplace(id, std::move(explanation)).second) {
    explain_order_.push_back(id);
    if (explain_order_.size() > kExplainCapacity) {
      explanations_.erase(explain_order_.front());
      explain_order_.pop_front();
    }
  }
}

Response Service::health() {
  const bool replay = engine_.reasoner().mode() == reasoning::CacheMode::kReplay;
  std::string mllm = "replay";
  std::string embedder = "replay";
  if (!replay) {
    reasoning::MllmClient* client = engine_.reasoner().client();
    mllm = client != nullptr && client->reachable(engine_.reasoner().config()) ? "up" : "down";
    embedder = engine_.embedder().reachable() ? "up" : "down";
  }
  const bool degraded = mllm == "down" || embedder == "down";
  Response r;
  r.body = json{{"status", degraded ? "degraded" : "ok"},
                {"mode", replay ? "replay" : "live"},
                {"catalog",
                 {{"size", engine_.catalog().size()},
                  {"dim", engine_.catalog().dim()},
                  {"categories", engine_.catalog().categories()}}},
                {"components", {{"mllm", mllm}, {"embedder", embedder}}}};
  return r;
}

Response Service::items(const std::optional<std::string>& category,
                        const std::optional<std::string>& page_text,
                        const std::optional<std::string>& size_text) const {
  long long page = 1;
  long long size = static_cast<long long>(kDefaultPageSize);
  if (page_text) {
    auto v = parse_int(*page_text);
    if (!v || *v < 1) return error_response(400, "bad_pagination", "page must be an integer >= 1");
    page = *v;
  }
  if (size_text) {
    auto v = parse_int(*size_text);
    if (!v || *v < 1 || *v > static_cast<long long>(kMaxPageSize)) {
      return error_response(400, "bad_pagination", "size must be an integer in [1, 200]");
    }
    size = *v;
  }

  const datastore::Catalog& catalog = engine_.catalog();
  std::vector<std::size_t> selected;
  if (category) {
    if (const auto* members = catalog.category(*category)) selected = *members;
  } else {
    selected.resize(catalog.size());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  }
  std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
    return catalog.item(a).item_id < catalog.item(b).item_id;
  });

  json items = json::array();
  const auto total = static_cast<long long>(selected.size());
  const long long begin = (page - 1) * size;
  for (long long i = begin; i < std::min(total, begin + size); ++i) {
    items.push_back(item_json(catalog.item(selected[static_cast<std::size_t>(i)])));
  }
  Response r;
  r.body = json{{"items", items}, {"page", page}, {"size", size}, {"total", total}};
  r.headers["X-Total-Count"] = std::to_string(total);
  return r;
}

Response Service::recommend(const std::string& body) {
  json request;
  std::vector<std::string> outfit;
  std::string category;
  engine::PipelineConfig config = base_;
  std::size_t k = kDefaultK;
  try {
    request = parse_body(body);
    outfit = string_list(request, "outfit_item_ids");
    auto cat = request.find("target_category");
    if (cat == request.end() || !cat->is_string()) {
      return error_response(400, "bad_request", "target_category must be a string");
    }
    category = cat->get<std::string>();

    json k_value = request.value("k", json(kDefaultK));
    json overrides = request.value("overrides", json::object());
    if (!overrides.is_object()) {
      return error_response(400, "bad_override", "overrides must be an object");
    }
    for (const auto& [key, value] : overrides.items()) {
      if (key == "k") {
        k_value = value;
      } else if (key == "tau") {
        if (!value.is_number() || !(value.get<double>() > 0.0)) {
          return error_response(400, "bad_override", "tau must be a positive number");
        }
        config.tau = value.get<double>();
      } else if (key == "aava_sign") {
        if (!value.is_number_integer() || (value.get<int>() != 1 && value.get<int>() != -1)) {
          return error_response(400, "bad_override", "aava_sign must be +1 or -1");
        }
        config.aava_sign = value.get<int>();
      } else {
        return error_response(400, "bad_override", "override '" + key + "' is not allowed");
      }
    }
    if (!k_value.is_number_integer() || k_value.get<long long>() < 1 ||
        k_value.get<long long>() > static_cast<long long>(kMaxK)) {
      return error_response(400, "bad_k", "k must be an integer in [1, 100]");
    }
    k = k_value.get<std::size_t>();
    if (outfit.empty()) return error_response(400, "empty_outfit", "outfit_item_ids is empty");
    for (const std::string& id : outfit) {
      if (!engine_.catalog().find(id)) {
        return error_response(400, "unknown_item", "unknown item '" + id + "'");
      }
    }
    if (engine_.catalog().category(category) == nullptr) {
      return error_response(400, "unknown_category", "unknown category '" + category + "'");
    }
  } catch (const Error& e) {
    return error_response(e);
  }

  const json canonical{{"outfit_item_ids", outfit},
                       {"target_category", category},
                       {"k", k},
                       {"tau", config.tau},
                       {"aava_sign", config.aava_sign}};
  const std::string id = request_id("recommend", canonical);

  return with_timeout([this, outfit, category, k, config, id, canonical] {
    engine::Engine::Completion c = engine_.complete(outfit, category, k, config);
    json items = json::array();
    std::size_t rank = 1;
    for (const auto& entry : c.ranking.entries) {
      json item = item_json(engine_.catalog().item(entry.index));
      item["rank"] = rank++;
      item["score"] = entry.score;
      items.push_back(std::move(item));
    }
    json explanation = explanation_json(c.record);
    json diagnostics = engine::diagnostics_json(c.query.diagnostics);
    remember(id, json{{"request_id", id},
                      {"endpoint", "recommend"},
                      {"request", canonical},
                      {"explanation", explanation},
                      {"diagnostics", diagnostics}});
    Response r;
    r.body = json{{"request_id", id},
                  {"items", std::move(items)},
                  {"explanation", std::move(explanation)},
                  {"diagnostics", std::move(diagnostics)}};
    return r;
  });
}

Response Service::fitb(const std::string& body) {
  std::vector<std::string> outfit;
  std::vector<std::string> candidates;
  try {
    const json request = parse_body(body);
    outfit = string_list(request, "outfit_item_ids");
    candidates = string_list(request, "candidate_item_ids");
    if (outfit.empty()) return error_response(400, "empty_outfit", "outfit_item_ids is empty");
    if (candidates.size() < 2) {
      return error_response(400, "too_few_candidates", "at least two candidates are required");
    }
    for (const auto* ids : {&outfit, &candidates}) {
      for (const std::string& id : *ids) {
        if (!engine_.catalog().find(id)) {
          return error_response(400, "unknown_item", "unknown item '" + id + "'");
        }
      }
    }
  } catch (const Error& e) {
    return error_response(e);
  }

  const json canonical{{"outfit_item_ids", outfit}, {"candidate_item_ids", candidates}};
  const std::string id = request_id("fitb", canonical);

  return with_timeout([this, outfit, candidates, id, canonical] {
    engine::Engine::Choice c = engine_.choose(outfit, candidates, base_);
    json explanation = explanation_json(c.record);
    json diagnostics = engine::diagnostics_json(c.query.diagnostics);
    remember(id, json{{"request_id", id},
                      {"endpoint", "fitb"},
                      {"request", canonical},
                      {"explanation", explanation},
                      {"diagnostics", diagnostics}});
    Response r;
    r.body = json{{"request_id", id},
                  {"chosen", c.scores.argmax},
                  {"chosen_item_id", candidates[c.scores.argmax]},
                  {"scores", c.scores.scores},
                  {"explanation", std::move(explanation)},
                  {"diagnostics", std::move(diagnostics)}};
    return r;
  });
}

Response Service::explain(const std::string& id) const {
  std::lock_guard lock(explain_mutex_);
  auto it = explanations_.find(id);
  if (it == explanations_.end()) {
    return error_response(404, "unknown_request", "no explanation stored for '" + id + "'");
  }
  Response r;
  r.body = it->second;
  return r;
}

void Service::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(dump(r.body), "application/json; charset=utf-8");
  };
  auto param = [](const httplib::Request& req, const char* name) -> std::optional<std::string> {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  };

  server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  server.Get("/items", [this, send, param](const httplib::Request& req, httplib::Response& res) {
    send(res, items(param(req, "category"), param(req, "page"), param(req, "size")));
  });
  server.Post("/recommend", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, recommend(req.body));
  });
  server.Post("/fitb", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, fitb(req.body));
  });
  server.Get(R"(/explain/([^/]+))", [this, send](const httplib::Request& req,
                                                 httplib::Response& res) {
    send(res, explain(req.matches[1]));
  });

  if (!config_.cors_origin.empty()) {
    const std::string origin = config_.cors_origin;
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Expose-Headers", "X-Total-Count");
    });
  }
}

void run_server(Service& service, const std::string& host, int port,
                std::atomic<bool>& stop_requested, const std::function<void(int)>& on_bound) {
  httplib::Server server;
  const std::size_t threads = service.config().threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  service.mount(server);

  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::kIoError, "cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw Error(Errc::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  if (on_bound) on_bound(bound);

  std::jthread watcher([&] {
    while (!stop_requested.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.listen_after_bind();
  // Releases the watcher when listen returns on its own.
  stop_requested.store(true);
}

}  // namespace stylefuse::service
