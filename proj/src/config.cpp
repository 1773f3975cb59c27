#include "stylefuse/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "stylefuse/error.hpp"

namespace stylefuse {
namespace {

using json = nlohmann::json;

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  auto it = section.find(key);
  if (it == section.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::kConfigError, where + "." + key + " has the wrong type");
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  auto it = root.find(key);
  if (it == root.end() || it->is_null()) return empty;
  if (!it->is_object()) throw Error(Errc::kConfigError, std::string(key) + " must be an object");
  return *it;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename T>
T parse_number(const char* name, const char* text) {
  T value{};
  const std::string_view s(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::kConfigError, std::string(name) + " is not a valid number");
  }
  return value;
}

}  // namespace

reasoning::CacheMode parse_mode(const std::string& text) {
  if (text == "live") return reasoning::CacheMode::kLive;
  if (text == "replay") return reasoning::CacheMode::kReplay;
  throw Error(Errc::kConfigError, "mode must be 'live' or 'replay', got '" + text + "'");
}

std::string to_string(reasoning::CacheMode mode) {
  return mode == reasoning::CacheMode::kReplay ? "replay" : "live";
}

AppConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "config root must be an object");
  AppConfig c;

  std::string text;
  if (j.contains("catalog")) {
    read(j, "catalog", text, "config");
    c.catalog_dir = resolve(base_dir, text);
  }
  if (j.contains("cache_dir")) {
    read(j, "cache_dir", text, "config");
    c.cache_dir = resolve(base_dir, text);
  }
  if (j.contains("mode")) {
    read(j, "mode", text, "config");
    c.mode = parse_mode(text);
  }
  read(j, "parallelism", c.parallelism, "config");
  if (c.parallelism == 0) throw Error(Errc::kConfigError, "parallelism must be at least 1");

  const json& m = section(j, "mllm");
  if (m.contains("api_key")) {
    throw Error(Errc::kConfigError, "mllm.api_key is not accepted in the config file; "
                                    "set STYLEFUSE_MLLM_API_KEY");
  }
  read(m, "endpoint", c.mllm.endpoint, "mllm");
  read(m, "model", c.mllm.model, "mllm");
  read(m, "temperature", c.mllm.temperature, "mllm");
  read(m, "timeout_s", c.mllm.timeout_s, "mllm");
  read(m, "max_retries", c.mllm.max_retries, "mllm");
  read(m, "max_images", c.mllm.max_images, "mllm");
  read(m, "max_in_flight", c.mllm.max_in_flight, "mllm");
  read(m, "requests_per_second", c.mllm.requests_per_second, "mllm");
  read(m, "backoff_initial_s", c.mllm.backoff_initial_s, "mllm");
  read(m, "backoff_max_s", c.mllm.backoff_max_s, "mllm");
  read(m, "image_base_url", c.mllm.image_base_url, "mllm");
  if (m.contains("image_transport")) {
    read(m, "image_transport", text, "mllm");
    if (text == "inline") {
      c.mllm.transport = reasoning::ImageTransport::kInline;
    } else if (text == "url") {
      c.mllm.transport = reasoning::ImageTransport::kUrl;
    } else {
      throw Error(Errc::kConfigError, "mllm.image_transport must be 'inline' or 'url'");
    }
  }
  try {
    reasoning::validate(c.mllm);
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, e.detail());
  }

  const json& e = section(j, "embedder");
  read(e, "url", c.embedder.url, "embedder");
  read(e, "model", c.embedder.model, "embedder");
  read(e, "timeout_s", c.embedder.timeout_s, "embedder");
  read(e, "max_retries", c.embedder.max_retries, "embedder");
  read(e, "max_batch", c.embedder.max_batch, "embedder");
  if (c.embedder.max_batch == 0 || c.embedder.max_batch > 64) {
    throw Error(Errc::kConfigError, "embedder.max_batch must be in [1, 64]");
  }

  c.pipeline = engine::pipeline_from_json(section(j, "pipeline"));

  const json& s = section(j, "service");
  read(s, "host", c.service.host, "service");
  read(s, "port", c.service.port, "service");
  read(s, "cors_origin", c.service.cors_origin, "service");
  read(s, "request_timeout_s", c.service.request_timeout_s, "service");
  read(s, "threads", c.service.threads, "service");
  if (c.service.port < 0 || c.service.port > 65535) {
    throw Error(Errc::kConfigError, "service.port out of range");
  }
  if (!(c.service.request_timeout_s > 0.0)) {
    throw Error(Errc::kConfigError, "service.request_timeout_s must be positive");
  }
  if (c.service.threads == 0) throw Error(Errc::kConfigError, "service.threads must be positive");
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kConfigError, "cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(Errc::kConfigError, "config file '" + path.string() + "': " + ex.what());
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

void apply_env_overrides(AppConfig& c, const EnvLookup& lookup) {
  auto get = [&](const char* name) -> const char* {
    const char* v = lookup(name);
    return v != nullptr && *v != '\0' ? v : nullptr;
  };
  if (const char* v = get("STYLEFUSE_CATALOG")) c.catalog_dir = v;
  if (const char* v = get("STYLEFUSE_CACHE_DIR")) c.cache_dir = v;
  if (const char* v = get("STYLEFUSE_MODE")) c.mode = parse_mode(v);
  if (const char* v = get("STYLEFUSE_PARALLELISM")) {
    c.parallelism = parse_number<unsigned>("STYLEFUSE_PARALLELISM", v);
    if (c.parallelism == 0) throw Error(Errc::kConfigError, "STYLEFUSE_PARALLELISM must be >= 1");
  }
  if (const char* v = get("STYLEFUSE_MLLM_ENDPOINT")) c.mllm.endpoint = v;
  if (const char* v = get("STYLEFUSE_MLLM_MODEL")) c.mllm.model = v;
  if (const char* v = get("STYLEFUSE_MLLM_API_KEY")) {
    c.mllm.api_key = v;
  } else if (const char* fallback = get("OPENAI_API_KEY")) {
    c.mllm.api_key = fallback;
  }
  if (const char* v = get("STYLEFUSE_EMBEDDER_URL")) c.embedder.url = v;
  if (const char* v = get("STYLEFUSE_EMBEDDER_MODEL")) c.embedder.model = v;
  if (const char* v = get("STYLEFUSE_HOST")) c.service.host = v;
  if (const char* v = get("STYLEFUSE_PORT")) {
    c.service.port = parse_number<int>("STYLEFUSE_PORT", v);
  }
  if (const char* v = get("STYLEFUSE_CORS_ORIGIN")) c.service.cors_origin = v;
}

}  // namespace stylefuse
