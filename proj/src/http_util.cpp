#include "http_util.hpp"

#include <chrono>
#include <cmath>

#include "stylefuse/error.hpp"

namespace stylefuse::http {

ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::kConfigError, "URL '" + std::string(url) + "' has no scheme");
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::kConfigError, "unsupported URL scheme in '" + std::string(url) + "'");
  }
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  ParsedUrl out;
  out.origin = std::string(url.substr(0, path_begin));
  out.path = path_begin == std::string_view::npos ? "/" : std::string(url.substr(path_begin));
  if (out.origin.size() <= host_begin) {
    throw Error(Errc::kConfigError, "URL '" + std::string(url) + "' has no host");
  }
  return out;
}

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url, double timeout_s) {
  auto client = std::make_unique<httplib::Client>(url.origin);
  const auto timeout = std::chrono::microseconds(
      static_cast<std::int64_t>(std::max(0.001, timeout_s) * 1e6));
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

std::string join_path(std::string_view base, std::string_view suffix) {
  std::string out(base);
  while (!out.empty() && out.back() == '/') out.pop_back();
  if (!suffix.starts_with('/')) out.push_back('/');
  out.append(suffix);
  return out;
}

}  // namespace stylefuse::http
