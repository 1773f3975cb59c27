#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <httplib.h>

namespace stylefuse::http {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

// Throws kConfigError for anything that is not http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url, double timeout_s);

// Joins a base path and a suffix with exactly one '/'.
std::string join_path(std::string_view base, std::string_view suffix);

}  // namespace stylefuse::http
