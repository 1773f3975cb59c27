#include "stylefuse/scripted.hpp"

#include <sstream>

#include <json.hpp>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::scripted {

void ScriptedMllmClient::add(const std::string& prompt_hash, std::string response) {
  std::lock_guard lock(mutex_);
  responses_[prompt_hash] = std::move(response);
}

void ScriptedMllmClient::set_fallback(Fallback fallback) {
  std::lock_guard lock(mutex_);
  fallback_ = std::move(fallback);
}

reasoning::InvokeResult ScriptedMllmClient::invoke(const reasoning::PromptBundle& prompt,
                                                   const reasoning::MllmConfig&) {
  ++invocations_;
  if (!reachable_) throw Error(Errc::kEndpointUnavailable, "scripted endpoint is down");
  const std::string hash = prompt.prompt_hash();
  Fallback fallback;
  {
    std::lock_guard lock(mutex_);
    if (auto it = responses_.find(hash); it != responses_.end()) return {it->second, 1};
    fallback = fallback_;
  }
  if (fallback) return {fallback(prompt), 1};
  throw Error(Errc::kBadResponse, "no scripted response for prompt " + hash);
}

TableTextEmbedder::TableTextEmbedder(std::string model) : model_(std::move(model)) {}

void TableTextEmbedder::add(const std::string& text, std::vector<float> values) {
  std::lock_guard lock(mutex_);
  table_[text] = std::move(values);
}

void TableTextEmbedder::set_fallback(Fallback fallback) {
  std::lock_guard lock(mutex_);
  fallback_ = std::move(fallback);
}

void TableTextEmbedder::load_jsonl(const std::filesystem::path& path) {
  std::istringstream lines(read_file_bytes(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("text") || !j.contains("embedding")) {
      throw Error(Errc::kSchemaError, path.string() + " line " + std::to_string(line_no));
    }
    add(j["text"].get<std::string>(), j["embedding"].get<std::vector<float>>());
  }
}

std::vector<Embedding> TableTextEmbedder::embed(std::span<const std::string> texts) {
  ++calls_;
  if (!reachable_) throw Error(Errc::kEmbedderUnavailable, "table embedder is down");
  std::vector<Embedding> out;
  out.reserve(texts.size());
  std::lock_guard lock(mutex_);
  for (const std::string& text : texts) {
    if (auto it = table_.find(text); it != table_.end()) {
      out.emplace_back(it->second);
    } else if (fallback_) {
      out.emplace_back(fallback_(text));
    } else {
      throw Error(Errc::kEmbedderUnavailable, "no embedding for text '" + text + "'");
    }
  }
  return out;
}

}  // namespace stylefuse::scripted
