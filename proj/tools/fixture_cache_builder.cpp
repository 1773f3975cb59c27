// Materializes the frozen transcript and embedding caches for the fixture
// benchmark from prompts.ldj (scripted responses) and texts.ldj (scripted
// encoder table). Output is byte-stable: fixed clock, content-addressed files.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"
#include "stylefuse/runtime.hpp"
#include "stylefuse/scripted.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace stylefuse;

namespace {

struct PromptRow {
  std::vector<std::size_t> outfit;
  reasoning::TaskInput task;
  engine::PipelineConfig pipeline;
  std::string response;
};

std::vector<PromptRow> read_prompts(const fs::path& path, const datastore::Catalog& catalog) {
  std::vector<PromptRow> rows;
  std::istringstream lines(read_file_bytes(path));
  std::string line;
  auto source = [&](std::size_t i) {
    return reasoning::ImageSource{catalog.image_path(i), catalog.item(i).image_ref};
  };
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PromptRow row;
    for (const auto& id : j.at("outfit_item_ids")) row.outfit.push_back(catalog.require(id.get<std::string>()));
    if (j.at("kind") == "fitb") {
      row.task.kind = reasoning::TaskInput::Kind::kFitb;
      for (const auto& id : j.at("candidate_item_ids")) {
        row.task.candidates.push_back(source(catalog.require(id.get<std::string>())));
      }
    } else {
      row.task.kind = reasoning::TaskInput::Kind::kCir;
      row.task.category = j.at("target_category").get<std::string>();
    }
    row.pipeline.identify_step = j.at("identify_step").get<bool>();
    row.pipeline.aesthetic_thoughts = j.at("aesthetic_thoughts").get<bool>();
    row.response = j.at("response").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build the frozen fixture caches"};
  std::string fixtures;
  std::string cache_dir;
  app.add_option("--fixtures", fixtures, "Fixture directory (cat/, prompts.ldj, texts.ldj)")->required();
  app.add_option("--cache-dir", cache_dir, "Output cache directory (default: <fixtures>/cat/cache)");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(fixtures);
    AppConfig config;
    config.catalog_dir = root / "cat";
    config.cache_dir = cache_dir.empty() ? root / "cat" / "cache" : fs::path(cache_dir);
    config.mode = reasoning::CacheMode::kLive;
    fs::remove_all(config.cache_dir / "reasoning");
    fs::remove_all(config.cache_dir / "embeddings");

    scripted::ScriptedMllmClient client;
    scripted::TableTextEmbedder encoder(config.embedder.model);
    encoder.load_jsonl(root / "texts.ldj");
    Runtime runtime(config, &client, &encoder, [] { return std::string("2025-01-01T00:00:00Z"); });

    const auto rows = read_prompts(root / "prompts.ldj", runtime.catalog());
    for (const PromptRow& row : rows) {
      std::vector<reasoning::ImageSource> images;
      for (std::size_t i : row.outfit) {
        images.push_back({runtime.catalog().image_path(i), runtime.catalog().item(i).image_ref});
      }
      const auto bundle = reasoning::build_prompt(
          images, row.task, row.pipeline.prompt_options(runtime.config().mllm));
      client.add(bundle.prompt_hash(), row.response);
      runtime.engine().reason(row.outfit, row.task, row.pipeline);
    }
    std::cout << "cached " << rows.size() << " transcripts (" << client.invocations()
              << " invocations) under " << config.cache_dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
