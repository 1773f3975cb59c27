#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "stylefuse/datastore.hpp"
#include "stylefuse/embedder.hpp"
#include "stylefuse/error.hpp"
#include "stylefuse/scripted.hpp"
#include "test_support.hpp"

using namespace stylefuse;
using namespace stylefuse::embedding;
using json = nlohmann::json;
using stylefuse::testing::TempDir;

namespace {

// Sidecar stand-in: embeds each text as [len, first byte, 1].
class Sidecar {
 public:
  Sidecar() {
    server_.Post("/embed/text", [this](const httplib::Request& req, httplib::Response& res) {
      ++batches_;
      if (fail_first_ > 0) {
        --fail_first_;
        res.status = 503;
        return;
      }
      const json body = json::parse(req.body);
      last_model_ = body["model"].get<std::string>();
      json rows = json::array();
      for (const auto& t : body["texts"]) {
        const std::string s = t.get<std::string>();
        rows.push_back({static_cast<float>(s.size()), s.empty() ? 0.0f : float(s[0]), 1.0f});
      }
      res.set_content(json{{"dim", 3}, {"embeddings", rows}}.dump(), "application/json");
    });
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"model": "fashion-clip", "dim": 3})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~Sidecar() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> batches_{0};
  std::atomic<int> fail_first_{0};
  std::string last_model_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HttpEmbedder, BatchesAndPreservesOrder) {
  Sidecar sidecar;
  EmbedderConfig config;
  config.url = sidecar.url();
  config.max_batch = 2;
  HttpTextEmbedder embedder(config);
  const std::vector<std::string> texts = {"a", "bb", "ccc", "dddd", "eeeee"};
  const auto out = embedder.embed(texts);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(out[i].values()[0], float(texts[i].size()));
    EXPECT_EQ(out[i].values()[1], float(texts[i][0]));
  }
  EXPECT_EQ(sidecar.batches_.load(), 3);
  EXPECT_EQ(sidecar.last_model_, "fashion-clip");
  EXPECT_TRUE(embedder.reachable());
}

TEST(HttpEmbedder, RetriesServerErrors) {
  Sidecar sidecar;
  sidecar.fail_first_ = 1;
  EmbedderConfig config;
  config.url = sidecar.url();
  HttpTextEmbedder embedder(config);
  const std::vector<std::string> texts = {"x"};
  EXPECT_EQ(embedder.embed(texts).size(), 1u);
  EXPECT_EQ(sidecar.batches_.load(), 2);
}

TEST(HttpEmbedder, UnreachableIsTyped) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  EmbedderConfig config;
  config.url = "http://127.0.0.1:" + std::to_string(port);
  config.max_retries = 0;
  config.timeout_s = 1.0;
  HttpTextEmbedder embedder(config);
  const std::vector<std::string> texts = {"x"};
  try {
    embedder.embed(texts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmbedderUnavailable);
  }
  EXPECT_FALSE(embedder.reachable());
}

TEST(CachedEmbedder, LiveStoresThenReplayHits) {
  TempDir dir;
  scripted::TableTextEmbedder inner;
  inner.add("red dress", {1.0f, 2.0f, 2.0f});
  CachedTextEmbedder live(dir.path(), "fashion-clip", reasoning::CacheMode::kLive, &inner);
  const std::vector<std::string> texts = {"red dress"};
  const auto first = live.embed(texts);
  EXPECT_EQ(inner.calls(), 1u);

  const auto path = dir.path() / "embeddings" / (embedding_cache_key("fashion-clip", "red dress") + ".aemb");
  EXPECT_EQ(live.path_for("red dress"), path);
  const auto file = datastore::read_embeddings(path);
  ASSERT_EQ(file.records.size(), 1u);
  EXPECT_EQ(file.records[0].values, (std::vector<float>{1.0f, 2.0f, 2.0f}));

  CachedTextEmbedder replay(dir.path(), "fashion-clip", reasoning::CacheMode::kReplay, nullptr);
  const auto second = replay.embed(texts);
  EXPECT_TRUE(std::ranges::equal(first[0].values(), second[0].values()));
  EXPECT_TRUE(replay.reachable());
}

TEST(CachedEmbedder, OnlyMissesReachInner) {
  TempDir dir;
  scripted::TableTextEmbedder inner;
  inner.set_fallback([](const std::string& t) { return std::vector<float>{float(t.size()), 1.0f}; });
  CachedTextEmbedder cached(dir.path(), "fashion-clip", reasoning::CacheMode::kLive, &inner);
  cached.embed(std::vector<std::string>{"a"});
  const auto out = cached.embed(std::vector<std::string>{"bbb", "a", "cc"});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].values()[0], 3.0f);
  EXPECT_EQ(out[1].values()[0], 1.0f);
  EXPECT_EQ(out[2].values()[0], 2.0f);
  EXPECT_EQ(inner.calls(), 2u);
}

TEST(CachedEmbedder, ReplayMissIsEmbedderUnavailable) {
  TempDir dir;
  scripted::TableTextEmbedder inner;
  inner.set_fallback([](const std::string&) { return std::vector<float>{1.0f}; });
  CachedTextEmbedder replay(dir.path(), "fashion-clip", reasoning::CacheMode::kReplay, &inner);
  try {
    replay.embed(std::vector<std::string>{"never seen"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmbedderUnavailable);
  }
  EXPECT_EQ(inner.calls(), 0u);
}

TEST(CachedEmbedder, KeyDependsOnModel) {
  EXPECT_NE(embedding_cache_key("a", "text"), embedding_cache_key("b", "text"));
  EXPECT_EQ(embedding_cache_key("a", "text").size(), 64u);
}

TEST(TableEmbedder, UnknownTextWithoutFallback) {
  scripted::TableTextEmbedder table;
  try {
    table.embed(std::vector<std::string>{"?"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmbedderUnavailable);
  }
}
