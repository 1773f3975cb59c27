#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylefuse/digest.hpp"
#include "stylefuse/vector.hpp"

namespace stylefuse::testing {

inline std::filesystem::path fixtures() { return STYLEFUSE_FIXTURES_DIR; }

inline nlohmann::json expected() {
  return nlohmann::json::parse(read_file_bytes(fixtures() / "expected.json"));
}

// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("stylefuse-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<float> v(dim);
  for (float& x : v) x = static_cast<float>(n(rng));
  return v;
}

inline UnitVector random_unit(std::mt19937_64& rng, std::size_t dim) {
  return normalize(std::span<const float>(random_vector(rng, dim)));
}

}  // namespace stylefuse::testing
