#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "data_types.hpp"
#include "model.hpp"

namespace test_util {

// small but protocol-complete benchmark for fast tests
inline loga::DatasetManifest tiny_manifest(uint64_t seed = 7) {
  loga::DatasetManifest m;
  m.seed = seed;
  m.num_identities = 6;
  m.tracklets_per_identity = 4;
  m.frames_per_tracklet = 20;
  m.clip_len = 10;
  m.height = 8;
  m.width = 8;
  m.channels = 1;
  m.num_cameras = 2;
  m.train_identities = 4;
  m.chunk_capacity = 16;
  return m;
}

inline loga::ModelConfig tiny_model_config() {
  loga::ModelConfig mc;
  mc.feature_dim = 16;
  mc.clip_len = 10;
  mc.part_size = 8;
  mc.height = 8;
  mc.width = 8;
  mc.channels = 1;
  mc.num_classes = 4;
  return mc;
}

// scratch directory under the test working directory, wiped on construction
// and destruction
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_("loga_test_tmp/" + name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::vector<float> random_clip_pixels(const loga::ModelConfig& mc, loga::Rng& rng) {
  std::vector<float> px(static_cast<size_t>(mc.clip_len) * mc.channels * mc.height * mc.width);
  for (float& v : px) v = static_cast<float>(rng.uniform());
  return px;
}

}  // namespace test_util
