#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "zeroforge/config.h"
#include "zeroforge/embedding.h"
#include "zeroforge/rng.h"

namespace zeroforge::testing {

// Relative error with an absolute floor so near-zero pairs compare sanely.
inline double RelErr(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double CentralDifference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline EmbeddingBatch RandomUnitBatch(int rows, int width, std::mt19937_64& rng) {
  EmbeddingBatch b(rows, width);
  for (double& v : b.mutable_values()) v = StandardNormal(rng);
  b.Normalize();
  return b;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("zeroforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small, CPU-friendly run: 16^3 grid, toy encoder at 32 px, random init.
inline RunConfig SmallRunConfig() {
  RunConfig c;
  c.encoder.kind = EncoderKind::kToy;
  c.encoder.image_resolution = 32;
  c.flow.num_coupling_blocks = 2;
  c.flow.hidden_width = 64;
  c.flow.latent_dim = 16;
  c.decoder.num_blocks = 2;
  c.decoder.resolution = 16;
  c.decoder.channels = 8;
  c.render.image_size = 32;
  c.train.init = InitMode::kRandom;
  c.train.lr = 1e-3;
  c.train.iterations = 20;
  c.train.checkpoint_every = 10;
  c.train.seed = 7;
  return c;
}

}  // namespace zeroforge::testing
