#pragma once

// A scaled-down pipeline that trains in well under a second.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "dgs/dgs.hpp"

namespace dgs::fixture {

inline PipelineConfig small_config() {
  PipelineConfig c;
  c.seed = 3;
  c.window = 10;
  c.stride = 10;
  c.temporal.heads = 2;
  c.temporal.head_dim = 4;
  c.temporal.model_dim = 8;
  c.temporal_training = {3, 1e-3, 8};
  c.vgae.hidden_dim = 8;
  c.vgae.embedding_dim = 4;
  c.vgae_training = {3, 5e-3, 8};
  c.svdd.widths = {16, 8};
  c.svdd_training = {5, 1e-3, 16};
  c.quantile = 0.99;
  c.synth.n = 5;
  c.synth.k = 2;
  c.synth.length = 2000;
  c.synth.density = 0.3;
  c.synth.seed = 11;
  c.synth_train_length = 1500;
  c.synth.anomalies = {parse_anomaly("cascade start=1700 duration=100 sensor=0 magnitude=3 lag=3 attenuation=0.8")};
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dgs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dgs::fixture
