#pragma once

#include "ubct/bridge.hpp"
#include "ubct/fbp.hpp"
#include "ubct/geometry.hpp"
#include "ubct/noise.hpp"
#include "ubct/phantom.hpp"
#include "ubct/train.hpp"
#include "ubct/unfolded.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubct {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of an experiment. Serialized as line-oriented `key = value`
/// text; the same text is echoed into each output directory as `meta`.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  Eigen::Index n = 64;
  Eigen::Index n_views = 90;
  Eigen::Index n_dets = 95;
  double det_spacing = 1.0;
  FilterKind filter = FilterKind::Ramp;

  double i0 = 1e5;
  double dose_fraction = 0.2;
  double elec_var = 8.2;
  double atten_scale = 0.05;

  double beta_min = 1e-8;
  double beta_max = 3.005e-6;
  int K = 6;

  PhantomKind phantom = PhantomKind::RandomEllipses;
  long train_count = 200;
  long test_count = 20;

  Index hidden = 32;
  Index embed_dim = 32;
  bool per_layer_weights = false;

  int epochs = 200;
  int batch_size = 4;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double sigma_train_scale = 1.0;
  long checkpoint_every = 0;
  long max_steps = 0;

  double sigma_scale = 1.0;
  bool final_noise = true;
  double metric_range = 1.0;

  std::string data_dir = "data";
  std::string out_dir = "run";

  Geometry geometry() const { return Geometry::parallel(n, n_views, n_dets, det_spacing); }
  NoiseConfig noise(std::uint64_t noise_seed) const { return {i0, dose_fraction, elec_var, atten_scale, noise_seed}; }
  ScheduleConfig schedule() const { return {beta_min, beta_max, K, {}}; }
  PomConfig pom() const { return {hidden, embed_dim, 3, 1.0}; }
  TrainConfig train(const std::string& dataset) const;

  void validate() const;
};

/// Sets one key from its text value. Unknown keys and malformed values throw.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

/// Parses `key = value` lines; `#` starts a comment. Errors carry the line number.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace ubct
