#pragma once

#include "ubct/adamw.hpp"
#include "ubct/bridge.hpp"
#include "ubct/checkpoint.hpp"
#include "ubct/unfolded.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubct {

struct TrainConfig {
  int K = 6;
  int epochs = 200;
  int batch_size = 4;
  double lr = 1e-4;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  double sigma_train_scale = 1.0;
  std::string dataset;
  long checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  long max_steps = 0;         // 0: epochs * ceil(N / batch_size)
  bool per_layer_weights = false;

  void validate() const;
};

/// One training triplet plus its precomputed conditioning channel.
struct TrainingSample {
  std::string id;
  Image x0;      // clean
  Image x1;      // FBP of the LDCT sinogram
  Sinogram y;    // LDCT sinogram
  Conditioning cond;
};

/// Loads clean/, fbp_ldct/ and sino_ldct/ from a dataset directory.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir, const SystemMatrix& h);

/// Gradient-free rollout states x_{t_K}, ..., x_{t_1} and the noise drawn
/// for each transition.
struct Trajectory {
  int K = 0;
  std::vector<Image> states;  // states[K - k] = x_{t_k}
  std::vector<Image> noise;   // noise[K - i] = z used for x_{t_i} -> x_{t_{i-1}}, i = K..2

  const Image& at(int k) const { return states.at(static_cast<std::size_t>(K - k)); }
};

/// For i = K..2: x_{t_{i-1}} = layer_apply(x_{t_i}, i) + sigma_scale * sigma_{t_i} z.
Trajectory rollout_no_grad(const Image& x1, const Sinogram& y, const Conditioning& cond, ModelParams& params, const SystemMatrix& h,
                           const Schedule& schedule, Rng& rng, double sigma_scale = 1.0);

/// (1 - alpha_{t_{k-1}}) x0 + alpha_{t_{k-1}} x1, for 2 <= k <= K.
Image training_target(const Image& x0, const Image& x1, int k, const Schedule& schedule);

struct StepLosses {
  double l1 = 0.0;  // batch mean of ||x'_{t_{k-1}} - G_k(x_{t_k})||^2 (mean over pixels)
  double l2 = 0.0;  // batch mean of ||x0 - G_1(x_{t_1})||^2
  std::vector<int> ks;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws k per sample, rolls out without gradients and evaluates both loss
/// terms. With accumulate_grads, adds d(L1 + L2)/d(theta) into param grads.
StepLosses training_losses(std::span<const TrainingSample* const> batch, ModelParams& params, const Schedule& schedule, const SystemMatrix& h,
                           Rng& rng, double sigma_scale, bool accumulate_grads);

/// training_losses + one AdamW update + mu >= 0 projection. Throws
/// TrainingDiverged on a non-finite loss, before touching the parameters.
StepLosses training_step(std::span<const TrainingSample* const> batch, ModelParams& params, AdamW& opt, const Schedule& schedule,
                         const SystemMatrix& h, Rng& rng, double sigma_scale = 1.0);

long steps_per_epoch(std::size_t dataset_size, int batch_size);
long total_steps(const TrainConfig& cfg, std::size_t dataset_size);

/// Batch indices for a global step: epoch-wise seeded permutation, cut into
/// consecutive batches (the last one may be short).
std::vector<std::size_t> batch_indices(long step, std::size_t dataset_size, const TrainConfig& cfg);

/// Per-step random stream; depends only on (seed, step) so resumed runs
/// replay identically.
Rng step_rng(std::uint64_t seed, long step);

struct TrainCallbacks {
  std::function<void(long step, const StepLosses&)> on_step;
  std::function<void(long step)> on_checkpoint;
};

/// Runs steps [start_step, total_steps). Returns the number of steps taken.
long train(const std::vector<TrainingSample>& data, ModelParams& params, AdamW& opt, const Schedule& schedule, const SystemMatrix& h,
           const TrainConfig& cfg, long start_step = 0, const TrainCallbacks& callbacks = {});

struct SampleResult {
  Image image;
  long long evaluations = 0;
};

/// For k = K..1: x_{t_{k-1}} = layer_apply(x_{t_k}, k) + c sigma_{t_k} z. With
/// final_noise = false the k = 1 noise term is dropped.
SampleResult sample(const Sinogram& y, const Image& x1, const Conditioning& cond, ModelParams& params, const SystemMatrix& h,
                    const Schedule& schedule, double sigma_scale, bool final_noise, Rng& rng);

/// Parameters, optimizer moments and step count as checkpoint records.
Checkpoint make_checkpoint(ModelParams& params, const AdamW& opt, long step, const std::string& config_echo);
/// Restores parameters (and optimizer state when `opt` is non-null); returns the stored step.
long restore_checkpoint(const Checkpoint& ckpt, ModelParams& params, AdamW* opt);

}  // namespace ubct
