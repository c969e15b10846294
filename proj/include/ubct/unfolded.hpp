#pragma once

#include "ubct/bridge.hpp"
#include "ubct/projector.hpp"
#include "ubct/tensor.hpp"

#include <array>
#include <atomic>
#include <string>
#include <utility>
#include <vector>

namespace ubct {

Tensor to_tensor(const Image& img);
Image to_image(const Tensor& t, Eigen::Index n);

struct PomConfig {
  Index hidden = 32;
  Index embed_dim = 32;
  Index kernel = 3;
  double embed_base = 1.0;
};

/// Compact time-conditioned CNN used as the proximal module.
///
/// Input channels [r, normalized W^T y]; three hidden 3x3 convs of width
/// `hidden` with SiLU, each shifted by a per-channel bias projected from the
/// time embedding; a final 3x3 conv to one channel that is added to r.
struct PomNet {
  static constexpr int kConvLayers = 4;
  static constexpr int kHiddenLayers = kConvLayers - 1;

  PomConfig config;
  std::array<Tensor, kConvLayers> conv_w;
  std::array<Tensor, kConvLayers> conv_b;
  Tensor embed_w, embed_b;
  std::array<Tensor, kHiddenLayers> film_w;
  std::array<Tensor, kHiddenLayers> film_b;

  /// Random init (uniform, bound 1/sqrt(fan_in)); the output conv starts at
  /// zero so the module is the identity on r.
  static PomNet init(const PomConfig& cfg, Rng& rng);

  std::vector<std::pair<std::string, Tensor*>> named_parameters(const std::string& prefix);
};

/// Learnable state of the unfolded network: POM weights (shared, or one set
/// per layer) and one step size per layer, mu[k - 1] for layer k. Step sizes
/// are learned in units of mu_unit (1/L), so the effective GDM step of layer
/// k is mu_unit * mu[k - 1].
struct ModelParams {
  std::vector<PomNet> pom;
  std::vector<Tensor> mu;
  double mu_unit = 1.0;

  /// Every mu_k starts at 1 (a step of exactly mu_unit).
  static ModelParams init(int K, const PomConfig& cfg, bool per_layer_weights, double mu_unit, Rng& rng);

  int K() const { return static_cast<int>(mu.size()); }
  bool per_layer() const { return pom.size() > 1; }
  PomNet& pom_for(int k);
  /// Effective step size of layer k.
  double mu_at(int k) const { return mu_unit * mu.at(static_cast<std::size_t>(k - 1)).item(); }

  /// Fixed order: every POM's tensors, then mu_1..mu_K.
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<Tensor*> parameters();
  void zero_grad();
  /// Projects every mu_k onto [0, inf).
  void clamp_mu();
};

/// W^T y normalized to zero mean and unit variance.
struct Conditioning {
  double mean = 0.0;
  double stddev = 1.0;
  Tensor normalized;  // [n, n]
};
Conditioning make_conditioning(const Sinogram& y, const SystemMatrix& h);

/// Per-tape views of the parameters (leaves on a recording tape, constants otherwise).
struct PomVars {
  std::array<Var, PomNet::kConvLayers> conv_w, conv_b;
  Var embed_w, embed_b;
  std::array<Var, PomNet::kHiddenLayers> film_w, film_b;
  PomConfig config;
};
struct ModelBinding {
  std::vector<PomVars> pom;
  std::vector<Var> mu;
  double mu_unit = 1.0;

  const PomVars& pom_for(int k) const { return pom.size() == 1 ? pom.front() : pom.at(static_cast<std::size_t>(k - 1)); }
};
ModelBinding bind(Tape& tape, ModelParams& params);

/// Counts layer evaluations; shareable across threads.
struct EvaluationCounter {
  std::atomic<long long> count{0};
};

/// r = x - mu W^T (H x - y), with W = H.
Image gdm(const Image& x, const Sinogram& y, double mu, const SystemMatrix& h);
/// Same step with mu = unit * mu_scaled; differentiable in x and mu_scaled.
Var gdm(const Var& x, const Sinogram& y, const Var& mu_scaled, const SystemMatrix& h, double unit = 1.0);

/// x = r + PomNet([r, cond], embed(t)).
Var pom(const Var& r, double t, const Var& cond, const PomVars& vars);

/// One unfolded iteration at layer k: pom(gdm(x, y, mu_k), t_k, cond).
Var layer_apply(const Var& x, const Sinogram& y, const Var& cond, int k, const ModelBinding& binding, const SystemMatrix& h,
                const Schedule& schedule, EvaluationCounter* counter = nullptr);

/// Gradient-free convenience overload.
Image layer_apply(const Image& x, const Sinogram& y, const Conditioning& cond, int k, ModelParams& params, const SystemMatrix& h,
                  const Schedule& schedule, EvaluationCounter* counter = nullptr);

}  // namespace ubct
