#pragma once

#include "ubct/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ubct {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
///
/// Update for step s:
///   p <- p * (1 - lr * wd)
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^s)) / (sqrt(v / (1 - b2^s)) + eps)
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every parameter. Throws if a parameter has no grad.
  void step(std::span<Tensor* const> params);

  const AdamWConfig& config() const { return cfg_; }
  std::int64_t steps() const { return step_; }

  // Moment buffers, aligned with the params passed to step().
  std::vector<Eigen::ArrayXd>& first_moments() { return m_; }
  std::vector<Eigen::ArrayXd>& second_moments() { return v_; }
  const std::vector<Eigen::ArrayXd>& first_moments() const { return m_; }
  const std::vector<Eigen::ArrayXd>& second_moments() const { return v_; }
  void restore(std::int64_t steps, std::vector<Eigen::ArrayXd> m, std::vector<Eigen::ArrayXd> v);

 private:
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
};

}  // namespace ubct
