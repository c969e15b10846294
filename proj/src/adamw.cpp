#include "ubct/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace ubct {

void AdamW::step(std::span<Tensor* const> params) {
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(Eigen::ArrayXd::Zero(p->numel()));
      v_.push_back(Eigen::ArrayXd::Zero(p->numel()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("AdamW: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad) throw std::logic_error("AdamW: parameter " + std::to_string(i) + " has no gradient");
    if (m_[i].size() != params[i]->numel()) throw ShapeError("AdamW: moment shape does not match parameter");
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Eigen::ArrayXd& g = *p.grad;
    p.data *= 1.0 - cfg_.lr * cfg_.weight_decay;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
    p.data -= cfg_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
  }
}

void AdamW::restore(std::int64_t steps, std::vector<Eigen::ArrayXd> m, std::vector<Eigen::ArrayXd> v) {
  if (m.size() != v.size()) throw std::invalid_argument("AdamW::restore: moment lists differ in length");
  step_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace ubct
