#pragma once

#include "ubct/geometry.hpp"
#include "ubct/phantom.hpp"
#include "ubct/rng.hpp"
#include "ubct/tensor.hpp"
#include "ubct/unfolded.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ubct::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t.data[i] = u(rng);
  return t;
}

inline Image random_image(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(rows, cols);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
  return img;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  const double scale = std::max(a.matrix().norm(), b.matrix().norm());
  if (scale < 1e-12) return 0.0;
  return (a - b).matrix().norm() / scale;
}

/// Backpropagates `loss` once, then compares every parameter's gradient with
/// central differences of step h. Returns the worst per-tensor relative error.
/// `loss(tape, leaves)` must build a 0-d Var from leaves bound to `params`.
template <typename Loss>
double gradient_check(const std::vector<Tensor*>& params, Loss&& loss, double h = 1e-5) {
  for (Tensor* p : params) p->zero_grad();
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.leaf(*p));
    tape.backward(loss(tape, leaves));
  }
  auto evaluate = [&] {
    Tape tape(false);
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.leaf(*p));
    return loss(tape, leaves).value().item();
  };
  double worst = 0.0;
  for (Tensor* p : params) {
    Eigen::ArrayXd fd(p->numel());
    for (Index i = 0; i < p->numel(); ++i) {
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double up = evaluate();
      p->data[i] = saved - h;
      const double down = evaluate();
      p->data[i] = saved;
      fd[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(*p->grad, fd));
  }
  return worst;
}

/// Like gradient_check, but over a bound model: `loss(tape, binding)` builds a
/// 0-d Var. Checks up to `per_tensor` randomly chosen entries of every
/// parameter tensor (all entries of smaller tensors).
template <typename Loss>
double model_gradient_check(ModelParams& params, Loss&& loss, Index per_tensor, Rng& rng, double h = 1e-5) {
  params.zero_grad();
  {
    Tape tape;
    const ModelBinding binding = bind(tape, params);
    tape.backward(loss(tape, binding));
  }
  auto evaluate = [&] {
    Tape tape(false);
    const ModelBinding binding = bind(tape, params);
    return loss(tape, binding).value().item();
  };
  double worst = 0.0;
  for (Tensor* p : params.parameters()) {
    std::vector<Index> picks;
    if (p->numel() <= per_tensor) {
      for (Index i = 0; i < p->numel(); ++i) picks.push_back(i);
    } else {
      std::uniform_int_distribution<Index> pick(0, p->numel() - 1);
      for (Index i = 0; i < per_tensor; ++i) picks.push_back(pick(rng));
    }
    Eigen::ArrayXd fd(static_cast<Index>(picks.size())), an(static_cast<Index>(picks.size()));
    for (std::size_t j = 0; j < picks.size(); ++j) {
      const Index i = picks[j];
      const double saved = p->data[i];
      p->data[i] = saved + h;
      const double up = evaluate();
      p->data[i] = saved - h;
      const double down = evaluate();
      p->data[i] = saved;
      fd[static_cast<Index>(j)] = (up - down) / (2.0 * h);
      an[static_cast<Index>(j)] = (*p->grad)[i];
    }
    worst = std::max(worst, relative_error(an, fd));
  }
  return worst;
}

/// Uniform disc of the given radius (pixels) centred in an n x n image.
inline Image disc(Index n, double radius_px, double value, int supersample) {
  const double a = radius_px / (0.5 * static_cast<double>(n));
  return rasterize({{value, a, a, 0.0, 0.0, 0.0}}, n, supersample, false);
}

/// Triangular rate peaking at t = 0.5, written independently of the library.
inline double triangular_beta(double t, double beta_min, double beta_max) {
  return beta_max - 2.0 * (beta_max - beta_min) * std::abs(t - 0.5);
}

namespace detail {
inline double simpson(double a, double b, double fa, double fm, double fb) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole,
                               double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b], relative tolerance ~1e-14.
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = detail::simpson(a, b, fa, fm, fb);
  return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, 1e-14 * std::abs(whole), 30);
}

/// Integral of the triangular rate over [a, b], split at the kink.
inline double triangular_integral(double a, double b, double beta_min, double beta_max) {
  auto f = [=](double t) { return triangular_beta(t, beta_min, beta_max); };
  if (a < 0.5 && b > 0.5) return integrate(f, a, 0.5) + integrate(f, 0.5, b);
  return integrate(f, a, b);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ubct_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ubct::testing
