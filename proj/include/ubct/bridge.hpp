#pragma once

#include "ubct/geometry.hpp"
#include "ubct/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ubct {

/// Triangular rate schedule peaking at t = 0.5, sampled on the grid t_0..t_K.
struct ScheduleConfig {
  double beta_min = 1e-8;
  double beta_max = 3.005e-6;
  int K = 6;
  std::vector<double> grid;  // empty: uniform t_k = k / K

  void validate() const;
};

namespace detail {
inline void check_time(double t, const char* fn) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error(std::string(fn) + ": t = " + std::to_string(t) + " outside [0, 1]");
}
}  // namespace detail

template <typename Scalar>
Scalar beta_at(Scalar t, const ScheduleConfig& cfg) {
  detail::check_time(static_cast<double>(t), "beta_at");
  const Scalar span = Scalar(cfg.beta_max - cfg.beta_min);
  if (t <= Scalar(0.5)) return Scalar(cfg.beta_min) + 2 * span * t;
  return Scalar(cfg.beta_max) - 2 * span * (t - Scalar(0.5));
}

/// Integral of beta over [0, t], closed form of the piecewise-linear schedule.
template <typename Scalar>
Scalar gamma_sq_from_zero(Scalar t, const ScheduleConfig& cfg) {
  const Scalar bmin = Scalar(cfg.beta_min), bmax = Scalar(cfg.beta_max);
  const Scalar span = bmax - bmin;
  if (t <= Scalar(0.5)) return bmin * t + span * t * t;
  const Scalar u = t - Scalar(0.5);
  const Scalar half = bmin * Scalar(0.5) + span * Scalar(0.25);
  return half + bmax * u - span * u * u;
}

/// (gamma^2_t, tilde-gamma^2_t): integrals of beta over [0, t] and [t, 1].
template <typename Scalar>
std::pair<Scalar, Scalar> gammas_at(Scalar t, const ScheduleConfig& cfg) {
  detail::check_time(static_cast<double>(t), "gammas_at");
  // The schedule is symmetric about 0.5, so the tail integral is the head
  // integral at 1 - t.
  return {gamma_sq_from_zero(t, cfg), gamma_sq_from_zero(Scalar(1) - t, cfg)};
}

/// (alpha_t, sigma_t). At t = 0 and t = 1 the limits alpha = 0 / 1, sigma = 0.
template <typename Scalar>
std::pair<Scalar, Scalar> mixing_at(Scalar t, const ScheduleConfig& cfg) {
  detail::check_time(static_cast<double>(t), "mixing_at");
  if (t == Scalar(0)) return {Scalar(0), Scalar(0)};
  if (t == Scalar(1)) return {Scalar(1), Scalar(0)};
  const auto [g, gt] = gammas_at(t, cfg);
  const Scalar total = g + gt;
  return {g / total, std::sqrt(g * gt / total)};
}

/// Uniform grid t_k = k / K, k = 0..K.
inline std::vector<double> time_grid(int K) {
  if (K < 2) throw std::invalid_argument("time_grid: K must be >= 2");
  std::vector<double> grid(static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) grid[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(K);
  grid.back() = 1.0;
  return grid;
}

inline void ScheduleConfig::validate() const {
  if (!(beta_min > 0.0 && beta_min <= beta_max)) throw std::invalid_argument("schedule: require 0 < beta_min <= beta_max");
  if (K < 2) throw std::invalid_argument("schedule: K must be >= 2");
  if (!grid.empty()) {
    if (grid.size() != static_cast<std::size_t>(K) + 1) throw std::invalid_argument("schedule: grid must have K + 1 nodes");
    if (grid.front() != 0.0 || grid.back() != 1.0) throw std::invalid_argument("schedule: grid must start at 0 and end at 1");
    for (std::size_t k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("schedule: grid must be strictly increasing");
    }
  }
}

/// Per-node schedule values on t_0..t_K.
struct Schedule {
  ScheduleConfig config;
  std::vector<double> t, beta, gamma_sq, gamma_tilde_sq, alpha, sigma;

  explicit Schedule(ScheduleConfig cfg) : config(std::move(cfg)) {
    config.validate();
    t = config.grid.empty() ? time_grid(config.K) : config.grid;
    for (double tk : t) {
      const auto [g, gt] = gammas_at(tk, config);
      const auto [a, s] = mixing_at(tk, config);
      beta.push_back(beta_at(tk, config));
      gamma_sq.push_back(g);
      gamma_tilde_sq.push_back(gt);
      alpha.push_back(a);
      sigma.push_back(s);
    }
  }

  int K() const { return config.K; }
  double time(int k) const { return t.at(static_cast<std::size_t>(k)); }
  double alpha_at(int k) const { return alpha.at(static_cast<std::size_t>(k)); }
  double sigma_at(int k) const { return sigma.at(static_cast<std::size_t>(k)); }
};

/// Standard-normal field of the given shape.
inline Image standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Image z(rows, cols);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  return z;
}

/// x_t = (1 - alpha_t) x0 + alpha_t x1 + sigma_scale * sigma_t z at grid node k.
template <typename DerivedA, typename DerivedB>
Image bridge_sample(const Eigen::MatrixBase<DerivedA>& x0, const Eigen::MatrixBase<DerivedB>& x1, int k, const Schedule& schedule, Rng& rng,
                    double sigma_scale = 1.0) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw std::invalid_argument("bridge_sample: x0 and x1 differ in shape");
  if (k < 0 || k > schedule.K()) throw std::out_of_range("bridge_sample: grid index out of range");
  const double a = schedule.alpha_at(k);
  const double s = sigma_scale * schedule.sigma_at(k);
  Image out = (1.0 - a) * x0 + a * x1;
  if (s != 0.0) out += s * standard_normal(out.rows(), out.cols(), rng);
  return out;
}

}  // namespace ubct
