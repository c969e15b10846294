#include "ubct/noise.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ubct {

namespace {
constexpr double kCountFloor = 1.0;
}

void NoiseConfig::validate() const {
  if (!(i0 > 0.0)) throw std::invalid_argument("noise: i0 must be > 0");
  if (!(dose_fraction > 0.0 && dose_fraction <= 1.0)) throw std::invalid_argument("noise: dose_fraction must be in (0, 1]");
  if (!(elec_var >= 0.0)) throw std::invalid_argument("noise: elec_var must be >= 0");
  if (!(atten_scale > 0.0)) throw std::invalid_argument("noise: atten_scale must be > 0");
}

double sample_counts(double lambda, double elec_var, Rng& rng) {
  double c = 0.0;
  if (lambda > 0.0) {
    std::poisson_distribution<long long> poisson(lambda);
    c = static_cast<double>(poisson(rng));
  }
  if (elec_var > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(elec_var));
    c += normal(rng);
  }
  return c;
}

Sinogram simulate_ldct(const Sinogram& clean, const NoiseConfig& cfg) {
  cfg.validate();
  if ((clean.array() < 0.0).any()) throw std::invalid_argument("simulate_ldct: clean sinogram has negative line integrals");
  Rng rng = Rng(cfg.seed).substream("ldct");
  const double blank = cfg.dose_fraction * cfg.i0;
  Sinogram out(clean.rows(), clean.cols());
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    const double lambda = blank * std::exp(-cfg.atten_scale * clean.data()[i]);
    const double c = sample_counts(lambda, cfg.elec_var, rng);
    out.data()[i] = -std::log(std::max(c, kCountFloor) / blank) / cfg.atten_scale;
  }
  return out;
}

}  // namespace ubct
