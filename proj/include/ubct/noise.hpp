#pragma once

#include "ubct/geometry.hpp"
#include "ubct/rng.hpp"

#include <cstdint>

namespace ubct {

/// Low-dose acquisition model. Sinogram values are in pixel-length units;
/// atten_scale converts them to dimensionless attenuation for the photon
/// statistics: lambda = dose_fraction * i0 * exp(-atten_scale * y).
struct NoiseConfig {
  double i0 = 1e5;
  double dose_fraction = 0.2;
  double elec_var = 8.2;
  double atten_scale = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Detected count for one bin: Poisson(lambda) + Normal(0, elec_var).
double sample_counts(double lambda, double elec_var, Rng& rng);

/// Applies quantum and electronic noise bin by bin and returns the
/// log-transformed noisy sinogram. Counts are floored at 1 before the log.
Sinogram simulate_ldct(const Sinogram& clean, const NoiseConfig& cfg);

}  // namespace ubct
