#pragma once

#include "ubct/geometry.hpp"

#include <string>

namespace ubct {

enum class FilterKind {
  Ramp,          // Ram-Lak
  RamLakHann,    // Ram-Lak tapered by a Hann window
};

FilterKind parse_filter(const std::string& name);
std::string to_string(FilterKind kind);

/// Frequency response of the discrete ramp filter on a zero-padded grid of
/// `padded` bins, built from the band-limited spatial Ram-Lak kernel
/// h[0] = 1/(4 tau^2), h[odd k] = -1/(k pi tau)^2, h[even k] = 0.
Eigen::VectorXd ramp_response(Eigen::Index padded, double det_spacing, FilterKind kind);

/// Ramp-filters every view (zero-padded FFT convolution).
Sinogram filter_sinogram(const Sinogram& sino, const Geometry& geom, FilterKind kind);

/// Filtered back-projection: filter_sinogram, matched back-projection, then
/// scaling by det_spacing * pi / n_views.
Image fbp(const Sinogram& sino, const Geometry& geom, FilterKind kind = FilterKind::Ramp);

}  // namespace ubct
