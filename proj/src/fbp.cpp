#include "ubct/fbp.hpp"

#include "ubct/projector.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ubct {

FilterKind parse_filter(const std::string& name) {
  if (name == "ramp") return FilterKind::Ramp;
  if (name == "ram-lak-windowed" || name == "hann") return FilterKind::RamLakHann;
  throw std::invalid_argument("unknown filter '" + name + "' (expected ramp or ram-lak-windowed)");
}

std::string to_string(FilterKind kind) { return kind == FilterKind::Ramp ? "ramp" : "ram-lak-windowed"; }

Eigen::VectorXd ramp_response(Eigen::Index padded, double det_spacing, FilterKind kind) {
  const double pi = std::numbers::pi;
  std::vector<double> h(static_cast<std::size_t>(padded), 0.0);
  h[0] = 1.0 / (4.0 * det_spacing * det_spacing);
  for (Eigen::Index k = 1; k <= padded / 2; ++k) {
    if (k % 2 == 0) continue;
    const double v = -1.0 / (static_cast<double>(k * k) * pi * pi * det_spacing * det_spacing);
    h[static_cast<std::size_t>(k)] = v;
    h[static_cast<std::size_t>(padded - k)] = v;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, h);
  Eigen::VectorXd resp(padded);
  for (Eigen::Index k = 0; k < padded; ++k) {
    double r = spec[static_cast<std::size_t>(k)].real();
    if (kind == FilterKind::RamLakHann) {
      const double f = static_cast<double>(std::min(k, padded - k)) / static_cast<double>(padded);  // cycles/bin, [0, 0.5]
      r *= 0.5 * (1.0 + std::cos(2.0 * pi * f));
    }
    resp[k] = r;
  }
  return resp;
}

Sinogram filter_sinogram(const Sinogram& sino, const Geometry& geom, FilterKind kind) {
  geom.check_sinogram(sino, "fbp");
  Eigen::Index padded = 1;
  while (padded < 2 * geom.n_dets) padded *= 2;
  const Eigen::VectorXd resp = ramp_response(padded, geom.det_spacing, kind);

  Eigen::FFT<double> fft;
  std::vector<double> row(static_cast<std::size_t>(padded));
  std::vector<std::complex<double>> spec;
  std::vector<double> back;
  Sinogram out(geom.n_views, geom.n_dets);
  for (Eigen::Index v = 0; v < geom.n_views; ++v) {
    std::fill(row.begin(), row.end(), 0.0);
    for (Eigen::Index d = 0; d < geom.n_dets; ++d) row[static_cast<std::size_t>(d)] = sino(v, d);
    fft.fwd(spec, row);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(spec.size()); ++k) spec[static_cast<std::size_t>(k)] *= resp[k];
    fft.inv(back, spec);
    // Discrete convolution approximates the integral: scale by the bin width.
    for (Eigen::Index d = 0; d < geom.n_dets; ++d) out(v, d) = back[static_cast<std::size_t>(d)] * geom.det_spacing;
  }
  return out;
}

Image fbp(const Sinogram& sino, const Geometry& geom, FilterKind kind) {
  const Sinogram filtered = filter_sinogram(sino, geom, kind);
  // The matched adjoint spreads each bin over a strip of width det_spacing,
  // so it carries an extra 1/det_spacing relative to continuous back-projection.
  return back_project(filtered, geom) * (geom.det_spacing * std::numbers::pi / static_cast<double>(geom.n_views));
}

}  // namespace ubct
