#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace ubct {

template <typename Scalar>
using ImageT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x n attenuation map; row 0 is the top of the image.
using Image = ImageT<double>;
/// n_views x n_dets line integrals; row v is the view at angles[v].
using Sinogram = ImageT<double>;

/// Parallel-beam scan description.
///
/// Pixels are unit squares; the image occupies [-n/2, n/2]^2 with pixel (i, j)
/// centred at (j - (n-1)/2, (n-1)/2 - i). Detector d sits at offset
/// s_d = (d - (n_dets-1)/2) * det_spacing along (cos a, sin a); its ray runs
/// along (-sin a, cos a).
struct Geometry {
  Eigen::Index n = 64;
  Eigen::Index n_views = 90;
  Eigen::Index n_dets = 95;
  double det_spacing = 1.0;
  std::vector<double> angles;

  /// Uniform angles a_v = v * pi / n_views.
  static Geometry parallel(Eigen::Index n, Eigen::Index n_views, Eigen::Index n_dets, double det_spacing = 1.0);

  void validate() const;
  double det_offset(Eigen::Index d) const { return (static_cast<double>(d) - 0.5 * static_cast<double>(n_dets - 1)) * det_spacing; }

  void check_image(const Image& img, const char* what) const;
  void check_sinogram(const Sinogram& sino, const char* what) const;
};

}  // namespace ubct
