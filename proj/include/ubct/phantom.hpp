#pragma once

#include "ubct/geometry.hpp"
#include "ubct/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ubct {

/// Ellipse in normalized coordinates: the image spans [-1, 1]^2, y up.
struct Ellipse {
  double intensity;
  double a;          // semi-axis along the rotated x
  double b;          // semi-axis along the rotated y
  double x0;
  double y0;
  double phi_deg;    // counter-clockwise rotation

  bool contains(double x, double y) const;
};

enum class PhantomKind { SheppLogan, RandomEllipses };

PhantomKind parse_phantom_kind(const std::string& name);
std::string to_string(PhantomKind kind);

/// Modified Shepp-Logan table (values in [0, 1]).
std::vector<Ellipse> shepp_logan_ellipses();
/// 4-10 ellipses: a body ellipse plus interior features, all inside the unit disc.
std::vector<Ellipse> random_ellipses(Rng& rng);

/// Normalized coordinate of pixel (i, j)'s centre.
double pixel_x(Eigen::Index j, Eigen::Index n);
double pixel_y(Eigen::Index i, Eigen::Index n);

/// Sums ellipse intensities at pixel centres (or the mean over a
/// supersample x supersample sub-grid) and clamps to [0, 1].
Image rasterize(const std::vector<Ellipse>& ellipses, Eigen::Index n, int supersample = 1, bool clamp = true);

Image make_phantom(PhantomKind kind, Eigen::Index n, std::uint64_t seed);

}  // namespace ubct
