#include "ubct/geometry.hpp"

#include <numbers>
#include <stdexcept>

namespace ubct {

Geometry Geometry::parallel(Eigen::Index n, Eigen::Index n_views, Eigen::Index n_dets, double det_spacing) {
  Geometry g;
  g.n = n;
  g.n_views = n_views;
  g.n_dets = n_dets;
  g.det_spacing = det_spacing;
  g.angles.resize(static_cast<std::size_t>(std::max<Eigen::Index>(n_views, 0)));
  for (Eigen::Index v = 0; v < n_views; ++v) {
    g.angles[static_cast<std::size_t>(v)] = static_cast<double>(v) * std::numbers::pi / static_cast<double>(n_views);
  }
  g.validate();
  return g;
}

void Geometry::validate() const {
  if (n < 1 || n_views < 1 || n_dets < 1) throw std::invalid_argument("geometry: n, n_views and n_dets must be >= 1");
  if (!(det_spacing > 0.0)) throw std::invalid_argument("geometry: det_spacing must be > 0");
  if (angles.size() != static_cast<std::size_t>(n_views)) throw std::invalid_argument("geometry: angle count differs from n_views");
  for (std::size_t v = 0; v < angles.size(); ++v) {
    if (angles[v] < 0.0 || angles[v] >= std::numbers::pi) throw std::invalid_argument("geometry: angles must lie in [0, pi)");
    if (v > 0 && !(angles[v] > angles[v - 1])) throw std::invalid_argument("geometry: angles must be strictly increasing");
  }
}

void Geometry::check_image(const Image& img, const char* what) const {
  if (img.rows() != n || img.cols() != n) {
    throw std::invalid_argument(std::string(what) + ": image is " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                                ", geometry expects " + std::to_string(n) + "x" + std::to_string(n));
  }
}

void Geometry::check_sinogram(const Sinogram& sino, const char* what) const {
  if (sino.rows() != n_views || sino.cols() != n_dets) {
    throw std::invalid_argument(std::string(what) + ": sinogram is " + std::to_string(sino.rows()) + "x" + std::to_string(sino.cols()) +
                                ", geometry expects " + std::to_string(n_views) + "x" + std::to_string(n_dets));
  }
}

}  // namespace ubct
