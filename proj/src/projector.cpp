#include "ubct/projector.hpp"

#include <cmath>
#include <iostream>

namespace ubct {

Sinogram forward_project(const Image& img, const Geometry& geom) {
  geom.check_image(img, "forward_project");
  Sinogram sino = Sinogram::Zero(geom.n_views, geom.n_dets);
  std::vector<double> scratch;
  for (Eigen::Index v = 0; v < geom.n_views; ++v) {
    const double a = geom.angles[static_cast<std::size_t>(v)];
    const double c = std::cos(a), s = std::sin(a);
    for (Eigen::Index d = 0; d < geom.n_dets; ++d) {
      double acc = 0.0;
      trace_ray(geom.n, c, s, geom.det_offset(d), scratch, [&](Eigen::Index i, Eigen::Index j, double len) { acc += img(i, j) * len; });
      sino(v, d) = acc;
    }
  }
  return sino;
}

Image back_project(const Sinogram& sino, const Geometry& geom) {
  geom.check_sinogram(sino, "back_project");
  Image img = Image::Zero(geom.n, geom.n);
  std::vector<double> scratch;
  for (Eigen::Index v = 0; v < geom.n_views; ++v) {
    const double a = geom.angles[static_cast<std::size_t>(v)];
    const double c = std::cos(a), s = std::sin(a);
    for (Eigen::Index d = 0; d < geom.n_dets; ++d) {
      const double val = sino(v, d);
      if (val == 0.0) continue;
      trace_ray(geom.n, c, s, geom.det_offset(d), scratch, [&](Eigen::Index i, Eigen::Index j, double len) { img(i, j) += val * len; });
    }
  }
  return img;
}

SystemMatrix::SystemMatrix(Geometry geom) : geom_(std::move(geom)) {
  geom_.validate();
  const Eigen::Index n = geom_.n;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(geom_.n_views * geom_.n_dets * 2 * n));
  std::vector<double> scratch;
  for (Eigen::Index v = 0; v < geom_.n_views; ++v) {
    const double a = geom_.angles[static_cast<std::size_t>(v)];
    const double c = std::cos(a), s = std::sin(a);
    for (Eigen::Index d = 0; d < geom_.n_dets; ++d) {
      const Eigen::Index row = v * geom_.n_dets + d;
      trace_ray(n, c, s, geom_.det_offset(d), scratch,
                [&](Eigen::Index i, Eigen::Index j, double len) { triplets.emplace_back(row, i * n + j, len); });
    }
  }
  h_.resize(geom_.n_views * geom_.n_dets, n * n);
  h_.setFromTriplets(triplets.begin(), triplets.end());
  h_.makeCompressed();
}

Sinogram SystemMatrix::apply(const Image& img) const {
  geom_.check_image(img, "SystemMatrix::apply");
  Sinogram out(geom_.n_views, geom_.n_dets);
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()).noalias() = h_ * Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
  return out;
}

Image SystemMatrix::adjoint(const Sinogram& sino) const {
  geom_.check_sinogram(sino, "SystemMatrix::adjoint");
  Image out(geom_.n, geom_.n);
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()).noalias() =
      h_.transpose() * Eigen::Map<const Eigen::VectorXd>(sino.data(), sino.size());
  return out;
}

PowerIterationResult power_iteration_L(const SystemMatrix& h, int iters, double tol) {
  const auto& m = h.matrix();
  auto res = power_iteration([&m](const Eigen::VectorXd& v) -> Eigen::VectorXd { return m.transpose() * (m * v); }, m.cols(), iters, tol);
  if (!res.converged) {
    std::clog << "warning: power iteration did not converge in " << iters << " iterations (L = " << res.lipschitz << ")\n";
  }
  return res;
}

PowerIterationResult power_iteration_L(const Geometry& geom, int iters, double tol) { return power_iteration_L(SystemMatrix(geom), iters, tol); }

}  // namespace ubct
