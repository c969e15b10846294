#pragma once

#include "ubct/geometry.hpp"
#include "ubct/rng.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace ubct {

/// Walks the ray (angle with cos_a/sin_a, detector offset s) through the pixel
/// grid and calls visit(row, col, length) for every pixel it crosses with a
/// positive intersection length. Lengths are exact segment/square
/// intersections (Siddon), so the line integral of the piecewise-constant
/// image is sum(img(row, col) * length). An axis-aligned ray running along a
/// pixel edge contributes half its length to each side.
template <typename Visitor>
void trace_ray(Eigen::Index n, double cos_a, double sin_a, double s, std::vector<double>& scratch, Visitor&& visit) {
  const double half = 0.5 * static_cast<double>(n);
  const double x0 = s * cos_a, y0 = s * sin_a;
  const double dx = -sin_a, dy = cos_a;
  constexpr double kAxisEps = 1e-12;
  constexpr double kEdgeEps = 1e-9;
  // Axis-aligned rays cross every pixel of one column (or row). A ray lying
  // on a grid line is shared equally by the two pixels it separates.
  if (std::abs(dx) < kAxisEps || std::abs(dy) < kAxisEps) {
    const bool vertical = std::abs(dx) < kAxisEps;
    const double u = vertical ? x0 + half : half - y0;
    const double nd = static_cast<double>(n);
    if (u < -kEdgeEps || u > nd + kEdgeEps) return;
    const double k = std::round(u);
    Eigen::Index lanes[2];
    double weight = 1.0;
    int count = 0;
    if (std::abs(u - k) < kEdgeEps) {
      weight = 0.5;
      for (double c : {k - 1.0, k}) {
        if (c >= 0.0 && c < nd) lanes[count++] = static_cast<Eigen::Index>(c);
      }
    } else {
      lanes[count++] = static_cast<Eigen::Index>(std::floor(u));
    }
    for (int l = 0; l < count; ++l) {
      for (Eigen::Index m = 0; m < n; ++m) {
        if (vertical) {
          visit(m, lanes[l], weight);
        } else {
          visit(lanes[l], m, weight);
        }
      }
    }
    return;
  }

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  auto slab = [&](double p0, double d) {
    double a = (-half - p0) / d, b = (half - p0) / d;
    if (a > b) std::swap(a, b);
    tmin = std::max(tmin, a);
    tmax = std::min(tmax, b);
  };
  slab(x0, dx);
  slab(y0, dy);
  if (!(tmax > tmin)) return;

  // Plane crossings strictly inside (tmin, tmax), each list ascending.
  scratch.clear();
  auto crossings = [&](double p0, double d) {
    const std::size_t start = scratch.size();
    for (Eigen::Index k = 0; k <= n; ++k) {
      const double t = (-half + static_cast<double>(k) - p0) / d;
      if (t > tmin && t < tmax) scratch.push_back(t);
    }
    if (d < 0.0) std::reverse(scratch.begin() + static_cast<std::ptrdiff_t>(start), scratch.end());
    return start;
  };
  crossings(x0, dx);
  const std::size_t mid = crossings(y0, dy);
  std::inplace_merge(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
  scratch.push_back(tmax);

  double prev = tmin;
  for (double t : scratch) {
    const double len = t - prev;
    if (len > 1e-12) {
      const double tm = 0.5 * (prev + t);
      auto col = static_cast<Eigen::Index>(std::floor(x0 + tm * dx + half));
      auto row = static_cast<Eigen::Index>(std::floor(half - (y0 + tm * dy)));
      col = std::clamp<Eigen::Index>(col, 0, n - 1);
      row = std::clamp<Eigen::Index>(row, 0, n - 1);
      visit(row, col, len);
    }
    prev = t;
  }
}

/// H: exact ray-driven line integrals through the pixel grid.
Sinogram forward_project(const Image& img, const Geometry& geom);
/// H^T: matched adjoint of forward_project.
Image back_project(const Sinogram& sino, const Geometry& geom);

/// Precomputed sparse H for repeated application (rows: view-major bins,
/// columns: row-major pixels). Bit-compatible with the matrix-free pair up to
/// summation order.
class SystemMatrix {
 public:
  explicit SystemMatrix(Geometry geom);

  const Geometry& geometry() const { return geom_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return h_; }

  Sinogram apply(const Image& img) const;
  Image adjoint(const Sinogram& sino) const;
  /// H^T H x
  Image normal(const Image& img) const { return adjoint(apply(img)); }

 private:
  Geometry geom_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> h_;
};

struct PowerIterationResult {
  double lipschitz = 0.0;          // largest eigenvalue of the normal operator
  Eigen::VectorXd eigenvector;     // unit norm
  std::vector<double> rayleigh;    // one Rayleigh quotient per iteration
  int iterations = 0;
  bool converged = false;
};

/// Normalized power iteration on a symmetric PSD operator `normal_op`
/// (e.g. v -> H^T H v). Stops once successive Rayleigh quotients differ by
/// less than tol * |quotient|; otherwise returns the last iterate with
/// converged = false.
template <typename NormalOp>
PowerIterationResult power_iteration(NormalOp&& normal_op, Eigen::Index dim, int iters, double tol, std::uint64_t seed = 7) {
  if (iters < 1) throw std::invalid_argument("power_iteration: iters must be >= 1");
  Rng rng(seed);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
  v.normalize();
  PowerIterationResult res;
  double prev = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = normal_op(v);
    const double q = v.dot(w);
    res.rayleigh.push_back(q);
    res.iterations = it + 1;
    const double norm = w.norm();
    if (norm == 0.0) {
      res.lipschitz = 0.0;
      res.eigenvector = v;
      res.converged = true;
      return res;
    }
    v = w / norm;
    if (it > 0 && std::abs(q - prev) <= tol * std::abs(q)) {
      res.converged = true;
      break;
    }
    prev = q;
  }
  res.eigenvector = v;
  res.lipschitz = v.dot(normal_op(v));
  return res;
}

/// Largest eigenvalue of H^T H for the geometry. Warns on std::clog when the
/// iteration does not converge.
PowerIterationResult power_iteration_L(const SystemMatrix& h, int iters = 100, double tol = 1e-6);
PowerIterationResult power_iteration_L(const Geometry& geom, int iters = 100, double tol = 1e-6);

}  // namespace ubct
