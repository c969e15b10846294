#include "ubct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ubct {

bool Ellipse::contains(double x, double y) const {
  const double phi = phi_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double dx = x - x0, dy = y - y0;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "shepp_logan") return PhantomKind::SheppLogan;
  if (name == "random_ellipses") return PhantomKind::RandomEllipses;
  throw std::invalid_argument("unsupported phantom kind '" + name + "'");
}

std::string to_string(PhantomKind kind) { return kind == PhantomKind::SheppLogan ? "shepp_logan" : "random_ellipses"; }

std::vector<Ellipse> shepp_logan_ellipses() {
  return {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
}

std::vector<Ellipse> random_ellipses(Rng& rng) {
  std::uniform_int_distribution<int> count(4, 10);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const int m = count(rng);
  std::vector<Ellipse> out;
  out.reserve(static_cast<std::size_t>(m));
  // Body: bounded by a semi-axis of 0.85 so every rotation stays in the unit disc.
  const Ellipse body{uniform(0.3, 0.5), uniform(0.6, 0.85), uniform(0.6, 0.85), uniform(-0.05, 0.05), uniform(-0.05, 0.05), uniform(0.0, 180.0)};
  out.push_back(body);
  for (int e = 1; e < m; ++e) {
    const double r = uniform(0.0, 0.45);
    const double ang = uniform(0.0, 2.0 * std::numbers::pi);
    const double a = uniform(0.04, 0.3), b = uniform(0.04, 0.3);
    out.push_back({uniform(-0.25, 0.45), a, b, body.x0 + r * std::cos(ang), body.y0 + r * std::sin(ang), uniform(0.0, 180.0)});
  }
  return out;
}

double pixel_x(Eigen::Index j, Eigen::Index n) { return (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) / (0.5 * static_cast<double>(n)); }
double pixel_y(Eigen::Index i, Eigen::Index n) { return (0.5 * static_cast<double>(n - 1) - static_cast<double>(i)) / (0.5 * static_cast<double>(n)); }

Image rasterize(const std::vector<Ellipse>& ellipses, Eigen::Index n, int supersample, bool clamp) {
  if (supersample < 1) throw std::invalid_argument("rasterize: supersample must be >= 1");
  Image img(n, n);
  const double pix = 2.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int si = 0; si < supersample; ++si) {
        for (int sj = 0; sj < supersample; ++sj) {
          const double x = pixel_x(j, n) + pix * ((sj + 0.5) / supersample - 0.5);
          const double y = pixel_y(i, n) - pix * ((si + 0.5) / supersample - 0.5);
          double v = 0.0;
          for (const Ellipse& e : ellipses) {
            if (e.contains(x, y)) v += e.intensity;
          }
          acc += clamp ? std::clamp(v, 0.0, 1.0) : v;
        }
      }
      img(i, j) = acc / (supersample * supersample);
    }
  }
  return img;
}

Image make_phantom(PhantomKind kind, Eigen::Index n, std::uint64_t seed) {
  if (n < 16) throw std::invalid_argument("make_phantom: n must be >= 16");
  if (kind == PhantomKind::SheppLogan) return rasterize(shepp_logan_ellipses(), n);
  Rng rng = Rng(seed).substream("ellipses");
  return rasterize(random_ellipses(rng), n);
}

}  // namespace ubct
