#pragma once

#include "ubct/geometry.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubct {

/// 10 log10(range^2 / MSE); +inf when the images are identical.
template <typename DerivedA, typename DerivedB>
double psnr(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, double range = 1.0) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("psnr: shape mismatch");
  if (!(range > 0.0)) throw std::invalid_argument("psnr: range must be > 0");
  const double mse = (a.template cast<double>() - b.template cast<double>()).array().square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse);
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03,
/// averaged over window positions fully inside the image.
double ssim(const Image& a, const Image& b, double range = 1.0);

template <typename DerivedA, typename DerivedB>
double ssim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, double range = 1.0) {
  return ssim(Image(a.template cast<double>()), Image(b.template cast<double>()), range);
}

struct MetricRow {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for one row
};
MeanSd mean_sd(std::vector<double> values);

struct MetricReport {
  std::vector<MetricRow> rows;

  MeanSd psnr() const;
  MeanSd ssim() const;
};

/// Pairs files by name; every reconstruction needs a reference.
MetricReport evaluate(const std::filesystem::path& recon_dir, const std::filesystem::path& reference_dir, double range = 1.0);

/// Header `id,psnr_db,ssim`, one row per image, then `AGGREGATE,<mean>±<sd>,<mean>±<sd>`.
std::string format_metrics_csv(const MetricReport& report);
void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report);

std::string format_double(double v);

}  // namespace ubct
