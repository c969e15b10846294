#include "ubct/metrics.hpp"

#include "ubct/ctf_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ubct {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

Eigen::VectorXd gaussian_window() {
  Eigen::VectorXd w(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return w / w.sum();
}

// Separable valid-mode filtering with the normalized Gaussian.
Image filter_valid(const Image& img, const Eigen::VectorXd& w) {
  const Eigen::Index rows = img.rows() - kWindow + 1, cols = img.cols() - kWindow + 1;
  Image tmp(img.rows(), cols);
  for (Eigen::Index i = 0; i < img.rows(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) tmp(i, j) = img.row(i).segment(j, kWindow).dot(w.transpose());
  }
  Image out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = tmp.col(j).segment(i, kWindow).dot(w);
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, double range) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("ssim: shape mismatch");
  if (a.rows() < kWindow || a.cols() < kWindow) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  if (!(range > 0.0)) throw std::invalid_argument("ssim: range must be > 0");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const Eigen::VectorXd w = gaussian_window();
  const Image mu_a = filter_valid(a, w);
  const Image mu_b = filter_valid(b, w);
  const Image saa = filter_valid(a.cwiseProduct(a), w) - mu_a.cwiseProduct(mu_a);
  const Image sbb = filter_valid(b.cwiseProduct(b), w) - mu_b.cwiseProduct(mu_b);
  const Image sab = filter_valid(a.cwiseProduct(b), w) - mu_a.cwiseProduct(mu_b);
  const auto num = (2.0 * mu_a.array() * mu_b.array() + c1) * (2.0 * sab.array() + c2);
  const auto den = (mu_a.array().square() + mu_b.array().square() + c1) * (saa.array() + sbb.array() + c2);
  return (num / den).mean();
}

MeanSd mean_sd(std::vector<double> values) {
  MeanSd out;
  if (values.empty()) return out;
  // Summing in sorted order keeps the aggregate independent of row order.
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

MeanSd MetricReport::psnr() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.psnr_db);
  return mean_sd(v);
}

MeanSd MetricReport::ssim() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.ssim);
  return mean_sd(v);
}

MetricReport evaluate(const std::filesystem::path& recon_dir, const std::filesystem::path& reference_dir, double range) {
  MetricReport report;
  for (const std::string& name : list_ctf(recon_dir)) {
    const auto ref_path = reference_dir / name;
    if (!std::filesystem::exists(ref_path)) throw std::runtime_error("evaluate: no reference for " + name + " in " + reference_dir.string());
    const Image recon = read_ctf(recon_dir / name);
    const Image ref = read_ctf(ref_path);
    const std::string id = std::filesystem::path(name).stem().string();
    report.rows.push_back({id, psnr(recon, ref, range), ssim(recon, ref, range)});
  }
  if (report.rows.empty()) throw std::runtime_error("evaluate: no .ctf files in " + recon_dir.string());
  return report;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_metrics_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "id,psnr_db,ssim\n";
  for (const auto& r : report.rows) os << r.id << ',' << format_double(r.psnr_db) << ',' << format_double(r.ssim) << '\n';
  const MeanSd p = report.psnr(), s = report.ssim();
  os << "AGGREGATE," << format_double(p.mean) << "±" << format_double(p.sd) << ',' << format_double(s.mean) << "±" << format_double(s.sd) << '\n';
  return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << format_metrics_csv(report);
}

}  // namespace ubct
