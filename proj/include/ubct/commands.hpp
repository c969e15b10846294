#pragma once

#include "ubct/config.hpp"
#include "ubct/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ubct {

namespace fs = std::filesystem;

/// Seed for a named pipeline stage, derived from the master seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage);

/// Writes `count` phantoms to out_dir/clean/NNNNNN.ctf.
void cmd_phantom(PhantomKind kind, long count, Eigen::Index n, std::uint64_t seed, const fs::path& out_dir);

/// Adds sino_clean/, sino_ldct/, fbp_ldct/ and `meta` next to data_dir/clean/.
void cmd_simulate(const ExperimentConfig& cfg, const fs::path& data_dir);

/// Phantoms and simulation for paths.data/train and paths.data/test.
void cmd_prepare(const ExperimentConfig& cfg);

struct TrainSummary {
  long steps = 0;
  double lipschitz = 0.0;
  fs::path checkpoint;
};

/// Trains on paths.data/train; writes model.ckpt, loss.csv and meta to paths.out.
TrainSummary cmd_train(const ExperimentConfig& cfg, const std::optional<fs::path>& resume = std::nullopt);

/// Model, schedule and forward operator reconstructed from a checkpoint echo.
struct LoadedModel {
  ExperimentConfig trained_with;
  ModelParams params;
  Schedule schedule;
  SystemMatrix h;
};
LoadedModel load_model(const fs::path& ckpt);

/// Reconstructs paths.data/test into out_dir/recon and scores against the clean images.
MetricReport cmd_sample(const ExperimentConfig& cfg, const fs::path& ckpt, double sigma_scale, bool final_noise, const fs::path& out_dir);

MetricReport cmd_eval(const fs::path& recon_dir, const fs::path& reference_dir, double range, const fs::path& out_csv);

/// CSV: t,beta,gamma_sq,gamma_tilde_sq,alpha,sigma over the grid.
void cmd_schedule_dump(const ExperimentConfig& cfg, std::ostream& os);

struct AblationRow {
  double setting = 0.0;
  MeanSd psnr;
  MeanSd ssim;
};

/// One row per sigma scale; writes paths.out/ablate_sigma.csv.
std::vector<AblationRow> cmd_ablate_sigma(const ExperimentConfig& cfg, const fs::path& ckpt, const std::vector<double>& scales);

/// One row per K; loads paths.out/k<K>/model.ckpt or trains it. Writes paths.out/ablate_k.csv.
std::vector<AblationRow> cmd_ablate_k(const ExperimentConfig& cfg, const std::vector<int>& ks);

void write_text(const fs::path& path, const std::string& text);

}  // namespace ubct
