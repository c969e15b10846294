// ubct: low-dose CT reconstruction with an unfolded diffusion-bridge network.

#include "ubct/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace ubct;

// Remaining `--key value` / `--key=value` arguments override config keys.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
    arg = arg.substr(2);
    std::string value;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      value = arg.substr(eq + 1);
      arg = arg.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for --" + arg);
      value = extras[++i];
    }
    set_config_value(cfg, arg, value);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError("bad list element '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

void print_rows(const std::vector<AblationRow>& rows, const char* label) {
  for (const auto& r : rows) {
    std::cout << label << '=' << r.setting << "  psnr " << r.psnr.mean << " ± " << r.psnr.sd << " dB  ssim " << r.ssim.mean << " ± " << r.ssim.sd
              << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unfolded diffusion-bridge CT reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->allow_extras();
    return sub;
  };

  auto* phantom = with_config(app.add_subcommand("phantom", "Generate clean phantom images"));
  std::string kind = "random_ellipses", out_dir;
  long count = 1;
  long n = 64;
  std::uint64_t seed = 1;
  phantom->add_option("--kind", kind, "shepp_logan | random_ellipses");
  phantom->add_option("--count", count);
  phantom->add_option("--n", n);
  phantom->add_option("--seed", seed);
  phantom->add_option("--out", out_dir)->required();

  auto* simulate = with_config(app.add_subcommand("simulate", "Project, add low-dose noise and run FBP on a clean/ directory"));
  std::string data_dir;
  simulate->add_option("--data", data_dir)->required();

  auto* prepare = with_config(app.add_subcommand("prepare", "Generate and simulate the train and test datasets"));

  auto* train = with_config(app.add_subcommand("train", "Train the unfolded network"));
  std::string resume;
  bool per_layer = false;
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_flag("--per-layer-weights", per_layer, "independent POM weights per layer (same as --model.per_layer_weights true)");

  auto* sample = with_config(app.add_subcommand("sample", "Reconstruct the test set with a trained checkpoint"));
  std::string ckpt, sample_out;
  std::optional<double> sigma_scale;
  bool no_final_noise = false;
  sample->add_option("--ckpt", ckpt)->required();
  sample->add_option("--sigma-scale", sigma_scale);
  sample->add_flag("--no-final-noise", no_final_noise);
  sample->add_option("--out", sample_out, "output directory (default: <paths.out>/sample)");

  auto* eval = app.add_subcommand("eval", "Score reconstructions against references");
  std::string recon_dir, ref_dir, eval_out = "metrics.csv";
  double range = 1.0;
  eval->add_option("--recon", recon_dir)->required();
  eval->add_option("--ref", ref_dir)->required();
  eval->add_option("--range", range);
  eval->add_option("--out", eval_out);

  auto* dump = with_config(app.add_subcommand("schedule-dump", "Print the bridge schedule as CSV"));

  auto* ablate_sigma = with_config(app.add_subcommand("ablate-sigma", "Sampling-noise scale sweep"));
  std::string scales = "1,3,6,9,12,15";
  ablate_sigma->add_option("--ckpt", ckpt)->required();
  ablate_sigma->add_option("--scales", scales);

  auto* ablate_k = with_config(app.add_subcommand("ablate-k", "Number-of-layers sweep"));
  std::string klist = "5,6,7,8,9";
  ablate_k->add_option("--k", klist);
  ablate_k->add_flag("--per-layer-weights", per_layer);

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    CLI::App* active = app.get_subcommands().front();
    apply_overrides(cfg, active->remaining());
    if (per_layer) cfg.per_layer_weights = true;
    cfg.validate();

    if (active == phantom) {
      cmd_phantom(parse_phantom_kind(kind), count, n, seed, out_dir);
    } else if (active == simulate) {
      cmd_simulate(cfg, data_dir);
    } else if (active == prepare) {
      cmd_prepare(cfg);
    } else if (active == train) {
      const auto summary = cmd_train(cfg, resume.empty() ? std::nullopt : std::optional<fs::path>(resume));
      std::cout << "trained " << summary.steps << " steps (L = " << summary.lipschitz << "), wrote " << summary.checkpoint.string() << '\n';
    } else if (active == sample) {
      const double c = sigma_scale.value_or(cfg.sigma_scale);
      const bool final_noise = cfg.final_noise && !no_final_noise;
      const fs::path out = sample_out.empty() ? fs::path(cfg.out_dir) / "sample" : fs::path(sample_out);
      const MetricReport rep = cmd_sample(cfg, ckpt, c, final_noise, out);
      std::cout << "psnr " << rep.psnr().mean << " ± " << rep.psnr().sd << " dB, ssim " << rep.ssim().mean << " ± " << rep.ssim().sd << '\n';
    } else if (active == eval) {
      const MetricReport rep = cmd_eval(recon_dir, ref_dir, range, eval_out);
      std::cout << "psnr " << rep.psnr().mean << " ± " << rep.psnr().sd << " dB, ssim " << rep.ssim().mean << " ± " << rep.ssim().sd << '\n';
    } else if (active == dump) {
      cmd_schedule_dump(cfg, std::cout);
    } else if (active == ablate_sigma) {
      print_rows(cmd_ablate_sigma(cfg, ckpt, parse_list<double>(scales)), "sigma_scale");
    } else if (active == ablate_k) {
      print_rows(cmd_ablate_k(cfg, parse_list<int>(klist)), "K");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
