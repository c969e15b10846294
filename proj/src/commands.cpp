#include "ubct/commands.hpp"

#include "ubct/checkpoint.hpp"
#include "ubct/ctf_io.hpp"
#include "ubct/fbp.hpp"
#include "ubct/projector.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ubct {

namespace {

std::string image_name(long i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06ld.ctf", i);
  return buf;
}

std::string ablation_csv(const char* column, const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << column << ",psnr_mean,psnr_sd,ssim_mean,ssim_sd\n";
  for (const auto& r : rows) {
    os << format_double(r.setting) << ',' << format_double(r.psnr.mean) << ',' << format_double(r.psnr.sd) << ',' << format_double(r.ssim.mean)
       << ',' << format_double(r.ssim.sd) << '\n';
  }
  return os.str();
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage) { return Rng(cfg.seed).substream(stage).key(); }

void cmd_phantom(PhantomKind kind, long count, Eigen::Index n, std::uint64_t seed, const fs::path& out_dir) {
  if (count < 1) throw std::invalid_argument("phantom: count must be >= 1");
  fs::create_directories(out_dir / "clean");
  const Rng root(seed);
  for (long i = 0; i < count; ++i) {
    const Image img = make_phantom(kind, n, root.substream(static_cast<std::uint64_t>(i)).key());
    write_ctf(out_dir / "clean" / image_name(i), img);
  }
}

void cmd_simulate(const ExperimentConfig& cfg, const fs::path& data_dir) {
  cfg.validate();
  const Geometry geom = cfg.geometry();
  const SystemMatrix h(geom);
  for (const char* sub : {"sino_clean", "sino_ldct", "fbp_ldct"}) fs::create_directories(data_dir / sub);
  const Rng noise_root(stage_seed(cfg, "simulate"));
  for (const std::string& name : list_ctf(data_dir / "clean")) {
    const Image clean = read_ctf(data_dir / "clean" / name);
    if (clean.rows() != geom.n || clean.cols() != geom.n) {
      throw std::runtime_error("simulate: " + name + " does not match geometry.n = " + std::to_string(geom.n));
    }
    const Sinogram sino = h.apply(clean);
    const Sinogram ldct = simulate_ldct(sino, cfg.noise(noise_root.substream(name).key()));
    write_ctf(data_dir / "sino_clean" / name, sino);
    write_ctf(data_dir / "sino_ldct" / name, ldct);
    write_ctf(data_dir / "fbp_ldct" / name, fbp(quantize_f32(ldct), geom, cfg.filter));
  }
  write_text(data_dir / "meta", serialize_config(cfg));
}

void cmd_prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path root(cfg.data_dir);
  cmd_phantom(cfg.phantom, cfg.train_count, cfg.n, stage_seed(cfg, "phantom/train"), root / "train");
  cmd_simulate(cfg, root / "train");
  if (cfg.test_count > 0) {
    cmd_phantom(cfg.phantom, cfg.test_count, cfg.n, stage_seed(cfg, "phantom/test"), root / "test");
    cmd_simulate(cfg, root / "test");
  }
}

TrainSummary cmd_train(const ExperimentConfig& cfg, const std::optional<fs::path>& resume) {
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const SystemMatrix h(cfg.geometry());
  const Schedule schedule(cfg.schedule());
  const auto data = load_dataset(fs::path(cfg.data_dir) / "train", h);
  const TrainConfig tcfg = cfg.train((fs::path(cfg.data_dir) / "train").string());

  TrainSummary summary;
  summary.lipschitz = power_iteration_L(h, 200, 1e-8).lipschitz;
  Rng init_rng(stage_seed(cfg, "init"));
  ModelParams params = ModelParams::init(cfg.K, cfg.pom(), cfg.per_layer_weights, 1.0 / summary.lipschitz, init_rng);
  AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  long start = 0;
  if (resume) start = restore_checkpoint(read_checkpoint(*resume), params, &opt);

  const std::string echo = serialize_config(cfg);
  write_text(out / "meta", echo);
  std::ofstream loss_csv(out / "loss.csv", start > 0 ? std::ios::app : std::ios::trunc);
  if (start == 0) loss_csv << "step,L1,L2\n";

  long last_step = start;
  TrainCallbacks cb;
  cb.on_step = [&](long step, const StepLosses& l) {
    loss_csv << step << ',' << format_double(l.l1) << ',' << format_double(l.l2) << '\n';
    last_step = step + 1;
  };
  cb.on_checkpoint = [&](long step) { write_checkpoint(out / ("ckpt_step" + std::to_string(step) + ".ckpt"), make_checkpoint(params, opt, step, echo)); };
  try {
    summary.steps = train(data, params, opt, schedule, h, tcfg, start, cb);
  } catch (const TrainingDiverged& e) {
    write_checkpoint(out / "diverged.ckpt", make_checkpoint(params, opt, last_step, echo));
    throw;
  }
  summary.checkpoint = out / "model.ckpt";
  write_checkpoint(summary.checkpoint, make_checkpoint(params, opt, last_step, echo));
  return summary;
}

LoadedModel load_model(const fs::path& ckpt_path) {
  if (!fs::exists(ckpt_path)) throw std::runtime_error("checkpoint not found: " + ckpt_path.string());
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  ExperimentConfig trained = parse_config(ckpt.config_echo);
  Rng unused(0);
  ModelParams params = ModelParams::init(trained.K, trained.pom(), trained.per_layer_weights, 0.0, unused);
  restore_checkpoint(ckpt, params, nullptr);
  return {trained, std::move(params), Schedule(trained.schedule()), SystemMatrix(trained.geometry())};
}

MetricReport cmd_sample(const ExperimentConfig& cfg, const fs::path& ckpt, double sigma_scale, bool final_noise, const fs::path& out_dir) {
  LoadedModel model = load_model(ckpt);
  const fs::path test_dir = fs::path(cfg.data_dir) / "test";
  const auto data = load_dataset(test_dir, model.h);
  fs::create_directories(out_dir / "recon");
  const Rng root(stage_seed(cfg, "sample"));
  for (const auto& s : data) {
    Rng rng = root.substream(s.id);
    const SampleResult res = sample(s.y, s.x1, s.cond, model.params, model.h, model.schedule, sigma_scale, final_noise, rng);
    if (res.evaluations != model.schedule.K()) throw std::logic_error("sampler evaluated the network an unexpected number of times");
    write_ctf(out_dir / "recon" / (s.id + ".ctf"), res.image);
  }
  ExperimentConfig echo = model.trained_with;
  echo.sigma_scale = sigma_scale;
  echo.final_noise = final_noise;
  write_text(out_dir / "meta", serialize_config(echo));
  return cmd_eval(out_dir / "recon", test_dir / "clean", cfg.metric_range, out_dir / "metrics.csv");
}

MetricReport cmd_eval(const fs::path& recon_dir, const fs::path& reference_dir, double range, const fs::path& out_csv) {
  MetricReport report = evaluate(recon_dir, reference_dir, range);
  write_metrics_csv(out_csv, report);
  return report;
}

void cmd_schedule_dump(const ExperimentConfig& cfg, std::ostream& os) {
  const Schedule s(cfg.schedule());
  os << "t,beta,gamma_sq,gamma_tilde_sq,alpha,sigma\n";
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    os << format_double(s.t[k]) << ',' << format_double(s.beta[k]) << ',' << format_double(s.gamma_sq[k]) << ',' << format_double(s.gamma_tilde_sq[k])
       << ',' << format_double(s.alpha[k]) << ',' << format_double(s.sigma[k]) << '\n';
  }
}

std::vector<AblationRow> cmd_ablate_sigma(const ExperimentConfig& cfg, const fs::path& ckpt, const std::vector<double>& scales) {
  const fs::path out(cfg.out_dir);
  std::vector<AblationRow> rows;
  for (double c : scales) {
    const MetricReport rep = cmd_sample(cfg, ckpt, c, cfg.final_noise, out / ("sigma_" + format_double(c)));
    rows.push_back({c, rep.psnr(), rep.ssim()});
  }
  fs::create_directories(out);
  write_text(out / "ablate_sigma.csv", ablation_csv("sigma_scale", rows));
  return rows;
}

std::vector<AblationRow> cmd_ablate_k(const ExperimentConfig& cfg, const std::vector<int>& ks) {
  const fs::path out(cfg.out_dir);
  std::vector<AblationRow> rows;
  for (int k : ks) {
    ExperimentConfig sub = cfg;
    sub.K = k;
    sub.out_dir = (out / ("k" + std::to_string(k))).string();
    const fs::path ckpt = fs::path(sub.out_dir) / "model.ckpt";
    if (!fs::exists(ckpt)) cmd_train(sub);
    const MetricReport rep = cmd_sample(sub, ckpt, cfg.sigma_scale, cfg.final_noise, fs::path(sub.out_dir) / "sample");
    rows.push_back({static_cast<double>(k), rep.psnr(), rep.ssim()});
  }
  fs::create_directories(out);
  write_text(out / "ablate_k.csv", ablation_csv("K", rows));
  return rows;
}

}  // namespace ubct
