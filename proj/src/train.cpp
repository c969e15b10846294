#include "ubct/train.hpp"

#include "ubct/ctf_io.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace ubct {

void TrainConfig::validate() const {
  if (K < 2) throw std::invalid_argument("train: K must be >= 2");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(sigma_train_scale >= 0.0)) throw std::invalid_argument("train: sigma_train_scale must be >= 0");
  if (checkpoint_every < 0 || max_steps < 0) throw std::invalid_argument("train: step counts must be >= 0");
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir, const SystemMatrix& h) {
  const auto names = list_ctf(dir / "clean");
  if (names.empty()) throw std::runtime_error("dataset " + dir.string() + " has no clean images");
  std::vector<TrainingSample> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    TrainingSample s;
    s.id = std::filesystem::path(name).stem().string();
    s.x0 = read_ctf(dir / "clean" / name);
    s.x1 = read_ctf(dir / "fbp_ldct" / name);
    s.y = read_ctf(dir / "sino_ldct" / name);
    h.geometry().check_image(s.x0, name.c_str());
    h.geometry().check_image(s.x1, name.c_str());
    h.geometry().check_sinogram(s.y, name.c_str());
    s.cond = make_conditioning(s.y, h);
    out.push_back(std::move(s));
  }
  return out;
}

Trajectory rollout_no_grad(const Image& x1, const Sinogram& y, const Conditioning& cond, ModelParams& params, const SystemMatrix& h,
                           const Schedule& schedule, Rng& rng, double sigma_scale) {
  const int K = schedule.K();
  Trajectory traj;
  traj.K = K;
  traj.states.reserve(static_cast<std::size_t>(K));
  traj.states.push_back(x1);
  for (int i = K; i >= 2; --i) {
    Image next = layer_apply(traj.states.back(), y, cond, i, params, h, schedule);
    Image z = standard_normal(next.rows(), next.cols(), rng);
    const double s = sigma_scale * schedule.sigma_at(i);
    if (s != 0.0) next += s * z;
    traj.noise.push_back(std::move(z));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Image training_target(const Image& x0, const Image& x1, int k, const Schedule& schedule) {
  if (k < 2 || k > schedule.K()) throw std::out_of_range("training_target: k must be in 2.." + std::to_string(schedule.K()));
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw std::invalid_argument("training_target: shape mismatch");
  const double a = schedule.alpha_at(k - 1);
  return (1.0 - a) * x0 + a * x1;
}

StepLosses training_losses(std::span<const TrainingSample* const> batch, ModelParams& params, const Schedule& schedule, const SystemMatrix& h,
                           Rng& rng, double sigma_scale, bool accumulate_grads) {
  if (batch.empty()) throw std::invalid_argument("training step on an empty batch");
  const int K = schedule.K();
  if (params.K() != K) throw std::invalid_argument("model has " + std::to_string(params.K()) + " layers, schedule has K = " + std::to_string(K));
  std::uniform_int_distribution<int> pick_k(2, K);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  StepLosses out;
  for (const TrainingSample* s : batch) {
    const int k = pick_k(rng);
    out.ks.push_back(k);
    const Trajectory traj = rollout_no_grad(s->x1, s->y, s->cond, params, h, schedule, rng, sigma_scale);

    Tape tape(accumulate_grads);
    const ModelBinding binding = bind(tape, params);
    const Var cond = tape.constant(s->cond.normalized);
    const Var xk = tape.constant(to_tensor(traj.at(k)));
    const Var x1 = tape.constant(to_tensor(traj.at(1)));
    const Var target_k = tape.constant(to_tensor(training_target(s->x0, s->x1, k, schedule)));
    const Var target_0 = tape.constant(to_tensor(s->x0));

    const Var l1 = mse_loss(layer_apply(xk, s->y, cond, k, binding, h, schedule), target_k);
    const Var l2 = mse_loss(layer_apply(x1, s->y, cond, 1, binding, h, schedule), target_0);
    out.l1 += l1.value().item() * inv_b;
    out.l2 += l2.value().item() * inv_b;
    if (accumulate_grads) tape.backward(scale(add(l1, l2), inv_b));
  }
  return out;
}

StepLosses training_step(std::span<const TrainingSample* const> batch, ModelParams& params, AdamW& opt, const Schedule& schedule,
                         const SystemMatrix& h, Rng& rng, double sigma_scale) {
  params.zero_grad();
  StepLosses losses = training_losses(batch, params, schedule, h, rng, sigma_scale, true);
  if (!std::isfinite(losses.l1) || !std::isfinite(losses.l2)) {
    throw TrainingDiverged("non-finite loss (L1 = " + std::to_string(losses.l1) + ", L2 = " + std::to_string(losses.l2) + ")");
  }
  const auto ps = params.parameters();
  opt.step(ps);
  params.clamp_mu();
  return losses;
}

long steps_per_epoch(std::size_t dataset_size, int batch_size) {
  return static_cast<long>((dataset_size + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

long total_steps(const TrainConfig& cfg, std::size_t dataset_size) {
  return cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch(dataset_size, cfg.batch_size);
}

std::vector<std::size_t> batch_indices(long step, std::size_t dataset_size, const TrainConfig& cfg) {
  const long spe = steps_per_epoch(dataset_size, cfg.batch_size);
  const long epoch = step / spe;
  const long within = step % spe;
  std::vector<std::size_t> perm(dataset_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng(cfg.seed).substream("shuffle").substream(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = dataset_size; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  const std::size_t begin = static_cast<std::size_t>(within) * static_cast<std::size_t>(cfg.batch_size);
  const std::size_t end = std::min(dataset_size, begin + static_cast<std::size_t>(cfg.batch_size));
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin), perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

Rng step_rng(std::uint64_t seed, long step) { return Rng(seed).substream("train").substream(static_cast<std::uint64_t>(step)); }

long train(const std::vector<TrainingSample>& data, ModelParams& params, AdamW& opt, const Schedule& schedule, const SystemMatrix& h,
           const TrainConfig& cfg, long start_step, const TrainCallbacks& callbacks) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const long total = total_steps(cfg, data.size());
  long taken = 0;
  for (long step = start_step; step < total; ++step) {
    std::vector<const TrainingSample*> batch;
    for (std::size_t i : batch_indices(step, data.size(), cfg)) batch.push_back(&data[i]);
    Rng rng = step_rng(cfg.seed, step);
    const StepLosses losses = training_step(batch, params, opt, schedule, h, rng, cfg.sigma_train_scale);
    ++taken;
    if (callbacks.on_step) callbacks.on_step(step, losses);
    if (callbacks.on_checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < total) {
      callbacks.on_checkpoint(step + 1);
    }
  }
  return taken;
}

SampleResult sample(const Sinogram& y, const Image& x1, const Conditioning& cond, ModelParams& params, const SystemMatrix& h,
                    const Schedule& schedule, double sigma_scale, bool final_noise, Rng& rng) {
  if (!(sigma_scale >= 0.0)) throw std::invalid_argument("sample: sigma scale must be >= 0");
  if (params.mu.empty() || params.pom.empty()) throw std::invalid_argument("sample: model parameters are not loaded");
  if (params.K() != schedule.K()) throw std::invalid_argument("sample: model and schedule disagree on K");
  EvaluationCounter counter;
  Image x = x1;
  for (int k = schedule.K(); k >= 1; --k) {
    x = layer_apply(x, y, cond, k, params, h, schedule, &counter);
    const double s = sigma_scale * schedule.sigma_at(k);
    const Image z = standard_normal(x.rows(), x.cols(), rng);
    if (s != 0.0 && (k > 1 || final_noise)) x += s * z;
  }
  return {std::move(x), counter.count.load()};
}

Checkpoint make_checkpoint(ModelParams& params, const AdamW& opt, long step, const std::string& config_echo) {
  Checkpoint ckpt;
  const auto named = params.named_parameters();
  for (const auto& [name, t] : named) {
    if (name.rfind("mu", 0) == 0) continue;
    ckpt.records.push_back({name, Tensor(t->shape, t->data)});
  }
  const auto& m = opt.first_moments();
  const auto& v = opt.second_moments();
  if (!m.empty()) {
    for (std::size_t i = 0; i < named.size(); ++i) {
      ckpt.records.push_back({"adamw.m." + named[i].first, Tensor(named[i].second->shape, m[i])});
      ckpt.records.push_back({"adamw.v." + named[i].first, Tensor(named[i].second->shape, v[i])});
    }
  }
  ckpt.records.push_back({"adamw.steps", Tensor::scalar(static_cast<double>(opt.steps()))});
  ckpt.records.push_back({"train.step", Tensor::scalar(static_cast<double>(step))});
  ckpt.records.push_back({"mu_unit", Tensor::scalar(params.mu_unit)});
  for (const Tensor& mu : params.mu) ckpt.mu.push_back(mu.item());
  ckpt.config_echo = config_echo;
  return ckpt;
}

long restore_checkpoint(const Checkpoint& ckpt, ModelParams& params, AdamW* opt) {
  if (ckpt.mu.size() != params.mu.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.mu.size()) + " step sizes, model expects " + std::to_string(params.mu.size()));
  }
  const auto named = params.named_parameters();
  for (const auto& [name, t] : named) {
    if (name.rfind("mu", 0) == 0) continue;
    const Tensor* rec = ckpt.find(name);
    if (rec == nullptr) throw std::runtime_error("checkpoint is missing parameter " + name);
    if (rec->shape != t->shape) throw std::runtime_error("checkpoint parameter " + name + " has shape " + to_string(rec->shape));
    t->data = rec->data;
  }
  for (std::size_t k = 0; k < ckpt.mu.size(); ++k) params.mu[k].data[0] = ckpt.mu[k];
  const Tensor* unit = ckpt.find("mu_unit");
  if (unit == nullptr) throw std::runtime_error("checkpoint is missing mu_unit");
  params.mu_unit = unit->item();
  if (opt != nullptr && ckpt.find("adamw.m." + named.front().first) != nullptr) {
    std::vector<Eigen::ArrayXd> m, v;
    for (const auto& [name, t] : named) {
      m.push_back(ckpt.find("adamw.m." + name)->data);
      v.push_back(ckpt.find("adamw.v." + name)->data);
    }
    opt->restore(static_cast<std::int64_t>(ckpt.find("adamw.steps")->item()), std::move(m), std::move(v));
  }
  const Tensor* step = ckpt.find("train.step");
  return step ? static_cast<long>(step->item()) : 0;
}

}  // namespace ubct
