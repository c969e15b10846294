#include "ubct/unfolded.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ubct {

Tensor to_tensor(const Image& img) {
  return Tensor({img.rows(), img.cols()}, Eigen::Map<const Eigen::ArrayXd>(img.data(), img.size()));
}

Image to_image(const Tensor& t, Eigen::Index n) {
  if (t.numel() != n * n) throw ShapeError("to_image: tensor " + to_string(t.shape) + " is not " + std::to_string(n) + "x" + std::to_string(n));
  Image img(n, n);
  Eigen::Map<Eigen::ArrayXd>(img.data(), img.size()) = t.data;
  return img;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t.data[i] = u(rng);
  return t;
}

}  // namespace

PomNet PomNet::init(const PomConfig& cfg, Rng& rng) {
  PomNet net;
  net.config = cfg;
  const Index k = cfg.kernel;
  const std::array<Index, kConvLayers + 1> channels = {2, cfg.hidden, cfg.hidden, cfg.hidden, 1};
  for (int l = 0; l < kConvLayers; ++l) {
    const Index cin = channels[static_cast<std::size_t>(l)], cout = channels[static_cast<std::size_t>(l) + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
    if (l == kConvLayers - 1) {
      net.conv_w[l] = Tensor({cout, cin, k, k});
      net.conv_b[l] = Tensor({cout});
    } else {
      net.conv_w[l] = uniform_tensor({cout, cin, k, k}, bound, rng);
      net.conv_b[l] = uniform_tensor({cout}, bound, rng);
    }
  }
  const double eb = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  net.embed_w = uniform_tensor({cfg.embed_dim, cfg.embed_dim}, eb, rng);
  net.embed_b = uniform_tensor({cfg.embed_dim}, eb, rng);
  for (int l = 0; l < kHiddenLayers; ++l) {
    net.film_w[l] = uniform_tensor({cfg.hidden, cfg.embed_dim}, eb, rng);
    net.film_b[l] = uniform_tensor({cfg.hidden}, eb, rng);
  }
  return net;
}

std::vector<std::pair<std::string, Tensor*>> PomNet::named_parameters(const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (int l = 0; l < kConvLayers; ++l) {
    out.emplace_back(prefix + "conv" + std::to_string(l) + ".weight", &conv_w[l]);
    out.emplace_back(prefix + "conv" + std::to_string(l) + ".bias", &conv_b[l]);
  }
  out.emplace_back(prefix + "embed.weight", &embed_w);
  out.emplace_back(prefix + "embed.bias", &embed_b);
  for (int l = 0; l < kHiddenLayers; ++l) {
    out.emplace_back(prefix + "film" + std::to_string(l) + ".weight", &film_w[l]);
    out.emplace_back(prefix + "film" + std::to_string(l) + ".bias", &film_b[l]);
  }
  return out;
}

ModelParams ModelParams::init(int K, const PomConfig& cfg, bool per_layer_weights, double mu_unit, Rng& rng) {
  if (K < 1) throw std::invalid_argument("ModelParams: K must be >= 1");
  if (!(mu_unit >= 0.0)) throw std::invalid_argument("ModelParams: mu_unit must be >= 0");
  ModelParams p;
  p.mu_unit = mu_unit;
  const int count = per_layer_weights ? K : 1;
  for (int i = 0; i < count; ++i) p.pom.push_back(PomNet::init(cfg, rng));
  for (int k = 0; k < K; ++k) p.mu.push_back(Tensor::scalar(1.0));
  return p;
}

PomNet& ModelParams::pom_for(int k) {
  if (k < 1 || k > K()) throw std::out_of_range("layer index " + std::to_string(k) + " outside 1.." + std::to_string(K()));
  return pom.size() == 1 ? pom.front() : pom.at(static_cast<std::size_t>(k - 1));
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < pom.size(); ++i) {
    const std::string prefix = pom.size() == 1 ? "pom." : "pom" + std::to_string(i + 1) + ".";
    auto named = pom[i].named_parameters(prefix);
    out.insert(out.end(), named.begin(), named.end());
  }
  for (std::size_t k = 0; k < mu.size(); ++k) out.emplace_back("mu" + std::to_string(k + 1), &mu[k]);
  return out;
}

std::vector<Tensor*> ModelParams::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void ModelParams::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

void ModelParams::clamp_mu() {
  for (Tensor& m : mu) m.data = m.data.max(0.0);
}

Conditioning make_conditioning(const Sinogram& y, const SystemMatrix& h) {
  const Image bp = h.adjoint(y);
  Conditioning c;
  c.mean = bp.mean();
  const double var = (bp.array() - c.mean).square().mean();
  c.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  c.normalized = to_tensor(((bp.array() - c.mean) / c.stddev).matrix());
  return c;
}

namespace {

PomVars bind_pom(Tape& tape, PomNet& net) {
  PomVars v;
  v.config = net.config;
  auto b = [&tape](Tensor& t) { return tape.recording() ? tape.leaf(t) : tape.constant(Tensor(t.shape, t.data)); };
  for (int l = 0; l < PomNet::kConvLayers; ++l) {
    v.conv_w[l] = b(net.conv_w[l]);
    v.conv_b[l] = b(net.conv_b[l]);
  }
  v.embed_w = b(net.embed_w);
  v.embed_b = b(net.embed_b);
  for (int l = 0; l < PomNet::kHiddenLayers; ++l) {
    v.film_w[l] = b(net.film_w[l]);
    v.film_b[l] = b(net.film_b[l]);
  }
  return v;
}

}  // namespace

ModelBinding bind(Tape& tape, ModelParams& params) {
  ModelBinding binding;
  for (PomNet& net : params.pom) binding.pom.push_back(bind_pom(tape, net));
  for (Tensor& m : params.mu) binding.mu.push_back(tape.recording() ? tape.leaf(m) : tape.constant(Tensor(m.shape, m.data)));
  binding.mu_unit = params.mu_unit;
  return binding;
}

Image gdm(const Image& x, const Sinogram& y, double mu, const SystemMatrix& h) {
  if (mu == 0.0) {
    h.geometry().check_image(x, "gdm");
    h.geometry().check_sinogram(y, "gdm");
    return x;
  }
  return x - mu * h.adjoint(h.apply(x) - y);
}

Var gdm(const Var& x, const Sinogram& y, const Var& mu, const SystemMatrix& h, double unit) {
  const Index n = h.geometry().n;
  if (x.shape() != Shape{n, n}) throw ShapeError("gdm: x has shape " + to_string(x.shape()));
  if (mu.value().numel() != 1) throw ShapeError("gdm: mu must be a scalar");
  const Image xi = to_image(x.value(), n);
  const Image grad = h.adjoint(h.apply(xi) - y);
  const double m = unit * mu.data()[0];
  Tape& tape = *x.tape();
  Tensor out = to_tensor(xi - m * grad);
  return tape.push(std::move(out), {x, mu}, [x, mu, grad, m, n, unit, &h](Tape& tp, const Eigen::ArrayXd& g) {
    const Image gi = to_image(Tensor({n, n}, g), n);
    if (tp.requires_grad(mu)) tp.adjoint(mu)[0] -= unit * (gi.array() * grad.array()).sum();
    // d r / d x = I - mu H^T H (symmetric)
    if (tp.requires_grad(x)) tp.adjoint(x) += to_tensor(gi - m * h.normal(gi)).data;
  });
}

Var pom(const Var& r, double t, const Var& cond, const PomVars& vars) {
  if (r.shape().size() != 2 || r.shape() != cond.shape()) {
    throw ShapeError("pom: r " + to_string(r.shape()) + " and cond " + to_string(cond.shape()) + " must be equal [H,W]");
  }
  Tape& tape = *r.tape();
  const Var emb = tape.constant(time_embedding(t, vars.config.embed_dim, vars.config.embed_base));
  const Var temb = silu(linear(emb, vars.embed_w, vars.embed_b));
  Var h = stack_channels({r, cond});
  for (int l = 0; l < PomNet::kHiddenLayers; ++l) {
    h = conv2d(h, vars.conv_w[l], vars.conv_b[l]);
    h = silu(add_channel_bias(h, linear(temb, vars.film_w[l], vars.film_b[l])));
  }
  h = conv2d(h, vars.conv_w[PomNet::kConvLayers - 1], vars.conv_b[PomNet::kConvLayers - 1]);
  return add(r, reshape(h, r.shape()));
}

Var layer_apply(const Var& x, const Sinogram& y, const Var& cond, int k, const ModelBinding& binding, const SystemMatrix& h,
                const Schedule& schedule, EvaluationCounter* counter) {
  if (k < 1 || k > schedule.K() || k > static_cast<int>(binding.mu.size())) {
    throw std::out_of_range("layer_apply: layer " + std::to_string(k) + " outside 1.." + std::to_string(schedule.K()));
  }
  if (counter) counter->count.fetch_add(1, std::memory_order_relaxed);
  const Var r = gdm(x, y, binding.mu[static_cast<std::size_t>(k - 1)], h, binding.mu_unit);
  return pom(r, schedule.time(k), cond, binding.pom_for(k));
}

Image layer_apply(const Image& x, const Sinogram& y, const Conditioning& cond, int k, ModelParams& params, const SystemMatrix& h,
                  const Schedule& schedule, EvaluationCounter* counter) {
  Tape tape(false);
  const ModelBinding binding = bind(tape, params);
  const Var xv = tape.constant(to_tensor(x));
  const Var cv = tape.constant(cond.normalized);
  const Var out = layer_apply(xv, y, cv, k, binding, h, schedule, counter);
  return to_image(out.value(), h.geometry().n);
}

}  // namespace ubct
