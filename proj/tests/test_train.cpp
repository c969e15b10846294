#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"
#include "ubct/commands.hpp"
#include "ubct/fbp.hpp"
#include "ubct/noise.hpp"
#include "ubct/phantom.hpp"
#include "ubct/train.hpp"

#include <sstream>

using namespace ubct;
using ubct::testing::random_tensor;

namespace {

struct Toy {
  SystemMatrix h;
  Schedule schedule;
  double L;
  std::vector<TrainingSample> data;

  explicit Toy(Eigen::Index n = 16, int K = 6, int count = 4)
      : h(Geometry::parallel(n, 12, n + n / 2 - 1)), schedule(ScheduleConfig{1e-8, 3.005e-6, K, {}}), L(power_iteration_L(h).lipschitz) {
    for (int i = 0; i < count; ++i) {
      TrainingSample s;
      s.id = std::to_string(i);
      s.x0 = make_phantom(PhantomKind::RandomEllipses, n, 100 + static_cast<std::uint64_t>(i));
      NoiseConfig noise;
      noise.seed = 200 + static_cast<std::uint64_t>(i);
      s.y = simulate_ldct(h.apply(s.x0), noise);
      s.x1 = fbp(s.y, h.geometry());
      s.cond = make_conditioning(s.y, h);
      data.push_back(std::move(s));
    }
  }

  ModelParams params(bool per_layer = false, PomConfig cfg = {8, 8, 3, 1.0}, std::uint64_t seed = 3) const {
    Rng rng(seed);
    return ModelParams::init(schedule.K(), cfg, per_layer, 1.0 / L, rng);
  }

  std::vector<const TrainingSample*> batch(std::size_t count) const {
    std::vector<const TrainingSample*> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(&data[i % data.size()]);
    return out;
  }
};

void wake_head(ModelParams& p, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& net : p.pom) {
    net.conv_w.back() = random_tensor(net.conv_w.back().shape, rng, -0.1, 0.1);
    net.conv_b.back() = random_tensor(net.conv_b.back().shape, rng, -0.1, 0.1);
  }
}

void make_identity(ModelParams& p) {
  for (auto& m : p.mu) m.data.setZero();
}

std::vector<Eigen::ArrayXd> snapshot(ModelParams& p) {
  std::vector<Eigen::ArrayXd> out;
  for (Tensor* t : p.parameters()) out.push_back(t->data);
  return out;
}

bool same(const std::vector<Eigen::ArrayXd>& a, const std::vector<Eigen::ArrayXd>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || !(a[i] == b[i]).all()) return false;
  }
  return true;
}

double mse(const Image& a, const Image& b) { return (a - b).array().square().mean(); }

// L1 + L2 of one sample on frozen rollout states, through the gradient-free path.
double frozen_loss(const TrainingSample& s, const Trajectory& traj, int k, ModelParams& p, const Toy& toy) {
  const Image gk = layer_apply(traj.at(k), s.y, s.cond, k, p, toy.h, toy.schedule);
  const Image g1 = layer_apply(traj.at(1), s.y, s.cond, 1, p, toy.h, toy.schedule);
  return mse(gk, training_target(s.x0, s.x1, k, toy.schedule)) + mse(g1, s.x0);
}

}  // namespace

TEST_SUITE("rollout") {
  TEST_CASE("identity model without noise keeps every state at the FBP input") {
    Toy toy;
    ModelParams p = toy.params();
    make_identity(p);
    const auto& s = toy.data[0];
    Rng rng(1);
    const Trajectory traj = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, rng, 0.0);
    REQUIRE(traj.states.size() == 6);
    CHECK(traj.noise.size() == 5);
    for (const Image& st : traj.states) CHECK((st.array() == s.x1.array()).all());
  }

  TEST_CASE("fixed seed gives a bit-identical trajectory") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 2);
    const auto& s = toy.data[1];
    Rng a(9), b(9), c(10);
    const Trajectory ta = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, a);
    const Trajectory tb = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, b);
    const Trajectory tc = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, c);
    for (int k = 1; k <= 6; ++k) CHECK((ta.at(k).array() == tb.at(k).array()).all());
    CHECK((ta.at(6).array() == s.x1.array()).all());
    CHECK_FALSE((ta.at(1).array() == tc.at(1).array()).all());
  }

  TEST_CASE("noise increments have the bridge variance") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 4);
    const auto& s = toy.data[2];
    const int K = toy.schedule.K();
    std::vector<double> sq(static_cast<std::size_t>(K) + 1, 0.0);
    std::vector<double> sum(static_cast<std::size_t>(K) + 1, 0.0);
    long count = 0;
    for (int run = 0; run < 200; ++run) {
      Rng rng(1000 + static_cast<std::uint64_t>(run));
      const Trajectory traj = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, rng);
      for (int i = K; i >= 2; --i) {
        const Image inc = traj.at(i - 1) - layer_apply(traj.at(i), s.y, s.cond, i, p, toy.h, toy.schedule);
        sum[i] += inc.sum();
        sq[i] += inc.squaredNorm();
      }
      count += s.x1.size();
    }
    // sigma at t = 1 is zero, so the first transition is noise-free.
    CHECK(sq[K] == 0.0);
    for (int i = 2; i < K; ++i) {
      const double mean = sum[i] / count;
      const double var = (sq[i] - count * mean * mean) / (count - 1);
      const double want = toy.schedule.sigma_at(i) * toy.schedule.sigma_at(i);
      CHECK(var / want == doctest::Approx(1.0).epsilon(0.1));
    }
  }

  TEST_CASE("without noise the rollout ignores the seed") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 5);
    const auto& s = toy.data[0];
    Rng a(1), b(2);
    const Trajectory ta = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, a, 0.0);
    const Trajectory tb = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, b, 0.0);
    CHECK((ta.at(1).array() == tb.at(1).array()).all());
  }
}

TEST_SUITE("training targets") {
  TEST_CASE("targets interpolate between clean and FBP images") {
    Toy toy;
    const auto& s = toy.data[0];
    const double a1 = toy.schedule.alpha_at(1);
    CHECK(a1 < 0.5);
    const Image t2 = training_target(s.x0, s.x1, 2, toy.schedule);
    CHECK((t2 - ((1.0 - a1) * s.x0 + a1 * s.x1)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((t2 - s.x0).norm() < (t2 - s.x1).norm());
    for (int k = 2; k <= 6; ++k) CHECK((training_target(s.x0, s.x0, k, toy.schedule) - s.x0).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(training_target(s.x0, s.x1, 1, toy.schedule), std::out_of_range);
    CHECK_THROWS_AS(training_target(s.x0, s.x1, 7, toy.schedule), std::out_of_range);
    CHECK_THROWS_AS(training_target(s.x0, Image(Image::Zero(3, 3)), 2, toy.schedule), std::invalid_argument);
  }

  TEST_CASE("last-layer target matches the dumped schedule") {
    Toy toy;
    ExperimentConfig cfg;
    std::ostringstream csv;
    cmd_schedule_dump(cfg, csv);
    std::istringstream in(csv.str());
    std::string line;
    std::vector<std::vector<double>> rows;
    std::getline(in, line);
    CHECK(line == "t,beta,gamma_sq,gamma_tilde_sq,alpha,sigma");
    while (std::getline(in, line)) {
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(row);
    }
    REQUIRE(rows.size() == 7);
    const double alpha = rows[5][4];
    const auto& s = toy.data[1];
    const Image direct = (1.0 - alpha) * s.x0 + alpha * s.x1;
    CHECK((training_target(s.x0, s.x1, 6, toy.schedule) - direct).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_SUITE("training step") {
  TEST_CASE("losses are the two tracked layer errors on the rollout") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 6);
    const auto batch = toy.batch(2);
    Rng rng(77), replay(77);
    const StepLosses got = training_losses(batch, p, toy.schedule, toy.h, rng, 1.0, false);
    double l1 = 0.0, l2 = 0.0;
    std::uniform_int_distribution<int> pick(2, 6);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& s = *batch[b];
      const int k = pick(replay);
      CHECK(k == got.ks[b]);
      const Trajectory traj = rollout_no_grad(s.x1, s.y, s.cond, p, toy.h, toy.schedule, replay);
      l1 += mse(layer_apply(traj.at(k), s.y, s.cond, k, p, toy.h, toy.schedule), training_target(s.x0, s.x1, k, toy.schedule)) / 2.0;
      l2 += mse(layer_apply(traj.at(1), s.y, s.cond, 1, p, toy.h, toy.schedule), s.x0) / 2.0;
    }
    CHECK(got.l1 == doctest::Approx(l1).epsilon(1e-12));
    CHECK(got.l2 == doctest::Approx(l2).epsilon(1e-12));
  }

  TEST_CASE("layer index is uniform on 2..K") {
    Toy toy(16, 6, 10);
    ModelParams p = toy.params(false, {2, 2, 3, 1.0});
    const auto batch = toy.batch(10);
    std::vector<long> counts(7, 0);
    long total = 0;
    for (int call = 0; call < 1000; ++call) {
      Rng rng = step_rng(5, call);
      for (int k : training_losses(batch, p, toy.schedule, toy.h, rng, 1.0, false).ks) {
        REQUIRE(k >= 2);
        REQUIRE(k <= 6);
        ++counts[static_cast<std::size_t>(k)];
        ++total;
      }
    }
    REQUIRE(total == 10000);
    const double prob = 0.2, se = std::sqrt(total * prob * (1.0 - prob));
    for (int k = 2; k <= 6; ++k) CHECK(std::abs(counts[static_cast<std::size_t>(k)] - total * prob) < 4.0 * se);
  }

  TEST_CASE("a small step decreases the loss on a frozen batch") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 7);
    AdamW opt({1e-5, 0.9, 0.999, 1e-8, 0.0});
    const auto batch = toy.batch(4);
    Rng rng(31), replay(31);
    std::uniform_int_distribution<int> pick(2, 6);
    std::vector<int> ks;
    std::vector<Trajectory> trajs;
    for (const auto* s : batch) {
      ks.push_back(pick(replay));
      trajs.push_back(rollout_no_grad(s->x1, s->y, s->cond, p, toy.h, toy.schedule, replay));
    }
    auto frozen = [&] {
      double total = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) total += frozen_loss(*batch[b], trajs[b], ks[b], p, toy) / 4.0;
      return total;
    };
    const double before = frozen();
    const StepLosses step = training_step(batch, p, opt, toy.schedule, toy.h, rng);
    CHECK(step.l1 + step.l2 == doctest::Approx(before).epsilon(1e-12));
    CHECK(frozen() < before);
  }

  TEST_CASE("perfect outputs give zero loss and leave parameters untouched") {
    Toy toy;
    std::vector<TrainingSample> data = toy.data;
    for (auto& s : data) s.x1 = s.x0;
    ModelParams p = toy.params();
    make_identity(p);
    AdamW opt({1e-3, 0.9, 0.999, 1e-8, 0.0});
    std::vector<const TrainingSample*> batch;
    for (const auto& s : data) batch.push_back(&s);
    const auto before = snapshot(p);
    Rng rng(4);
    const StepLosses l = training_step(batch, p, opt, toy.schedule, toy.h, rng, 0.0);
    CHECK(l.l1 == 0.0);
    CHECK(l.l2 == 0.0);
    CHECK(same(before, snapshot(p)));
  }

  TEST_CASE("gradients reach only layers k and 1") {
    Toy toy;
    for (bool per_layer : {true, false}) {
      ModelParams p = toy.params(per_layer);
      wake_head(p, 8);
      std::vector<bool> seen(7, false);
      for (std::uint64_t seed = 0; seed < 12; ++seed) {
        p.zero_grad();
        Rng rng(seed);
        const auto batch = toy.batch(1);
        const int k = training_losses(batch, p, toy.schedule, toy.h, rng, 1.0, true).ks.front();
        seen[static_cast<std::size_t>(k)] = true;
        for (int j = 1; j <= 6; ++j) {
          const bool tracked = j == k || j == 1;
          const Tensor& mu = p.mu[static_cast<std::size_t>(j - 1)];
          CHECK((mu.grad.has_value() && (*mu.grad)[0] != 0.0) == tracked);
          if (!per_layer) continue;
          for (auto& [name, t] : p.pom[static_cast<std::size_t>(j - 1)].named_parameters("")) {
            const bool nonzero = t->grad.has_value() && !t->grad->isZero(0.0);
            if (tracked) {
              // The randomized output head always gets a gradient on a tracked layer.
              if (name.rfind("conv3", 0) == 0) CHECK(nonzero);
            } else {
              CHECK_FALSE(nonzero);
            }
          }
        }
      }
      CHECK(std::count(seen.begin() + 2, seen.end(), true) >= 4);
    }
  }

  TEST_CASE("non-finite loss aborts before the update") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 9);
    p.pom[0].conv_b[0].data[0] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt;
    const auto before = snapshot(p);
    Rng rng(1);
    CHECK_THROWS_AS(training_step(toy.batch(2), p, opt, toy.schedule, toy.h, rng), TrainingDiverged);
    CHECK(opt.steps() == 0);
    const auto after = snapshot(p);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK((before[i] == after[i] || (before[i].isNaN() && after[i].isNaN())).all());
  }
}

TEST_SUITE("training loop") {
  TEST_CASE("one epoch over four samples with batch four is one step") {
    Toy toy;
    ModelParams p = toy.params();
    AdamW opt;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    std::vector<long> steps;
    const long taken = train(toy.data, p, opt, toy.schedule, toy.h, cfg, 0, {[&](long s, const StepLosses&) { steps.push_back(s); }, {}});
    CHECK(taken == 1);
    CHECK(opt.steps() == 1);
    CHECK(steps == std::vector<long>{0});
    CHECK(steps_per_epoch(5, 4) == 2);
    cfg.max_steps = 7;
    CHECK(total_steps(cfg, 4) == 7);
  }

  TEST_CASE("epochs are seeded permutations cut into batches") {
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.seed = 3;
    for (long epoch = 0; epoch < 3; ++epoch) {
      std::vector<std::size_t> all;
      for (long w = 0; w < 3; ++w) {
        const auto idx = batch_indices(epoch * 3 + w, 5, cfg);
        CHECK(idx.size() == (w < 2 ? 2u : 1u));
        all.insert(all.end(), idx.begin(), idx.end());
      }
      std::sort(all.begin(), all.end());
      CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
    }
    CHECK(batch_indices(4, 5, cfg) == batch_indices(4, 5, cfg));
    std::vector<std::vector<std::size_t>> firsts;
    for (long epoch = 0; epoch < 6; ++epoch) firsts.push_back(batch_indices(epoch * 3, 5, cfg));
    CHECK(std::any_of(firsts.begin() + 1, firsts.end(), [&](const auto& f) { return f != firsts[0]; }));
  }

  TEST_CASE("checkpoint cadence") {
    Toy toy;
    ModelParams p = toy.params(false, {2, 2, 3, 1.0});
    AdamW opt;
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.max_steps = 5;
    cfg.checkpoint_every = 2;
    std::vector<long> marks;
    train(toy.data, p, opt, toy.schedule, toy.h, cfg, 0, {{}, [&](long s) { marks.push_back(s); }});
    CHECK(marks == std::vector<long>{2, 4});
  }

  TEST_CASE("resuming from a checkpoint replays the run bit-exactly") {
    Toy toy;
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.max_steps = 6;
    cfg.seed = 11;
    const AdamWConfig ocfg{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

    ModelParams full = toy.params();
    AdamW full_opt(ocfg);
    std::vector<std::pair<double, double>> full_losses;
    train(toy.data, full, full_opt, toy.schedule, toy.h, cfg, 0, {[&](long, const StepLosses& l) { full_losses.emplace_back(l.l1, l.l2); }, {}});

    ModelParams first = toy.params();
    AdamW first_opt(ocfg);
    TrainConfig head = cfg;
    head.max_steps = 3;
    train(toy.data, first, first_opt, toy.schedule, toy.h, head);
    const auto path = testing::scratch_dir("resume") / "mid.ckpt";
    write_checkpoint(path, make_checkpoint(first, first_opt, 3, "echo"));

    ModelParams resumed = toy.params(false, {8, 8, 3, 1.0}, 999);
    resumed.mu_unit = 0.0;
    AdamW resumed_opt(ocfg);
    const long start = restore_checkpoint(read_checkpoint(path), resumed, &resumed_opt);
    CHECK(start == 3);
    CHECK(resumed_opt.steps() == 3);
    std::vector<std::pair<double, double>> tail;
    train(toy.data, resumed, resumed_opt, toy.schedule, toy.h, cfg, start, {[&](long, const StepLosses& l) { tail.emplace_back(l.l1, l.l2); }, {}});
    REQUIRE(tail.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(tail[i].first == full_losses[3 + i].first);
      CHECK(tail[i].second == full_losses[3 + i].second);
    }
    CHECK(same(snapshot(full), snapshot(resumed)));
    CHECK(resumed.mu_unit == full.mu_unit);
  }
}

TEST_SUITE("sampling") {
  TEST_CASE("zero noise scale is the plain composition of the layers") {
    Toy toy;
    ModelParams p = toy.params(true);
    wake_head(p, 10);
    const auto& s = toy.data[0];
    Rng rng(5);
    const SampleResult r = sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, 0.0, true, rng);
    Image x = s.x1;
    for (int k = 6; k >= 1; --k) x = layer_apply(x, s.y, s.cond, k, p, toy.h, toy.schedule);
    CHECK((r.image.array() == x.array()).all());
    CHECK(r.evaluations == 6);
  }

  TEST_CASE("exactly K layer evaluations") {
    for (int K = 5; K <= 9; ++K) {
      Toy toy(16, K, 1);
      ModelParams p = toy.params();
      const auto& s = toy.data[0];
      Rng rng(1);
      CHECK(sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, 1.0, true, rng).evaluations == K);
    }
  }

  TEST_CASE("fixed seed gives a bit-identical reconstruction") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 11);
    const auto& s = toy.data[1];
    Rng a(8), b(8);
    CHECK((sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, 3.0, true, a).image.array() ==
           sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, 3.0, true, b).image.array())
              .all());
  }

  TEST_CASE("final noise adds one scaled noise field at the last step") {
    Toy toy;
    ModelParams p = toy.params();
    wake_head(p, 12);
    const auto& s = toy.data[2];
    const double c = 5.0;
    Rng a(21), b(21);
    const Image with = sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, c, true, a).image;
    const Image without = sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, c, false, b).image;
    const double scale = c * toy.schedule.sigma_at(1);
    const double rms = std::sqrt((with - without).array().square().mean()) / scale;
    CHECK(rms > 0.8);
    CHECK(rms < 1.2);
  }

  TEST_CASE("bad arguments") {
    Toy toy;
    ModelParams p = toy.params();
    const auto& s = toy.data[0];
    Rng rng(1);
    CHECK_THROWS_AS(sample(s.y, s.x1, s.cond, p, toy.h, toy.schedule, -1.0, true, rng), std::invalid_argument);
    ModelParams wrong = Toy(16, 5, 1).params();
    CHECK_THROWS_AS(sample(s.y, s.x1, s.cond, wrong, toy.h, toy.schedule, 1.0, true, rng), std::invalid_argument);
    ModelParams empty;
    CHECK_THROWS_AS(sample(s.y, s.x1, s.cond, empty, toy.h, toy.schedule, 1.0, true, rng), std::invalid_argument);
  }
}
