#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "equimod/exp/datasets.hpp"
#include "equimod/exp/runner.hpp"
#include "equimod/trainer/trainer.hpp"

using namespace equimod;
using namespace equimod::trainer;
using equimod::augcodec::Baseline;
using equimod::core::Rng;
using equimod::core::Tensor;

namespace fs = std::filesystem;

namespace {

exp::ExperimentConfig tiny_config(Baseline baseline, double lambda) {
  exp::ExperimentConfig c;
  c.dataset = exp::DatasetKind::synth10;
  c.baseline = baseline;
  c.seed = 5;
  c.epochs = 4;
  c.warmup_epochs = 1;
  c.batch_size = 16;
  c.optimizer.lr = 0.5;
  c.optimizer.weight_decay = 1e-6;
  c.loss.lambda = lambda;
  c.loss.tau = 0.5;
  c.encoder = "resnet18-cifar";
  c.width_mult = 0.0625;
  c.inv_layers = 2;
  c.inv_hidden = 32;
  c.inv_dim = 16;
  c.equi_layers = 2;
  c.equi_hidden = 32;
  c.equi_dim = 16;
  c.predictor_layers = 1;
  c.predictor_hidden = 16;
  c.aug_projector_layers = 1;
  c.aug_projector_hidden = 16;
  c.aug_projector_dim = 16;
  c.synthetic_train = 48;
  c.synthetic_test = 16;
  c.normalizer_samples = 500;
  return c;
}

std::vector<core::Image> synth_batch(int64_t n, uint64_t seed = 3) {
  const auto ds = exp::make_synth10(n, seed);
  std::vector<core::Image> batch;
  for (int64_t i = 0; i < n; ++i) batch.push_back(ds.get(i));
  return batch;
}

struct KillRun : std::runtime_error {
  KillRun() : std::runtime_error("simulated kill") {}
};

}  // namespace

TEST_CASE("lars: zero gradients and zero decay leave parameters unchanged") {
  Tensor w({3}), g({3});
  w[0] = 1.f;
  w[1] = -2.f;
  w[2] = 0.5f;
  const Tensor before = w;
  std::vector<networks::ParamRef> params = {{"w", &w, &g, false}};
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  Lars opt(params, cfg);
  opt.step(0.1);
  opt.step(0.1);
  for (int i = 0; i < 3; ++i) CHECK(w[i] == before[i]);
}

TEST_CASE("lars: biases are excluded from decay and adaptation") {
  Tensor w({2}), gw({2}), b({2}), gb({2});
  w.fill(1.f);
  b.fill(1.f);
  // no gradient anywhere; only weight decay could move parameters
  std::vector<networks::ParamRef> params = {{"w", &w, &gw, false}, {"b", &b, &gb, true}};
  OptimizerConfig cfg;
  cfg.weight_decay = 0.1;
  Lars opt(params, cfg);
  opt.step(1.0);
  CHECK(w[0] != 1.f);  // decayed through the adapted update
  CHECK(b[0] == 1.f);  // exclusion: no decay applied
}

TEST_CASE("lars: single layer matches the published update formula") {
  Tensor w({2}), g({2});
  w[0] = 3.f;
  w[1] = 4.f;
  g[0] = 0.03f;
  g[1] = -0.04f;
  std::vector<networks::ParamRef> params = {{"w", &w, &g, false}};
  OptimizerConfig cfg;
  cfg.momentum = 0.9;
  cfg.weight_decay = 1e-4;
  cfg.trust_coefficient = 0.001;
  Lars opt(params, cfg);

  // hand computation, scalars all the way
  const double lr = 2.0;
  const double w_norm = std::sqrt(3.0 * 3.0 + 4.0 * 4.0);
  const double g_norm = std::sqrt(0.03 * 0.03 + 0.04 * 0.04);
  const double local = 0.001 * w_norm / (g_norm + 1e-4 * w_norm);
  const double v0 = lr * local * (0.03 + 1e-4 * 3.0);
  const double v1 = lr * local * (-0.04 + 1e-4 * 4.0);
  const double w0 = 3.0 - v0;
  const double w1 = 4.0 - v1;

  opt.step(lr);
  CHECK(std::abs(w[0] - w0) < 1e-7);
  CHECK(std::abs(w[1] - w1) < 1e-7);

  // second step exercises the momentum buffer
  const double g_norm2 = g_norm;  // same gradient
  const double w_norm2 = std::sqrt(w0 * w0 + w1 * w1);
  const double local2 = 0.001 * w_norm2 / (g_norm2 + 1e-4 * w_norm2);
  const double v0b = 0.9 * v0 + lr * local2 * (0.03 + 1e-4 * w0);
  const double v1b = 0.9 * v1 + lr * local2 * (-0.04 + 1e-4 * w1);
  opt.step(lr);
  CHECK(std::abs(w[0] - (w0 - v0b)) < 1e-7);
  CHECK(std::abs(w[1] - (w1 - v1b)) < 1e-7);
}

TEST_CASE("cosine schedule: warmup endpoints and cosine midpoint") {
  ScheduleConfig s{2.0, 10, 110};
  CHECK(cosine_lr(0, s) == doctest::Approx(0.0));
  CHECK(cosine_lr(10, s) == doctest::Approx(2.0));
  CHECK(cosine_lr(60, s) == doctest::Approx(1.0));   // cosine midpoint
  CHECK(cosine_lr(110, s) == doctest::Approx(0.0));  // decayed to zero
  CHECK_THROWS_AS(cosine_lr(-1, s), std::invalid_argument);
  CHECK_THROWS_AS(cosine_lr(111, s), std::invalid_argument);
}

TEST_CASE("ema update endpoints and arithmetic") {
  Tensor t({1}), o({1}), gt({1}), go({1});
  t[0] = 2.f;
  o[0] = 4.f;
  std::vector<networks::ParamRef> target = {{"p", &t, &gt, false}};
  std::vector<networks::ParamRef> online = {{"p", &o, &go, false}};

  ema_update(target, online, 1.0);
  CHECK(t[0] == 2.f);
  ema_update(target, online, 0.5);
  CHECK(t[0] == 3.f);
  ema_update(target, online, 0.0);
  CHECK(t[0] == 4.f);
}

TEST_CASE("byol target coefficient: cosine rise from tau_base to 1") {
  CHECK(byol_target_tau(0, 100, 0.996) == doctest::Approx(0.996));
  CHECK(byol_target_tau(100, 100, 0.996) == doctest::Approx(1.0));
  CHECK(byol_target_tau(50, 100, 0.996) == doctest::Approx(1.0 - (1.0 - 0.996) / 2));
}

TEST_CASE("training step: loss decreases on the same batch at small lr") {
  const auto config = tiny_config(Baseline::simclr, 1.0);
  networks::EquiModModel model(config.model_config(), config.seed);
  const auto layout = exp::Runner::fit_layout(config);
  Trainer tr(model, config.optimizer, config.view_policies(), layout, {config.loss, 1});

  const auto batch = synth_batch(12);
  const uint64_t seed = 99;
  const double before = tr.evaluate_batch(batch, seed).loss_total;
  tr.training_step(batch, 1e-3, 1.0, seed);
  const double after = tr.evaluate_batch(batch, seed).loss_total;
  CHECK(std::isfinite(before));
  CHECK(after < before);
}

TEST_CASE("training step: every parameter group receives gradient") {
  for (Baseline baseline : {Baseline::simclr, Baseline::byol, Baseline::barlow}) {
    auto config = tiny_config(baseline, 1.0);
    networks::EquiModModel model(config.model_config(), config.seed);
    const auto layout = exp::Runner::fit_layout(config);
    Trainer tr(model, config.optimizer, config.view_policies(), layout, {config.loss, 1});
    tr.training_step(synth_batch(8), 1e-3, 0.99, 7);

    networks::ParamCollector pc;
    model.collect(pc);
    std::map<std::string, double> group_norm;
    for (const auto& p : pc.params) {
      const std::string group = p.name.substr(0, p.name.find('.'));
      double acc = 0;
      for (int64_t i = 0; i < p.grad->numel(); ++i)
        acc += static_cast<double>((*p.grad)[i]) * (*p.grad)[i];
      group_norm[group] += acc;
    }
    REQUIRE(group_norm.count("encoder"));
    REQUIRE(group_norm.count("inv_head"));
    REQUIRE(group_norm.count("equi_head"));
    REQUIRE(group_norm.count("predictor"));
    REQUIRE(group_norm.count("aug_projector"));
    for (const auto& [group, norm] : group_norm) {
      INFO(augcodec::to_string(baseline), " group ", group);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("training step: microbatch accumulation runs and matches batch sizes") {
  auto config = tiny_config(Baseline::simclr, 1.0);
  config.accumulation_steps = 2;
  networks::EquiModModel model(config.model_config(), config.seed);
  const auto layout = exp::Runner::fit_layout(config);
  Trainer tr(model, config.optimizer, config.view_policies(), layout, {config.loss, 2});
  const auto r = tr.training_step(synth_batch(8), 1e-2, 1.0, 11);
  CHECK(std::isfinite(r.loss_total));
  CHECK_THROWS_AS(tr.training_step(synth_batch(2), 1e-2, 1.0, 11), std::invalid_argument);
}

TEST_CASE("lambda zero: equivariance branch shape cannot influence the baseline trajectory") {
  const std::string dir_a = "/tmp/equimod_l0_a";
  const std::string dir_b = "/tmp/equimod_l0_b";
  const std::string dir_c = "/tmp/equimod_l0_c";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);

  auto base = tiny_config(Baseline::simclr, 0.0);
  base.epochs = 2;

  auto config_a = base;
  config_a.output_dir = dir_a;  // deep equivariance head, lambda 0
  auto config_b = base;
  config_b.equi_layers = 1;  // different branch shape, lambda 0
  config_b.output_dir = dir_b;
  auto config_c = base;
  config_c.loss.lambda = 1.0;  // sanity: lambda > 0 must diverge
  config_c.output_dir = dir_c;

  const auto run_a = exp::Runner(config_a).run();
  const auto run_b = exp::Runner(config_b).run();
  const auto run_c = exp::Runner(config_c).run();

  const auto ck_a = networks::Checkpoint::load(run_a.final_checkpoint);
  const auto ck_b = networks::Checkpoint::load(run_b.final_checkpoint);
  const auto ck_c = networks::Checkpoint::load(run_c.final_checkpoint);

  CHECK(run_a.manifest.baseline_equivalent);
  CHECK_FALSE(run_c.manifest.baseline_equivalent);

  int64_t compared = 0;
  double max_c_diff = 0;
  for (const auto& [name, t] : ck_a.tensors) {
    if (name.rfind("encoder.", 0) != 0 && name.rfind("inv_head.", 0) != 0) continue;
    const auto& tb = ck_b.tensors.at(name);
    REQUIRE(tb.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) {
      CHECK(t[i] == tb[i]);  // bitwise: branch shape is invisible at lambda 0
      max_c_diff = std::max(max_c_diff,
                            std::abs(static_cast<double>(t[i]) - ck_c.tensors.at(name)[i]));
    }
    compared += t.numel();
  }
  CHECK(compared > 0);
  CHECK(max_c_diff > 0.0);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("runner: reproducible given (seed, config) and resumable after a kill") {
  const std::string dir_a = "/tmp/equimod_resume_a";
  const std::string dir_b = "/tmp/equimod_resume_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  auto config_a = tiny_config(Baseline::simclr, 1.0);
  config_a.output_dir = dir_a;
  auto config_b = config_a;
  config_b.output_dir = dir_b;

  std::vector<double> losses_a;
  {
    exp::Runner runner(config_a);
    runner.on_step = [&](int64_t, const StepResult& r) { losses_a.push_back(r.loss_total); };
    runner.run();
  }

  // same config, killed mid-third-epoch, then resumed
  std::vector<double> losses_b;
  {
    exp::Runner runner(config_b);
    runner.on_step = [&](int64_t step, const StepResult& r) {
      losses_b.push_back(r.loss_total);
      if (step == 7) throw KillRun();
    };
    CHECK_THROWS_AS(runner.run(), KillRun);
    const auto manifest = exp::RunManifest::load(dir_b + "/manifest.json");
    CHECK(manifest.status.rfind("aborted", 0) == 0);
  }
  {
    exp::Runner runner(config_b);
    runner.on_step = [&](int64_t step, const StepResult& r) {
      // resumes from the epoch-2 checkpoint: steps 7.. replay
      if (static_cast<size_t>(step) > losses_b.size()) losses_b.push_back(r.loss_total);
    };
    const auto result = runner.run();
    CHECK(result.manifest.status == "completed");
    CHECK(result.manifest.epochs_completed == config_b.epochs);
  }

  REQUIRE(losses_a.size() == losses_b.size());
  for (size_t i = 6; i < losses_a.size(); ++i) CHECK(losses_a[i] == losses_b[i]);

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("presets pin the published hyperparameters") {
  const auto simclr_cifar = exp::preset("cifar10_simclr");
  CHECK(simclr_cifar.loss.tau == 0.5);
  CHECK(simclr_cifar.loss.tau_prime == 0.2);
  CHECK(simclr_cifar.loss.lambda == 1.0);
  CHECK(simclr_cifar.batch_size == 512);
  CHECK(simclr_cifar.epochs == 800);
  CHECK(simclr_cifar.warmup_epochs == 10);
  CHECK(simclr_cifar.optimizer.lr == 4.0);
  CHECK(simclr_cifar.optimizer.momentum == 0.9);
  CHECK(simclr_cifar.optimizer.weight_decay == 1e-6);
  CHECK(simclr_cifar.inv_dim == 128);
  CHECK(simclr_cifar.equi_dim == 128);
  CHECK(simclr_cifar.encoder == "resnet18-cifar");

  const auto simclr_in = exp::preset("imagenet_simclr");
  CHECK(simclr_in.loss.tau == 0.2);
  CHECK(simclr_in.batch_size == 4096);
  CHECK(simclr_in.optimizer.lr == 2.4);
  CHECK(simclr_in.encoder == "resnet50");

  const auto byol_in = exp::preset("imagenet_byol");
  CHECK(byol_in.epochs == 1000);
  CHECK(byol_in.optimizer.lr == 4.8);
  CHECK(byol_in.optimizer.weight_decay == 1.5e-6);
  CHECK(byol_in.loss.byol_tau_base == 0.996);
  CHECK(byol_in.inv_dim == 256);

  const auto byol_cifar = exp::preset("cifar10_byol");
  CHECK(byol_cifar.epochs == 800);
  CHECK(byol_cifar.batch_size == 512);
  CHECK(byol_cifar.optimizer.lr == 2.0);
  CHECK(byol_cifar.optimizer.weight_decay == 1e-6);

  const auto barlow = exp::preset("cifar10_barlow");
  CHECK(barlow.optimizer.lr == 1.2);
  CHECK(barlow.optimizer.weight_decay == 1.5e-6);
  CHECK(barlow.loss.barlow_lambda == 0.005);
  CHECK(barlow.batch_size == 512);
  CHECK(barlow.inv_dim == 128);
}
