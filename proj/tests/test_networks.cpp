#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "equimod/networks/checkpoint.hpp"
#include "equimod/networks/model.hpp"

using namespace equimod::networks;
using equimod::augcodec::Baseline;
using equimod::core::DTensor;
using equimod::core::Rng;
using equimod::core::Tensor;

namespace {

ModelConfig tiny_cifar_config(Baseline baseline = Baseline::simclr) {
  ModelConfig mc;
  mc.baseline = baseline;
  mc.encoder = {EncoderArch::resnet18_cifar, 0.125, 32};
  mc.inv_head = {2, 32, 16};
  mc.equi_head = {2, 32, 16};
  mc.predictor = {1, 16};
  mc.aug_projector = {1, 16, 16};
  mc.inv_predictor = {2, 32, 16};
  mc.trace_dim = 15;
  return mc;
}

Tensor random_images(int64_t n, int res, uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, res, res, 3});
  for (auto& v : t.vec()) v = static_cast<float>(rng.uniform01());
  return t;
}

}  // namespace

TEST_CASE("encode: resnet18-cifar maps 32x32 batches to 512-wide representations") {
  ModelConfig mc;
  mc.encoder = {EncoderArch::resnet18_cifar, 1.0, 32};
  mc.trace_dim = 15;
  EquiModModel model(mc, 7);
  const Tensor h = model.encode(random_images(8, 32, 1), false);
  CHECK(h.shape() == std::vector<int64_t>{8, 512});
  for (int64_t i = 0; i < h.numel(); ++i) CHECK(std::isfinite(h[i]));
}

TEST_CASE("encode: resnet50 maps 224x224 batches to 2048-wide representations") {
  ModelConfig mc;
  mc.baseline = Baseline::simclr;
  mc.encoder = {EncoderArch::resnet50, 1.0, 224};
  mc.inv_head = {3, 128, 128};
  mc.equi_head = {3, 128, 128};
  mc.trace_dim = 17;
  EquiModModel model(mc, 7);
  const Tensor h = model.encode(random_images(4, 224, 2), false);
  CHECK(h.shape() == std::vector<int64_t>{4, 2048});
  for (int64_t i = 0; i < h.numel(); ++i) CHECK(std::isfinite(h[i]));
}

TEST_CASE("encode: resolution mismatch rejected") {
  EquiModModel model(tiny_cifar_config(), 7);
  CHECK_THROWS_AS(model.encode(random_images(2, 16, 3), false), std::invalid_argument);
}

TEST_CASE("encode: zeroed weights collapse every row to the same output") {
  EquiModModel model(tiny_cifar_config(), 7);
  ParamCollector pc;
  model.encoder().collect("encoder", pc);
  for (auto& p : pc.params) p.value->zero();
  const Tensor h = model.encode(random_images(3, 32, 4), false);
  for (int64_t r = 1; r < h.dim(0); ++r)
    for (int64_t c = 0; c < h.dim(1); ++c) CHECK(h.at(r, c) == h.at(0, c));
}

TEST_CASE("projection heads: shape contracts and width checks") {
  ModelConfig mc;
  mc.encoder = {EncoderArch::resnet18_cifar, 1.0, 32};
  mc.inv_head = {3, 2048, 128};
  mc.equi_head = {3, 2048, 128};
  mc.trace_dim = 15;
  EquiModModel model(mc, 11);
  const Tensor h = model.encode(random_images(8, 32, 5), false);
  const Tensor z = model.project_inv(h, false);
  const Tensor zq = model.project_equi(h, false);
  CHECK(z.shape() == std::vector<int64_t>{8, 128});
  CHECK(zq.shape() == std::vector<int64_t>{8, 128});

  Tensor wrong({8, 100});
  CHECK_THROWS_AS(model.project_inv(wrong, false), std::invalid_argument);
  CHECK_THROWS_AS(model.project_equi(wrong, false), std::invalid_argument);
}

TEST_CASE("batch norm: eval mode with identity affine maps zero to zero") {
  BatchNorm1d bn(6);
  Tensor x({3, 6});
  const Tensor y = bn.forward(x, false);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(0.0));
}

TEST_CASE("batch norm: training mode needs batch >= 2") {
  BatchNorm1d bn(4);
  Tensor x({1, 4});
  CHECK_THROWS_AS(bn.forward(x, true), std::invalid_argument);
  CHECK_NOTHROW(bn.forward(x, false));
}

TEST_CASE("project_aug: shapes, zero weights, distinct codes") {
  EquiModModel model(tiny_cifar_config(), 13);
  Rng rng(17);
  Tensor enc({2, 15});
  for (auto& v : enc.vec()) v = static_cast<float>(rng.normal(0, 1));
  const Tensor code = model.project_aug(enc, false);
  CHECK(code.shape() == std::vector<int64_t>{2, 16});

  // distinct inputs map to distinct codes under random initialization
  bool differ = false;
  for (int64_t c = 0; c < code.dim(1); ++c)
    if (code.at(0, c) != code.at(1, c)) differ = true;
  CHECK(differ);

  Tensor bad({2, 18});
  CHECK_THROWS_AS(model.project_aug(bad, false), std::invalid_argument);

  ParamCollector pc;
  model.aug_projector().collect("proj", pc);
  for (auto& p : pc.params) p.value->zero();
  const Tensor zero_code = model.project_aug(enc, false);
  for (int64_t i = 0; i < zero_code.numel(); ++i) CHECK(zero_code[i] == 0.f);
}

TEST_CASE("predict_equi: concatenated input, output width, zero-weight case") {
  ModelConfig mc;
  mc.encoder = {EncoderArch::resnet18_cifar, 0.125, 32};
  mc.inv_head = {2, 32, 16};
  mc.equi_head = {3, 64, 128};
  mc.aug_projector = {1, 128, 128};
  mc.trace_dim = 15;
  EquiModModel model(mc, 19);
  Rng rng(23);
  Tensor zo({4, 128}), code({4, 128});
  for (auto& v : zo.vec()) v = static_cast<float>(rng.normal(0, 1));
  for (auto& v : code.vec()) v = static_cast<float>(rng.normal(0, 1));
  const Tensor zhat = model.predict_equi(zo, code, true);
  CHECK(zhat.shape() == std::vector<int64_t>{4, 128});

  Tensor narrow({4, 64});
  CHECK_THROWS_AS(model.predict_equi(narrow, code, true), std::invalid_argument);

  ParamCollector pc;
  model.predictor().collect("pred", pc);
  for (auto& p : pc.params) p.value->zero();
  const Tensor constant = model.predict_equi(zo, code, false);
  for (int64_t r = 0; r < constant.dim(0); ++r)
    for (int64_t c = 0; c < constant.dim(1); ++c) CHECK(constant.at(r, c) == constant.at(0, c));
}

namespace {

// scalar probe loss sum(c * y) so the analytic input/parameter gradients can
// be compared against central differences. Coordinates whose perturbation
// flips a rectifier unit are skipped: the derivative does not exist there.
void check_mlp_gradients(MlpT<double>& mlp, DTensor& x, double tol = 1e-4) {
  Rng rng(31);
  DTensor out = mlp.forward(x, true);
  DTensor weights(out.shape());
  for (auto& v : weights.vec()) v = rng.normal(0, 1);

  const auto eval = [&]() {
    DTensor y = mlp.forward(x, true);
    double acc = 0;
    for (int64_t i = 0; i < y.numel(); ++i) acc += weights[i] * y[i];
    return acc;
  };

  mlp.zero_grad();
  mlp.forward(x, true);
  const DTensor gx = mlp.backward(weights);

  double max_rel = 0;
  int64_t checked = 0, skipped = 0;
  const double step = 1e-3;
  const auto fd_check = [&](double& slot, double analytic) {
    const double orig = slot;
    slot = orig + step;
    const double up = eval();
    const auto pattern_up = mlp.relu_pattern();
    slot = orig - step;
    const double down = eval();
    const auto pattern_down = mlp.relu_pattern();
    slot = orig + step / 2;
    const double up_half = eval();
    slot = orig - step / 2;
    const double down_half = eval();
    slot = orig;
    if (pattern_up != pattern_down) {
      ++skipped;
      return;
    }
    ++checked;
    // Richardson-extrapolated central difference: cancels the h^2 term that
    // batch-norm chains make noticeable at h = 1e-3
    const double fd_h = (up - down) / (2 * step);
    const double fd_h2 = (up_half - down_half) / step;
    const double fd = (4 * fd_h2 - fd_h) / 3;
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    max_rel = std::max(max_rel, std::abs(fd - analytic) / denom);
  };

  for (int64_t i = 0; i < x.numel(); ++i) fd_check(x[i], gx[i]);

  ParamCollectorT<double> pc;
  mlp.collect("mlp", pc);
  for (auto& p : pc.params)
    for (int64_t i = 0; i < p.value->numel(); ++i) fd_check((*p.value)[i], (*p.grad)[i]);

  CHECK(max_rel < tol);
  CHECK(checked > 9 * skipped);  // kink crossings must stay rare
}

}  // namespace

TEST_CASE("gradients: miniature projection head matches finite differences") {
  MlpT<double> head(MlpSpec::projection_head(8, 2, 16, 6));
  Rng rng(37);
  head.init(rng);
  DTensor x({5, 8});
  for (auto& v : x.vec()) v = rng.normal(0, 1);
  check_mlp_gradients(head, x);
}

TEST_CASE("gradients: miniature predictor matches finite differences") {
  // same shape family the equivariance predictor uses: concat input, fc+bn
  MlpT<double> predictor(MlpSpec::projection_head(16, 1, 16, 8));
  Rng rng(41);
  predictor.init(rng);
  DTensor x({6, 16});
  for (auto& v : x.vec()) v = rng.normal(0, 1);
  check_mlp_gradients(predictor, x);

  MlpT<double> deep(MlpSpec::projection_head(12, 2, 16, 8));
  deep.init(rng);
  DTensor x2({5, 12});
  for (auto& v : x2.vec()) v = rng.normal(0, 1);
  check_mlp_gradients(deep, x2);
}

TEST_CASE("gradients: perceptron augmentation projector matches finite differences") {
  MlpT<double> proj(MlpSpec::perceptron(15, 2, 16, 8));
  Rng rng(43);
  proj.init(rng);
  DTensor x({4, 15});
  for (auto& v : x.vec()) v = rng.normal(0, 1);
  check_mlp_gradients(proj, x);
}

TEST_CASE("ablation variants all construct and forward") {
  for (int equi_layers : {0, 1, 2, 3}) {
    ModelConfig mc = tiny_cifar_config();
    mc.equi_head.layers = equi_layers;
    EquiModModel model(mc, 47);
    const Tensor h = model.encode(random_images(2, 32, 6), false);
    const Tensor zq = model.project_equi(h, false);
    CHECK(zq.dim(1) == (equi_layers == 0 ? model.rep_width() : 16));
  }
  for (auto [layers, hidden] : std::vector<std::pair<int, int>>{{1, 16}, {2, 16}, {2, 128}, {2, 2048}}) {
    ModelConfig mc = tiny_cifar_config();
    mc.predictor = {layers, hidden};
    EquiModModel model(mc, 53);
    Tensor zo({2, 16}), code({2, 16});
    zo.fill(0.5f);
    code.fill(0.25f);
    CHECK(model.predict_equi(zo, code, true).dim(1) == 16);
  }
  for (auto [layers, hidden, out] : std::vector<std::tuple<int, int, int>>{
           {0, 0, 0}, {1, 0, 16}, {1, 0, 128}, {1, 0, 2048},
           {2, 16, 128}, {2, 128, 128}, {2, 2048, 128}}) {
    ModelConfig mc = tiny_cifar_config();
    mc.aug_projector = {layers, hidden == 0 ? 128 : hidden, out == 0 ? 128 : out};
    EquiModModel model(mc, 59);
    Tensor enc({2, 15});
    enc.fill(0.1f);
    const Tensor code = model.project_aug(enc, false);
    CHECK(code.dim(1) == (layers == 0 ? 15 : mc.aug_projector.out));
  }
}

TEST_CASE("byol variant carries predictor and momentum target") {
  ModelConfig mc = tiny_cifar_config(Baseline::byol);
  EquiModModel model(mc, 61);
  REQUIRE(model.has_target());

  const Tensor imgs = random_images(4, 32, 8);
  const Tensor h = model.encode(imgs, false);
  const Tensor th = model.target_encode(imgs, false);
  // target initialized as a copy of the online encoder
  REQUIRE(h.shape() == th.shape());
  for (int64_t i = 0; i < h.numel(); ++i) CHECK(h[i] == doctest::Approx(th[i]).epsilon(1e-6));

  const Tensor z = model.project_inv(h, false);
  const Tensor p = model.predict_inv(z, false);
  CHECK(p.shape() == z.shape());
}

TEST_CASE("checkpoint: archive round trip restores tensors and metadata") {
  EquiModModel model(tiny_cifar_config(), 67);
  Checkpoint ck;
  ck.config_text = "config text";
  ck.layout_json = "{}";
  ck.epoch = 3;
  ck.step = 42;
  ParamCollector pc;
  model.collect_state(pc);
  for (auto& p : pc.params) ck.tensors.emplace(p.name, *p.value);
  for (auto& b : pc.buffers) ck.tensors.emplace(b.name, *b.value);

  const std::string path = "/tmp/equimod_test_checkpoint.eqmd";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.config_text == ck.config_text);
  CHECK(back.epoch == 3);
  CHECK(back.step == 42);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    const auto it = back.tensors.find(name);
    REQUIRE(it != back.tensors.end());
    REQUIRE(it->second.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(it->second[i] == t[i]);
  }
  std::remove(path.c_str());
}
