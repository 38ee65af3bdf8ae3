#include "equimod/networks/model.hpp"

namespace equimod::networks {

void ModelConfig::validate() const {
  if (encoder.resolution <= 0) throw std::invalid_argument("model: bad resolution");
  if (inv_head.layers < 1) throw std::invalid_argument("model: invariance head needs >= 1 layer");
  if (equi_head.layers < 0 || equi_head.layers > 3)
    throw std::invalid_argument("model: equivariance head depth out of range");
  if (predictor.layers < 1 || predictor.layers > 2)
    throw std::invalid_argument("model: predictor depth must be 1 or 2");
  if (aug_projector.layers < 0 || aug_projector.layers > 2)
    throw std::invalid_argument("model: augmentation projector depth out of range");
  if (trace_dim <= 0) throw std::invalid_argument("model: bad trace length");
}

EquiModModel::EquiModModel(const ModelConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  encoder_ = ResNet(config.encoder.arch, config.encoder.width_mult);
  const int rep = encoder_.rep_width();

  inv_head_ = Mlp(MlpSpec::projection_head(rep, config.inv_head.layers, config.inv_head.hidden,
                                           config.inv_head.out));
  if (config.equi_head.layers > 0)
    equi_head_ = Mlp(MlpSpec::projection_head(rep, config.equi_head.layers,
                                              config.equi_head.hidden, config.equi_head.out));

  const int equi_out = config.equi_head.layers > 0 ? config.equi_head.out : rep;
  if (config.aug_projector.layers > 0)
    aug_projector_ = Mlp(MlpSpec::perceptron(config.trace_dim, config.aug_projector.layers,
                                             config.aug_projector.hidden, config.aug_projector.out));
  const int code = config.aug_projector.layers > 0 ? config.aug_projector.out : config.trace_dim;
  predictor_ = Mlp(MlpSpec::projection_head(code + equi_out, config.predictor.layers,
                                            config.predictor.hidden, equi_out));

  if (config.baseline == augcodec::Baseline::byol)
    inv_predictor_ = Mlp(MlpSpec::projection_head(config.inv_head.out, config.inv_predictor.layers,
                                                  config.inv_predictor.hidden, config.inv_head.out));

  // per-component streams so shared components init identically across
  // baseline/equimod variants of the same seed
  {
    core::Rng rng(core::Rng::derive(seed, {1}));
    encoder_.init(rng);
  }
  {
    core::Rng rng(core::Rng::derive(seed, {2}));
    inv_head_.init(rng);
  }
  if (!equi_head_.empty()) {
    core::Rng rng(core::Rng::derive(seed, {3}));
    equi_head_.init(rng);
  }
  {
    core::Rng rng(core::Rng::derive(seed, {4}));
    predictor_.init(rng);
  }
  if (!aug_projector_.empty()) {
    core::Rng rng(core::Rng::derive(seed, {5}));
    aug_projector_.init(rng);
  }
  if (config.baseline == augcodec::Baseline::byol) {
    core::Rng rng(core::Rng::derive(seed, {6}));
    inv_predictor_.init(rng);

    // momentum copies start equal to the online network
    target_encoder_ = std::make_unique<ResNet>(config.encoder.arch, config.encoder.width_mult);
    target_inv_head_ = std::make_unique<Mlp>(inv_head_.spec());
    ParamCollector online, target;
    encoder_.collect("encoder", online);
    inv_head_.collect("inv_head", online);
    target_encoder_->collect("encoder", target);
    target_inv_head_->collect("inv_head", target);
    for (size_t i = 0; i < online.params.size(); ++i)
      *target.params[i].value = *online.params[i].value;
  }
}

Tensor EquiModModel::encode(const Tensor& images, bool train) {
  if (images.rank() != 4 || images.dim(1) != config_.encoder.resolution ||
      images.dim(2) != config_.encoder.resolution || images.dim(3) != 3)
    throw std::invalid_argument("encode: images must be (N, " +
                                std::to_string(config_.encoder.resolution) + ", " +
                                std::to_string(config_.encoder.resolution) + ", 3)");
  return encoder_.forward(images, train);
}

Tensor EquiModModel::project_inv(const Tensor& h, bool train) {
  if (h.rank() != 2 || h.dim(1) != rep_width())
    throw std::invalid_argument("project_inv: representation width mismatch");
  return inv_head_.forward(h, train);
}

Tensor EquiModModel::project_equi(const Tensor& h, bool train) {
  if (h.rank() != 2 || h.dim(1) != rep_width())
    throw std::invalid_argument("project_equi: representation width mismatch");
  if (equi_head_.empty()) return h;
  return equi_head_.forward(h, train);
}

Tensor EquiModModel::project_aug(const Tensor& encoded, bool train) {
  if (encoded.rank() != 2 || encoded.dim(1) != config_.trace_dim)
    throw std::invalid_argument("project_aug: trace vector length " +
                                std::to_string(encoded.rank() == 2 ? encoded.dim(1) : -1) +
                                " does not match profile length " +
                                std::to_string(config_.trace_dim));
  if (aug_projector_.empty()) return encoded;
  return aug_projector_.forward(encoded, train);
}

Tensor EquiModModel::concat_code_embedding(const Tensor& code, const Tensor& z_orig) {
  if (code.dim(0) != z_orig.dim(0)) throw std::invalid_argument("predict_equi: batch mismatch");
  Tensor joined({code.dim(0), code.dim(1) + z_orig.dim(1)});
  for (int64_t r = 0; r < code.dim(0); ++r) {
    for (int64_t c = 0; c < code.dim(1); ++c) joined.at(r, c) = code.at(r, c);
    for (int64_t c = 0; c < z_orig.dim(1); ++c) joined.at(r, code.dim(1) + c) = z_orig.at(r, c);
  }
  return joined;
}

Tensor EquiModModel::predict_equi(const Tensor& z_orig, const Tensor& code, bool train) {
  if (z_orig.rank() != 2 || z_orig.dim(1) != equi_width())
    throw std::invalid_argument("predict_equi: embedding width mismatch");
  if (code.rank() != 2 || code.dim(1) != code_width())
    throw std::invalid_argument("predict_equi: code width mismatch");
  return predictor_.forward(concat_code_embedding(code, z_orig), train);
}

Tensor EquiModModel::predict_inv(const Tensor& z, bool train) {
  if (config_.baseline != augcodec::Baseline::byol)
    throw std::logic_error("predict_inv: only the BYOL pipeline has an online predictor");
  return inv_predictor_.forward(z, train);
}

Tensor EquiModModel::target_encode(const Tensor& images, bool train) {
  if (!target_encoder_) throw std::logic_error("target_encode: no momentum target network");
  return target_encoder_->forward(images, train);
}

Tensor EquiModModel::target_project_inv(const Tensor& h, bool train) {
  if (!target_inv_head_) throw std::logic_error("target_project_inv: no momentum target network");
  return target_inv_head_->forward(h, train);
}

void EquiModModel::collect(ParamCollector& pc) {
  encoder_.collect("encoder", pc);
  inv_head_.collect("inv_head", pc);
  if (!equi_head_.empty()) equi_head_.collect("equi_head", pc);
  predictor_.collect("predictor", pc);
  if (!aug_projector_.empty()) aug_projector_.collect("aug_projector", pc);
  if (config_.baseline == augcodec::Baseline::byol) inv_predictor_.collect("inv_predictor", pc);
}

void EquiModModel::collect_state(ParamCollector& pc) {
  collect(pc);
  if (target_encoder_) {
    ParamCollector target;
    target_encoder_->collect("target_encoder", target);
    target_inv_head_->collect("target_inv_head", target);
    for (auto& p : target.params) pc.add_buffer(p.name, *p.value);
    for (auto& b : target.buffers) pc.add_buffer(b.name, *b.value);
  }
}

void EquiModModel::zero_grad() {
  ParamCollector pc;
  collect(pc);
  for (auto& p : pc.params) p.grad->zero();
}

void EquiModModel::ema_update_target(double tau) {
  if (!target_encoder_) return;
  ParamCollector online, target;
  encoder_.collect("encoder", online);
  inv_head_.collect("inv_head", online);
  target_encoder_->collect("encoder", target);
  target_inv_head_->collect("inv_head", target);
  for (size_t i = 0; i < online.params.size(); ++i) {
    Tensor& t = *target.params[i].value;
    const Tensor& o = *online.params[i].value;
    for (int64_t k = 0; k < t.numel(); ++k)
      t[k] = static_cast<float>(tau * t[k] + (1.0 - tau) * o[k]);
  }
  // running statistics track the online network directly
  for (size_t i = 0; i < online.buffers.size(); ++i)
    *target.buffers[i].value = *online.buffers[i].value;
}

}  // namespace equimod::networks
