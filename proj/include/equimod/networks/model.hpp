#pragma once

#include <cstdint>
#include <memory>

#include "equimod/augcodec/codec.hpp"
#include "equimod/networks/resnet.hpp"

namespace equimod::networks {

struct EncoderConfig {
  EncoderArch arch = EncoderArch::resnet18_cifar;
  double width_mult = 1.0;
  int resolution = 32;
};

struct HeadConfig {
  int layers = 3;  // 0 = identity
  int hidden = 2048;
  int out = 128;
};

struct PredictorConfig {
  int layers = 1;  // 1 or 2
  int hidden = 128;
};

struct AugProjectorConfig {
  int layers = 1;  // 0 = feed the normalized vector straight to the predictor
  int hidden = 128;
  int out = 128;
};

struct ModelConfig {
  augcodec::Baseline baseline = augcodec::Baseline::simclr;
  EncoderConfig encoder;
  HeadConfig inv_head{3, 2048, 128};
  HeadConfig equi_head{3, 2048, 128};
  PredictorConfig predictor;
  AugProjectorConfig aug_projector;
  // BYOL online prediction head on top of the invariance projection
  HeadConfig inv_predictor{2, 4096, 256};
  int trace_dim = 15;

  void validate() const;
};

// The trainable pieces: encoder, invariance head (+ BYOL online predictor and
// momentum target copies), equivariance head, equivariance predictor and the
// augmentation projector. Forward contracts below are the public surface;
// the trainer drives the members directly for the backward pass.
class EquiModModel {
public:
  EquiModModel(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int rep_width() const { return encoder_.rep_width(); }
  int equi_width() const { return equi_head_.empty() ? encoder_.rep_width() : equi_head_.out_width(); }
  int code_width() const {
    return aug_projector_.empty() ? config_.trace_dim : aug_projector_.out_width();
  }
  bool has_target() const { return target_encoder_ != nullptr; }

  // batch of images (N, res, res, 3) -> representations (N, rep_width)
  Tensor encode(const Tensor& images, bool train);
  // representations -> invariance embeddings z
  Tensor project_inv(const Tensor& h, bool train);
  // representations -> equivariance embeddings z'
  Tensor project_equi(const Tensor& h, bool train);
  // normalized trace vectors -> augmentation codes
  Tensor project_aug(const Tensor& encoded, bool train);
  // (z'_o, code) -> predicted view embedding; input is concat(code, z'_o)
  Tensor predict_equi(const Tensor& z_orig, const Tensor& code, bool train);
  // BYOL online prediction of the target projection
  Tensor predict_inv(const Tensor& z, bool train);

  Tensor target_encode(const Tensor& images, bool train);
  Tensor target_project_inv(const Tensor& h, bool train);

  // module access for the training step's backward pass
  ResNet& encoder() { return encoder_; }
  Mlp& inv_head() { return inv_head_; }
  Mlp& equi_head() { return equi_head_; }
  Mlp& predictor() { return predictor_; }
  Mlp& aug_projector() { return aug_projector_; }
  Mlp& inv_predictor() { return inv_predictor_; }

  // trainable parameters, grouped by component prefix
  void collect(ParamCollector& pc);
  // everything that belongs in a checkpoint (adds target copies as buffers)
  void collect_state(ParamCollector& pc);
  void zero_grad();

  // target <- tau * target + (1 - tau) * online over encoder + inv head
  void ema_update_target(double tau);
  // concat(code, z_orig) helper shared by forward and trainer
  static Tensor concat_code_embedding(const Tensor& code, const Tensor& z_orig);

private:
  ModelConfig config_;
  ResNet encoder_;
  Mlp inv_head_;
  Mlp equi_head_;       // empty when 0 layers (identity)
  Mlp predictor_;
  Mlp aug_projector_;   // empty when 0 layers (passthrough)
  Mlp inv_predictor_;   // BYOL only
  std::unique_ptr<ResNet> target_encoder_;
  std::unique_ptr<Mlp> target_inv_head_;
};

}  // namespace equimod::networks
