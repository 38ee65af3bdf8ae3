#include "equimod/trainer/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace equimod::trainer {

using core::DTensor;
using core::Image;
using core::Rng;
using core::Tensor;

namespace {

DTensor to_double(const Tensor& t) {
  DTensor d(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) d[i] = t[i];
  return d;
}

Tensor to_float(const DTensor& d, double scale = 1.0) {
  Tensor t(d.shape());
  for (int64_t i = 0; i < d.numel(); ++i) t[i] = static_cast<float>(d[i] * scale);
  return t;
}

void copy_row(Tensor& dst, int64_t dst_row, const Image& img) {
  const int64_t len = static_cast<int64_t>(img.px.size());
  float* out = dst.data() + dst_row * len;
  for (int64_t i = 0; i < len; ++i) out[i] = img.px[static_cast<size_t>(i)];
}

}  // namespace

Trainer::Trainer(networks::EquiModModel& model, const OptimizerConfig& opt,
                 const augcodec::ViewPolicies& policies,
                 const augcodec::LayoutDescriptor& layout, const TrainStepConfig& step_config)
    : model_(model), policies_(policies), layout_(layout), step_config_(step_config) {
  step_config_.loss.validate();
  if (step_config_.accumulation_steps < 1)
    throw std::invalid_argument("trainer: accumulation steps must be >= 1");
  networks::ParamCollector pc;
  model_.collect(pc);
  lars_ = Lars(pc.params, opt);
}

StepResult Trainer::training_step(const std::vector<Image>& originals, double lr, double ema_tau,
                                  uint64_t step_seed) {
  const int64_t n = static_cast<int64_t>(originals.size());
  if (n < 2) throw std::invalid_argument("training_step: at least 2 images per batch");
  const int k = step_config_.accumulation_steps;
  if (n / k < 2) throw std::invalid_argument("training_step: microbatches need >= 2 images");

  model_.zero_grad();
  StepResult total;
  int64_t offset = 0;
  for (int m = 0; m < k; ++m) {
    const int64_t lo = m * n / k;
    const int64_t hi = (m + 1) * n / k;
    std::vector<Image> slice(originals.begin() + lo, originals.begin() + hi);
    const StepResult r =
        forward_backward(slice, step_seed, offset, /*do_backward=*/true, 1.0 / k);
    total.loss_inv += r.loss_inv / k;
    total.loss_equi += r.loss_equi / k;
    total.loss_total += r.loss_total / k;
    offset += hi - lo;
  }
  if (!std::isfinite(total.loss_total))
    throw std::runtime_error("training_step: non-finite loss (inv=" +
                             std::to_string(total.loss_inv) +
                             ", equi=" + std::to_string(total.loss_equi) + "); step aborted");
  lars_.step(lr);
  if (model_.has_target()) model_.ema_update_target(ema_tau);
  return total;
}

StepResult Trainer::evaluate_batch(const std::vector<Image>& originals, uint64_t step_seed) {
  return forward_backward(originals, step_seed, 0, /*do_backward=*/false, 1.0);
}

StepResult Trainer::forward_backward(const std::vector<Image>& originals, uint64_t seed_base,
                                     int64_t index_offset, bool do_backward, double grad_scale) {
  const int64_t n = static_cast<int64_t>(originals.size());
  const int res = model_.config().encoder.resolution;
  const bool equi = equimod_enabled();
  const auto baseline = model_.config().baseline;

  // per-image transformation pair, seeded by (step, image index, view)
  std::vector<augcodec::AugmentationTrace> traces(static_cast<size_t>(2 * n));
  std::vector<Image> views(static_cast<size_t>(2 * n));
  std::vector<Image> prepared(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const Image& src = originals[static_cast<size_t>(i)];
    Rng rng_i(Rng::derive(seed_base, {static_cast<uint64_t>(index_offset + i), 0}));
    Rng rng_j(Rng::derive(seed_base, {static_cast<uint64_t>(index_offset + i), 1}));
    traces[static_cast<size_t>(i)] = augcodec::sample_trace(policies_.first, rng_i, src.h, src.w);
    traces[static_cast<size_t>(n + i)] =
        augcodec::sample_trace(policies_.second, rng_j, src.h, src.w);
    views[static_cast<size_t>(i)] =
        augcodec::apply_trace(src, traces[static_cast<size_t>(i)], policies_.first);
    views[static_cast<size_t>(n + i)] =
        augcodec::apply_trace(src, traces[static_cast<size_t>(n + i)], policies_.second);
    if (equi)
      prepared[static_cast<size_t>(i)] =
          (src.h == res && src.w == res) ? src : core::resize_shorter_center_crop(src, res);
  }

  // one encoder pass over [v_i | v_j | x] (originals only when the
  // equivariance branch is active)
  const int64_t rows = equi ? 3 * n : 2 * n;
  Tensor batch({rows, res, res, 3});
  for (int64_t i = 0; i < 2 * n; ++i) copy_row(batch, i, views[static_cast<size_t>(i)]);
  if (equi)
    for (int64_t i = 0; i < n; ++i) copy_row(batch, 2 * n + i, prepared[static_cast<size_t>(i)]);

  const Tensor h_all = model_.encoder().forward(batch, true);
  const Tensor h_views = h_all.rows(0, 2 * n);

  // invariance branch
  StepResult result;
  Tensor d_z;  // gradient flowing into the invariance head output
  Tensor z = model_.inv_head().forward(h_views, true);
  if (baseline == augcodec::Baseline::simclr) {
    const auto g = objectives::simclr_invariance_loss_grad(to_double(z), step_config_.loss.tau);
    result.loss_inv = g.loss;
    if (do_backward) d_z = to_float(g.d_input, grad_scale);
  } else if (baseline == augcodec::Baseline::barlow) {
    const auto g =
        objectives::barlow_twins_loss_grad(to_double(z), step_config_.loss.barlow_lambda);
    result.loss_inv = g.loss;
    if (do_backward) d_z = to_float(g.d_input, grad_scale);
  } else {
    const Tensor p = model_.predict_inv(z, true);
    const Tensor th = model_.target_encode(batch.rows(0, 2 * n), true);
    const Tensor tz = model_.target_project_inv(th, true);
    const auto g = objectives::byol_invariance_loss_grad(to_double(p), to_double(tz));
    result.loss_inv = g.loss;
    if (do_backward)
      d_z = model_.inv_predictor().backward(to_float(g.d_input, grad_scale));
  }

  // equivariance branch
  Tensor d_h_all;
  if (equi) {
    const Tensor zq_all = model_.project_equi(h_all, true);
    const Tensor zq_views = zq_all.rows(0, 2 * n);
    const Tensor zo = zq_all.rows(2 * n, 3 * n);

    Tensor enc({2 * n, layout_.layout.length()});
    for (int64_t i = 0; i < 2 * n; ++i) {
      const auto raw = augcodec::encode_trace(traces[static_cast<size_t>(i)], layout_.layout);
      const auto norm = augcodec::normalize(raw, layout_.stats);
      for (int64_t c = 0; c < enc.dim(1); ++c) enc.at(i, c) = norm[static_cast<size_t>(c)];
    }
    const Tensor code = model_.project_aug(enc, true);

    Tensor zo_dup({2 * n, zo.dim(1)});
    for (int64_t i = 0; i < 2 * n; ++i)
      for (int64_t c = 0; c < zo.dim(1); ++c) zo_dup.at(i, c) = zo.at(i % n, c);
    const Tensor pred_in = networks::EquiModModel::concat_code_embedding(code, zo_dup);
    const Tensor zhat = model_.predictor().forward(pred_in, true);

    objectives::EmbeddingBundle bundle;
    bundle.z = to_double(z);
    bundle.zq = to_double(zq_views);
    bundle.zo = to_double(zo);
    bundle.zhat = to_double(zhat);
    const auto g = objectives::equimod_loss_grad(bundle, step_config_.loss.tau_prime,
                                                 step_config_.loss.equi_standard_denominator);
    result.loss_equi = g.loss;

    if (do_backward) {
      const double lambda = step_config_.loss.lambda;
      const Tensor d_zhat = to_float(g.d_zhat, lambda * grad_scale);
      const Tensor d_pred_in = model_.predictor().backward(d_zhat);

      // split the predictor input gradient back into code and z'_o parts
      const int64_t code_w = code.dim(1);
      Tensor d_code({2 * n, code_w});
      Tensor d_zo({n, zo.dim(1)});
      for (int64_t i = 0; i < 2 * n; ++i) {
        for (int64_t c = 0; c < code_w; ++c) d_code.at(i, c) = d_pred_in.at(i, c);
        for (int64_t c = 0; c < zo.dim(1); ++c)
          d_zo.at(i % n, c) += d_pred_in.at(i, code_w + c);
      }
      if (!model_.aug_projector().empty()) model_.aug_projector().backward(d_code);

      Tensor d_zq_all({3 * n, zq_all.dim(1)});
      for (int64_t i = 0; i < 2 * n; ++i)
        for (int64_t c = 0; c < zq_all.dim(1); ++c)
          d_zq_all.at(i, c) = static_cast<float>(g.d_zq.at(i, c) * lambda * grad_scale);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < zq_all.dim(1); ++c) d_zq_all.at(2 * n + i, c) += d_zo.at(i, c);

      d_h_all = model_.equi_head().empty() ? d_zq_all : model_.equi_head().backward(d_zq_all);
    }
  }

  result.loss_total =
      objectives::total_loss(result.loss_inv, result.loss_equi, step_config_.loss.lambda);

  if (do_backward) {
    const Tensor d_h_inv = model_.inv_head().backward(d_z);
    if (d_h_all.empty()) d_h_all = Tensor({rows, h_all.dim(1)});
    for (int64_t i = 0; i < 2 * n; ++i)
      for (int64_t c = 0; c < h_all.dim(1); ++c) d_h_all.at(i, c) += d_h_inv.at(i, c);
    model_.encoder().backward(d_h_all);
  }
  return result;
}

}  // namespace equimod::trainer
