#pragma once

#include "equimod/core/tensor.hpp"

namespace equimod::objectives {

using core::DTensor;

struct LossConfig {
  double lambda = 1.0;      // weight of the equivariance term
  double tau = 0.5;         // SimCLR temperature
  double tau_prime = 0.2;   // equivariance temperature
  double barlow_lambda = 0.005;
  double byol_tau_base = 0.996;
  // When true the positive similarity also appears in the equivariance
  // denominator (standard NT-Xent form). Default keeps the positive out of
  // the denominator.
  bool equi_standard_denominator = false;

  bool operator==(const LossConfig&) const = default;

  void validate() const;
};

// Per-batch embeddings, rows 0..N-1 are first views and rows N..2N-1 second
// views of the same images; view i pairs with view i+N.
//   z      (2N, Dz)  invariance embeddings
//   zq     (2N, Dq)  equivariance embeddings of the views
//   zo     (N,  Dq)  equivariance embeddings of the unaugmented originals
//   zhat   (2N, Dq)  predicted view embeddings, row-aligned with zq
struct EmbeddingBundle {
  DTensor z;
  DTensor zq;
  DTensor zo;
  DTensor zhat;

  int64_t num_images() const { return zo.empty() ? z.dim(0) / 2 : zo.dim(0); }
  void validate() const;
};

inline int64_t partner_index(int64_t i, int64_t n_images) {
  return i < n_images ? i + n_images : i - n_images;
}

double cosine_similarity(const double* a, const double* b, int64_t dim);

// Equivariance loss of ordered pair (i, j): the anchor is view i, its
// prediction zhat_i is the positive, and every other view except i and j is
// a negative. The positive term is not part of the denominator unless
// configured otherwise.
double equimod_pair_loss(const EmbeddingBundle& bundle, int64_t i, int64_t j, double tau_prime,
                         bool standard_denominator = false);

// Mean of equimod_pair_loss over all 2N ordered pairs (i, i+N) and (i+N, i).
double equimod_loss(const EmbeddingBundle& bundle, double tau_prime,
                    bool standard_denominator = false);

struct EquiLossGrads {
  double loss = 0.0;
  DTensor d_zq;    // (2N, Dq)
  DTensor d_zhat;  // (2N, Dq)
};
EquiLossGrads equimod_loss_grad(const EmbeddingBundle& bundle, double tau_prime,
                                bool standard_denominator = false);

// Standard NT-Xent over the invariance batch: positive in the denominator,
// only k = i excluded; mean over the 2N ordered positive pairs.
double simclr_invariance_loss(const DTensor& z, double tau);

struct SimpleLossGrads {
  double loss = 0.0;
  DTensor d_input;  // gradient w.r.t. the first argument
};
SimpleLossGrads simclr_invariance_loss_grad(const DTensor& z, double tau);

// BYOL regression: mean over rows of 2 - 2 sim(pred_k, target_partner(k)).
// Targets carry no gradient.
double byol_invariance_loss(const DTensor& online_pred, const DTensor& target_proj);
SimpleLossGrads byol_invariance_loss_grad(const DTensor& online_pred, const DTensor& target_proj);

// Barlow Twins: branches are standardized per dimension, the cross
// -correlation is pulled toward identity with off-diagonal weight lambda_bt.
double barlow_twins_loss(const DTensor& z, double lambda_bt);
SimpleLossGrads barlow_twins_loss_grad(const DTensor& z, double lambda_bt);

double total_loss(double invariance, double equivariance, double lambda);

}  // namespace equimod::objectives
