#include "equimod/objectives/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace equimod::objectives {

void LossConfig::validate() const {
  if (!(tau > 0.0) || !(tau_prime > 0.0))
    throw std::invalid_argument("loss config: temperatures must be positive");
  if (lambda < 0.0) throw std::invalid_argument("loss config: lambda must be >= 0");
  if (barlow_lambda < 0.0) throw std::invalid_argument("loss config: barlow lambda must be >= 0");
  if (byol_tau_base <= 0.0 || byol_tau_base > 1.0)
    throw std::invalid_argument("loss config: byol tau_base must be in (0,1]");
}

void EmbeddingBundle::validate() const {
  if (zq.rank() != 2 || zhat.rank() != 2 || zo.rank() != 2)
    throw std::invalid_argument("bundle: rank-2 tensors required");
  const int64_t two_n = zq.dim(0);
  if (two_n % 2 != 0 || zhat.dim(0) != two_n || zo.dim(0) != two_n / 2)
    throw std::invalid_argument("bundle: row counts must be 2N/2N/N");
  if (zq.dim(1) != zhat.dim(1) || zq.dim(1) != zo.dim(1))
    throw std::invalid_argument("bundle: equivariance widths differ");
}

namespace {

double norm_of(const double* a, int64_t dim) {
  double s = 0.0;
  for (int64_t i = 0; i < dim; ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

// d sim(a,b) / d a = (b/|b| - sim * a/|a|) / |a|
void cosine_grad(const double* a, const double* b, int64_t dim, double coeff, double* out) {
  const double na = norm_of(a, dim);
  const double nb = norm_of(b, dim);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm embedding");
  double dot = 0.0;
  for (int64_t i = 0; i < dim; ++i) dot += a[i] * b[i];
  const double sim = dot / (na * nb);
  for (int64_t i = 0; i < dim; ++i) out[i] += coeff * (b[i] / (na * nb) - sim * a[i] / (na * na));
}

}  // namespace

double cosine_similarity(const double* a, const double* b, int64_t dim) {
  const double na = norm_of(a, dim);
  const double nb = norm_of(b, dim);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm embedding");
  double dot = 0.0;
  for (int64_t i = 0; i < dim; ++i) dot += a[i] * b[i];
  return dot / (na * nb);
}

double equimod_pair_loss(const EmbeddingBundle& bundle, int64_t i, int64_t j, double tau_prime,
                         bool standard_denominator) {
  bundle.validate();
  const int64_t two_n = bundle.zq.dim(0);
  const int64_t dim = bundle.zq.dim(1);
  if (two_n < 4)
    throw std::invalid_argument("equimod loss: batch of 2N >= 4 views required (no negatives)");
  if (i < 0 || i >= two_n || j < 0 || j >= two_n || i == j)
    throw std::invalid_argument("equimod loss: bad pair indices");
  if (!(tau_prime > 0.0)) throw std::invalid_argument("equimod loss: tau' must be positive");

  const double* zi = &bundle.zq.at(i, 0);
  const double pos = cosine_similarity(zi, &bundle.zhat.at(i, 0), dim);
  double denom = standard_denominator ? std::exp(pos / tau_prime) : 0.0;
  for (int64_t k = 0; k < two_n; ++k) {
    if (k == i || k == j) continue;
    denom += std::exp(cosine_similarity(zi, &bundle.zq.at(k, 0), dim) / tau_prime);
  }
  return -(pos / tau_prime) + std::log(denom);
}

double equimod_loss(const EmbeddingBundle& bundle, double tau_prime,
                    bool standard_denominator) {
  const int64_t two_n = bundle.zq.dim(0);
  const int64_t n = two_n / 2;
  double acc = 0.0;
  for (int64_t i = 0; i < two_n; ++i)
    acc += equimod_pair_loss(bundle, i, partner_index(i, n), tau_prime, standard_denominator);
  return acc / static_cast<double>(two_n);
}

EquiLossGrads equimod_loss_grad(const EmbeddingBundle& bundle, double tau_prime,
                                bool standard_denominator) {
  bundle.validate();
  const int64_t two_n = bundle.zq.dim(0);
  const int64_t n = two_n / 2;
  const int64_t dim = bundle.zq.dim(1);
  if (two_n < 4)
    throw std::invalid_argument("equimod loss: batch of 2N >= 4 views required (no negatives)");

  EquiLossGrads g;
  g.d_zq = DTensor({two_n, dim});
  g.d_zhat = DTensor({two_n, dim});
  const double inv_count = 1.0 / static_cast<double>(two_n);

  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = partner_index(i, n);
    const double* zi = &bundle.zq.at(i, 0);
    const double pos = cosine_similarity(zi, &bundle.zhat.at(i, 0), dim);

    std::vector<double> neg(static_cast<size_t>(two_n), 0.0);
    double denom = standard_denominator ? std::exp(pos / tau_prime) : 0.0;
    for (int64_t k = 0; k < two_n; ++k) {
      if (k == i || k == j) continue;
      neg[static_cast<size_t>(k)] = cosine_similarity(zi, &bundle.zq.at(k, 0), dim);
      denom += std::exp(neg[static_cast<size_t>(k)] / tau_prime);
    }
    g.loss += (-(pos / tau_prime) + std::log(denom)) * inv_count;

    // d loss / d sim(z'_i, zhat_i)
    double dpos = -1.0 / tau_prime;
    if (standard_denominator) dpos += std::exp(pos / tau_prime) / denom / tau_prime;
    cosine_grad(zi, &bundle.zhat.at(i, 0), dim, dpos * inv_count, &g.d_zq.at(i, 0));
    cosine_grad(&bundle.zhat.at(i, 0), zi, dim, dpos * inv_count, &g.d_zhat.at(i, 0));

    for (int64_t k = 0; k < two_n; ++k) {
      if (k == i || k == j) continue;
      const double dneg =
          std::exp(neg[static_cast<size_t>(k)] / tau_prime) / denom / tau_prime * inv_count;
      cosine_grad(zi, &bundle.zq.at(k, 0), dim, dneg, &g.d_zq.at(i, 0));
      cosine_grad(&bundle.zq.at(k, 0), zi, dim, dneg, &g.d_zq.at(k, 0));
    }
  }
  return g;
}

double simclr_invariance_loss(const DTensor& z, double tau) {
  if (z.rank() != 2 || z.dim(0) % 2 != 0) throw std::invalid_argument("simclr loss: bad batch");
  const int64_t two_n = z.dim(0);
  const int64_t n = two_n / 2;
  const int64_t dim = z.dim(1);
  if (two_n < 4) throw std::invalid_argument("simclr loss: batch of 2N >= 4 views required");
  if (!(tau > 0.0)) throw std::invalid_argument("simclr loss: tau must be positive");

  double acc = 0.0;
  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = partner_index(i, n);
    const double* zi = &z.at(i, 0);
    const double pos = cosine_similarity(zi, &z.at(j, 0), dim);
    double denom = 0.0;
    for (int64_t k = 0; k < two_n; ++k) {
      if (k == i) continue;
      denom += std::exp(cosine_similarity(zi, &z.at(k, 0), dim) / tau);
    }
    acc += -(pos / tau) + std::log(denom);
  }
  return acc / static_cast<double>(two_n);
}

SimpleLossGrads simclr_invariance_loss_grad(const DTensor& z, double tau) {
  if (z.rank() != 2 || z.dim(0) % 2 != 0) throw std::invalid_argument("simclr loss: bad batch");
  const int64_t two_n = z.dim(0);
  const int64_t n = two_n / 2;
  const int64_t dim = z.dim(1);
  if (two_n < 4) throw std::invalid_argument("simclr loss: batch of 2N >= 4 views required");

  SimpleLossGrads g;
  g.d_input = DTensor({two_n, dim});
  const double inv_count = 1.0 / static_cast<double>(two_n);

  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = partner_index(i, n);
    const double* zi = &z.at(i, 0);

    std::vector<double> sims(static_cast<size_t>(two_n), 0.0);
    double denom = 0.0;
    for (int64_t k = 0; k < two_n; ++k) {
      if (k == i) continue;
      sims[static_cast<size_t>(k)] = cosine_similarity(zi, &z.at(k, 0), dim);
      denom += std::exp(sims[static_cast<size_t>(k)] / tau);
    }
    g.loss += (-(sims[static_cast<size_t>(j)] / tau) + std::log(denom)) * inv_count;

    for (int64_t k = 0; k < two_n; ++k) {
      if (k == i) continue;
      double d = std::exp(sims[static_cast<size_t>(k)] / tau) / denom / tau;
      if (k == j) d -= 1.0 / tau;
      d *= inv_count;
      cosine_grad(zi, &z.at(k, 0), dim, d, &g.d_input.at(i, 0));
      cosine_grad(&z.at(k, 0), zi, dim, d, &g.d_input.at(k, 0));
    }
  }
  return g;
}

double byol_invariance_loss(const DTensor& online_pred, const DTensor& target_proj) {
  if (online_pred.shape() != target_proj.shape() || online_pred.rank() != 2 ||
      online_pred.dim(0) % 2 != 0)
    throw std::invalid_argument("byol loss: mismatched batches");
  const int64_t two_n = online_pred.dim(0);
  const int64_t n = two_n / 2;
  const int64_t dim = online_pred.dim(1);
  double acc = 0.0;
  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = partner_index(i, n);
    acc += 2.0 - 2.0 * cosine_similarity(&online_pred.at(i, 0), &target_proj.at(j, 0), dim);
  }
  return acc / static_cast<double>(two_n);
}

SimpleLossGrads byol_invariance_loss_grad(const DTensor& online_pred,
                                          const DTensor& target_proj) {
  if (online_pred.shape() != target_proj.shape() || online_pred.rank() != 2 ||
      online_pred.dim(0) % 2 != 0)
    throw std::invalid_argument("byol loss: mismatched batches");
  const int64_t two_n = online_pred.dim(0);
  const int64_t n = two_n / 2;
  const int64_t dim = online_pred.dim(1);
  SimpleLossGrads g;
  g.d_input = DTensor({two_n, dim});
  const double inv_count = 1.0 / static_cast<double>(two_n);
  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = partner_index(i, n);
    g.loss += (2.0 - 2.0 * cosine_similarity(&online_pred.at(i, 0), &target_proj.at(j, 0), dim)) *
              inv_count;
    cosine_grad(&online_pred.at(i, 0), &target_proj.at(j, 0), dim, -2.0 * inv_count,
                &g.d_input.at(i, 0));
  }
  return g;
}

namespace {

// column standardization over the rows of one branch; throws on a constant
// column because the correlation is undefined there
void standardize_columns(const DTensor& x, DTensor& out, std::vector<double>& mean,
                         std::vector<double>& std) {
  const int64_t n = x.dim(0);
  const int64_t d = x.dim(1);
  mean.assign(static_cast<size_t>(d), 0.0);
  std.assign(static_cast<size_t>(d), 0.0);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) mean[static_cast<size_t>(c)] += x.at(r, c);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) {
      const double v = x.at(r, c) - mean[static_cast<size_t>(c)];
      std[static_cast<size_t>(c)] += v * v;
    }
  for (auto& s : std) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) throw std::invalid_argument("barlow loss: constant embedding dimension");
  }
  out = DTensor({n, d});
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c)
      out.at(r, c) = (x.at(r, c) - mean[static_cast<size_t>(c)]) / std[static_cast<size_t>(c)];
}

}  // namespace

double barlow_twins_loss(const DTensor& z, double lambda_bt) {
  return barlow_twins_loss_grad(z, lambda_bt).loss;
}

SimpleLossGrads barlow_twins_loss_grad(const DTensor& z, double lambda_bt) {
  if (z.rank() != 2 || z.dim(0) % 2 != 0 || z.dim(0) < 4)
    throw std::invalid_argument("barlow loss: bad batch");
  const int64_t n = z.dim(0) / 2;
  const int64_t d = z.dim(1);
  const DTensor a = z.rows(0, n);
  const DTensor b = z.rows(n, 2 * n);

  DTensor an, bn;
  std::vector<double> mean_a, std_a, mean_b, std_b;
  standardize_columns(a, an, mean_a, std_a);
  standardize_columns(b, bn, mean_b, std_b);

  // cross-correlation C = an^T bn / N
  DTensor c = core::matmul(an, true, bn, false);
  for (auto& v : c.vec()) v /= static_cast<double>(n);

  double loss = 0.0;
  DTensor dc({d, d});
  for (int64_t p = 0; p < d; ++p)
    for (int64_t q = 0; q < d; ++q) {
      if (p == q) {
        const double diff = 1.0 - c.at(p, q);
        loss += diff * diff;
        dc.at(p, q) = -2.0 * diff;
      } else {
        loss += lambda_bt * c.at(p, q) * c.at(p, q);
        dc.at(p, q) = 2.0 * lambda_bt * c.at(p, q);
      }
    }

  // through C into the standardized branches
  DTensor d_an = core::matmul(bn, false, dc, true);
  DTensor d_bn = core::matmul(an, false, dc, false);
  for (auto& v : d_an.vec()) v /= static_cast<double>(n);
  for (auto& v : d_bn.vec()) v /= static_cast<double>(n);

  // through the per-column standardization
  auto destandardize = [](const DTensor& xn, const DTensor& dxn, const std::vector<double>& stdv,
                          DTensor& dx) {
    const int64_t rows = xn.dim(0);
    const int64_t cols = xn.dim(1);
    dx = DTensor({rows, cols});
    for (int64_t cidx = 0; cidx < cols; ++cidx) {
      double g_mean = 0.0, gy_mean = 0.0;
      for (int64_t r = 0; r < rows; ++r) {
        g_mean += dxn.at(r, cidx);
        gy_mean += dxn.at(r, cidx) * xn.at(r, cidx);
      }
      g_mean /= static_cast<double>(rows);
      gy_mean /= static_cast<double>(rows);
      for (int64_t r = 0; r < rows; ++r)
        dx.at(r, cidx) = (dxn.at(r, cidx) - g_mean - xn.at(r, cidx) * gy_mean) /
                         stdv[static_cast<size_t>(cidx)];
    }
  };

  DTensor d_a, d_b;
  destandardize(an, d_an, std_a, d_a);
  destandardize(bn, d_bn, std_b, d_b);

  SimpleLossGrads g;
  g.loss = loss;
  g.d_input = DTensor({2 * n, d});
  for (int64_t r = 0; r < n; ++r)
    for (int64_t cidx = 0; cidx < d; ++cidx) {
      g.d_input.at(r, cidx) = d_a.at(r, cidx);
      g.d_input.at(r + n, cidx) = d_b.at(r, cidx);
    }
  return g;
}

double total_loss(double invariance, double equivariance, double lambda) {
  return invariance + lambda * equivariance;
}

}  // namespace equimod::objectives
