#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "equimod/core/rng.hpp"
#include "equimod/objectives/losses.hpp"

using namespace equimod::objectives;
using equimod::core::DTensor;
using equimod::core::Rng;

namespace {

// ---- independent oracle: direct term-by-term evaluation of the losses ----
// kept free of the implementation's helpers on purpose

double oracle_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> row_of(const DTensor& t, int64_t r) {
  std::vector<double> v(static_cast<size_t>(t.dim(1)));
  for (int64_t c = 0; c < t.dim(1); ++c) v[static_cast<size_t>(c)] = t.at(r, c);
  return v;
}

double oracle_equimod_pair(const EmbeddingBundle& b, int64_t i, int64_t j, double tp) {
  const int64_t two_n = b.zq.dim(0);
  const double num = std::exp(oracle_cos(row_of(b.zq, i), row_of(b.zhat, i)) / tp);
  double den = 0;
  for (int64_t k = 0; k < two_n; ++k)
    if (k != i && k != j) den += std::exp(oracle_cos(row_of(b.zq, i), row_of(b.zq, k)) / tp);
  return -std::log(num / den);
}

double oracle_equimod(const EmbeddingBundle& b, double tp) {
  const int64_t two_n = b.zq.dim(0);
  const int64_t n = two_n / 2;
  double acc = 0;
  for (int64_t i = 0; i < two_n; ++i)
    acc += oracle_equimod_pair(b, i, i < n ? i + n : i - n, tp);
  return acc / static_cast<double>(two_n);
}

double oracle_simclr(const DTensor& z, double tau) {
  const int64_t two_n = z.dim(0);
  const int64_t n = two_n / 2;
  double acc = 0;
  for (int64_t i = 0; i < two_n; ++i) {
    const int64_t j = i < n ? i + n : i - n;
    const double num = std::exp(oracle_cos(row_of(z, i), row_of(z, j)) / tau);
    double den = 0;
    for (int64_t k = 0; k < two_n; ++k)
      if (k != i) den += std::exp(oracle_cos(row_of(z, i), row_of(z, k)) / tau);
    acc += -std::log(num / den);
  }
  return acc / static_cast<double>(two_n);
}

DTensor random_rows(int64_t rows, int64_t dim, Rng& rng) {
  DTensor t({rows, dim});
  for (auto& v : t.vec()) v = rng.normal(0.0, 1.0);
  return t;
}

EmbeddingBundle random_bundle(int64_t n, int64_t dim, Rng& rng) {
  EmbeddingBundle b;
  b.z = random_rows(2 * n, dim, rng);
  b.zq = random_rows(2 * n, dim, rng);
  b.zo = random_rows(n, dim, rng);
  b.zhat = random_rows(2 * n, dim, rng);
  return b;
}

// central finite differences over every element of `x`
void check_grad_fd(DTensor& x, const DTensor& analytic, const std::function<double()>& eval,
                   double step = 1e-3, double tol = 1e-4) {
  double max_rel = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = eval();
    x[i] = orig - step;
    const double down = eval();
    x[i] = orig;
    const double fd = (up - down) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    max_rel = std::max(max_rel, std::abs(fd - analytic[i]) / denom);
  }
  CHECK(max_rel < tol);
}

}  // namespace

TEST_CASE("equimod pair loss: unit positive with orthogonal negatives") {
  // pair (0, 2), N=2; positive similarity 1, both negatives orthogonal
  EmbeddingBundle b;
  b.zq = DTensor({4, 4});
  b.zq.at(0, 0) = 1.0;
  b.zq.at(1, 1) = 1.0;
  b.zq.at(2, 0) = 0.5;  // partner, excluded from the denominator
  b.zq.at(2, 1) = 0.5;
  b.zq.at(3, 2) = 1.0;
  b.zhat = DTensor({4, 4});
  b.zhat.at(0, 0) = 2.0;  // same direction as zq row 0
  b.zhat.at(1, 0) = 1.0;
  b.zhat.at(2, 0) = 1.0;
  b.zhat.at(3, 0) = 1.0;
  b.zo = DTensor({2, 4});
  b.zo.fill(1.0);

  const double loss = equimod_pair_loss(b, 0, 2, 1.0);
  CHECK(loss == doctest::Approx(std::log(2.0) - 1.0).epsilon(1e-9));  // ~ -0.30685
  CHECK(loss < 0.0);  // the positive is absent from the denominator
}

TEST_CASE("equimod pair loss: all similarities zero") {
  EmbeddingBundle b;
  b.zq = DTensor({4, 4});
  b.zq.at(0, 0) = 1.0;
  b.zq.at(1, 1) = 1.0;
  b.zq.at(2, 3) = 1.0;
  b.zq.at(3, 2) = 1.0;
  b.zhat = DTensor({4, 4});
  for (int64_t r = 0; r < 4; ++r) b.zhat.at(r, 1) = 1.0;
  b.zhat.at(1, 1) = 0.0;
  b.zhat.at(1, 0) = 1.0;
  b.zo = DTensor({2, 4});
  b.zo.fill(1.0);

  CHECK(equimod_pair_loss(b, 0, 2, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("equimod loss matches the term-by-term oracle on random bundles") {
  Rng rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(0, 4));
    const int64_t dim = 3 + static_cast<int64_t>(rng.uniform_int(0, 13));
    const auto b = random_bundle(n, dim, rng);
    const double tp = 0.2;
    CHECK(equimod_loss(b, tp) == doctest::Approx(oracle_equimod(b, tp)).epsilon(1e-9));
    for (int64_t i = 0; i < 2 * n; ++i) {
      const int64_t j = i < n ? i + n : i - n;
      CHECK(equimod_pair_loss(b, i, j, tp) ==
            doctest::Approx(oracle_equimod_pair(b, i, j, tp)).epsilon(1e-9));
    }
  }
}

TEST_CASE("equimod loss: constant pair losses average to the constant") {
  Rng rng(7);
  const auto b = random_bundle(3, 8, rng);
  const double tp = 0.5;
  double mean = 0;
  for (int64_t i = 0; i < 6; ++i) mean += equimod_pair_loss(b, i, i < 3 ? i + 3 : i - 3, tp);
  mean /= 6.0;
  CHECK(equimod_loss(b, tp) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("equimod loss: invariant to consistent image permutation") {
  Rng rng(11);
  const int64_t n = 5, dim = 16;
  const auto b = random_bundle(n, dim, rng);
  const double base = equimod_loss(b, 0.2);

  const auto perm = [&] {
    Rng r2(99);
    return r2.permutation(n);
  }();
  EmbeddingBundle p;
  p.z = DTensor({2 * n, dim});
  p.zq = DTensor({2 * n, dim});
  p.zhat = DTensor({2 * n, dim});
  p.zo = DTensor({n, dim});
  for (int64_t i = 0; i < n; ++i) {
    const int64_t s = perm[static_cast<size_t>(i)];
    for (int64_t c = 0; c < dim; ++c) {
      p.z.at(i, c) = b.z.at(s, c);
      p.z.at(i + n, c) = b.z.at(s + n, c);
      p.zq.at(i, c) = b.zq.at(s, c);
      p.zq.at(i + n, c) = b.zq.at(s + n, c);
      p.zhat.at(i, c) = b.zhat.at(s, c);
      p.zhat.at(i + n, c) = b.zhat.at(s + n, c);
      p.zo.at(i, c) = b.zo.at(s, c);
    }
  }
  CHECK(equimod_loss(p, 0.2) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("equimod loss: invariant to positive rescaling of any embedding") {
  Rng rng(13);
  auto b = random_bundle(3, 8, rng);
  const double base = equimod_loss(b, 0.3);
  for (int64_t c = 0; c < 8; ++c) b.zq.at(2, c) *= 7.5;
  for (int64_t c = 0; c < 8; ++c) b.zhat.at(4, c) *= 0.03;
  CHECK(equimod_loss(b, 0.3) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("equimod loss: monotone in the positive similarity") {
  // anchor 0 with fixed negatives; move zhat_0 from orthogonal toward zq_0
  EmbeddingBundle b;
  b.zq = DTensor({4, 3});
  b.zq.at(0, 0) = 1.0;
  b.zq.at(1, 0) = 0.3;
  b.zq.at(1, 1) = 1.0;
  b.zq.at(2, 2) = 1.0;
  b.zq.at(3, 0) = -0.2;
  b.zq.at(3, 1) = 0.4;
  b.zq.at(3, 2) = 1.0;
  b.zhat = DTensor({4, 3});
  b.zhat.fill(0.1);
  b.zo = DTensor({2, 3});
  b.zo.fill(1.0);

  double prev = 1e300;
  for (double angle : {1.5, 1.0, 0.5, 0.1, 0.0}) {
    b.zhat.at(0, 0) = std::cos(angle);
    b.zhat.at(0, 1) = std::sin(angle);
    b.zhat.at(0, 2) = 0.0;
    const double loss = equimod_pair_loss(b, 0, 2, 0.2);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("equimod loss: lower temperature sharpens a well-separated positive") {
  Rng rng(17);
  auto b = random_bundle(3, 6, rng);
  // make the positive clearly more similar than all negatives for anchor 0
  for (int64_t c = 0; c < 6; ++c) b.zhat.at(0, c) = b.zq.at(0, c) * 1.7;
  const double sharp = equimod_pair_loss(b, 0, 3, 0.1);
  const double smooth = equimod_pair_loss(b, 0, 3, 1.0);
  CHECK(sharp <= smooth);
}

TEST_CASE("equimod loss: too-small batches and zero norms rejected") {
  Rng rng(19);
  auto small = random_bundle(1, 4, rng);
  CHECK_THROWS_AS(equimod_loss(small, 0.2), std::invalid_argument);

  auto b = random_bundle(2, 4, rng);
  for (int64_t c = 0; c < 4; ++c) b.zq.at(1, c) = 0.0;
  CHECK_THROWS_AS(equimod_loss(b, 0.2), std::invalid_argument);
}

TEST_CASE("equimod standard-denominator variant includes the positive") {
  Rng rng(23);
  const auto b = random_bundle(2, 5, rng);
  const double verbatim = equimod_pair_loss(b, 0, 2, 0.4, false);
  const double standard = equimod_pair_loss(b, 0, 2, 0.4, true);
  // adding the positive to the denominator can only increase the loss
  CHECK(standard > verbatim);
  CHECK(standard > 0.0);
}

TEST_CASE("simclr loss: symmetric all-zero-similarity case") {
  DTensor z({4, 4});
  z.at(0, 0) = 1.0;
  z.at(1, 1) = 1.0;
  z.at(2, 2) = 1.0;
  z.at(3, 3) = 1.0;
  CHECK(simclr_invariance_loss(z, 1.0) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("simclr loss: identical positives and orthogonal negatives") {
  DTensor z({4, 2});
  z.at(0, 0) = 1.0;
  z.at(2, 0) = 1.0;  // pair of image 0
  z.at(1, 1) = 1.0;
  z.at(3, 1) = 1.0;  // pair of image 1
  const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  CHECK(simclr_invariance_loss(z, 1.0) == doctest::Approx(want).epsilon(1e-9));  // ~0.55144
}

TEST_CASE("simclr loss matches the oracle on random batches") {
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(0, 4));
    const int64_t dim = 3 + static_cast<int64_t>(rng.uniform_int(0, 13));
    const auto z = random_rows(2 * n, dim, rng);
    CHECK(simclr_invariance_loss(z, 0.5) == doctest::Approx(oracle_simclr(z, 0.5)).epsilon(1e-9));
  }
}

TEST_CASE("byol loss: aligned and antipodal predictions") {
  DTensor target({4, 3});
  Rng rng(37);
  for (auto& v : target.vec()) v = rng.normal(0, 1);

  DTensor aligned({4, 3});
  for (int64_t i = 0; i < 4; ++i) {
    const int64_t j = i < 2 ? i + 2 : i - 2;
    for (int64_t c = 0; c < 3; ++c) aligned.at(i, c) = 3.0 * target.at(j, c);
  }
  CHECK(byol_invariance_loss(aligned, target) == doctest::Approx(0.0).epsilon(1e-12));

  DTensor opposite = aligned;
  for (auto& v : opposite.vec()) v = -v;
  CHECK(byol_invariance_loss(opposite, target) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("barlow loss: identity cross-correlation gives zero loss") {
  // columns standardized and mutually uncorrelated
  DTensor z({8, 2});
  const double col0[4] = {1, 1, -1, -1};
  const double col1[4] = {1, -1, 1, -1};
  for (int64_t r = 0; r < 4; ++r) {
    z.at(r, 0) = col0[r];
    z.at(r, 1) = col1[r];
    z.at(r + 4, 0) = col0[r];  // second branch identical
    z.at(r + 4, 1) = col1[r];
  }
  CHECK(barlow_twins_loss(z, 0.005) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total loss arithmetic") {
  CHECK(total_loss(1.0, 0.5, 1.0) == doctest::Approx(1.5));
  CHECK(total_loss(1.0, 0.5, 0.0) == doctest::Approx(1.0));
  CHECK(total_loss(0.7, -0.3, 2.0) == doctest::Approx(0.1));
}

TEST_CASE("gradients: equimod loss matches finite differences") {
  Rng rng(41);
  auto b = random_bundle(3, 8, rng);
  const double tp = 0.2;
  for (bool std_denom : {false, true}) {
    const auto g = equimod_loss_grad(b, tp, std_denom);
    CHECK(g.loss == doctest::Approx(equimod_loss(b, tp, std_denom)).epsilon(1e-12));
    check_grad_fd(b.zq, g.d_zq, [&] { return equimod_loss(b, tp, std_denom); });
    check_grad_fd(b.zhat, g.d_zhat, [&] { return equimod_loss(b, tp, std_denom); });
  }
}

TEST_CASE("gradients: simclr loss matches finite differences") {
  Rng rng(43);
  auto z = random_rows(6, 8, rng);
  const auto g = simclr_invariance_loss_grad(z, 0.5);
  CHECK(g.loss == doctest::Approx(simclr_invariance_loss(z, 0.5)).epsilon(1e-12));
  check_grad_fd(z, g.d_input, [&] { return simclr_invariance_loss(z, 0.5); });
}

TEST_CASE("gradients: byol loss matches finite differences") {
  Rng rng(47);
  auto pred = random_rows(6, 8, rng);
  const auto target = random_rows(6, 8, rng);
  const auto g = byol_invariance_loss_grad(pred, target);
  CHECK(g.loss == doctest::Approx(byol_invariance_loss(pred, target)).epsilon(1e-12));
  check_grad_fd(pred, g.d_input, [&] { return byol_invariance_loss(pred, target); });
}

TEST_CASE("gradients: barlow loss matches finite differences") {
  Rng rng(53);
  auto z = random_rows(8, 6, rng);
  const auto g = barlow_twins_loss_grad(z, 0.005);
  CHECK(g.loss == doctest::Approx(barlow_twins_loss(z, 0.005)).epsilon(1e-12));
  check_grad_fd(z, g.d_input, [&] { return barlow_twins_loss(z, 0.005); });
}
