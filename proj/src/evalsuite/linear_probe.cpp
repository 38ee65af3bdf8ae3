#include "equimod/evalsuite/linear_probe.hpp"

#include <algorithm>
#include <cmath>

#include "equimod/core/rng.hpp"
#include "equimod/trainer/schedule.hpp"

namespace equimod::evalsuite {

using core::Rng;
using core::Tensor;

Tensor extract_features(networks::EquiModModel& model, const core::DataSource& data,
                        int batch_size) {
  const int res = model.config().encoder.resolution;
  const int64_t n = data.size();
  Tensor features({n, model.rep_width()});
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t end = std::min(n, start + static_cast<int64_t>(batch_size));
    Tensor batch({end - start, res, res, 3});
    for (int64_t i = start; i < end; ++i) {
      core::Image img = data.get(i);
      if (img.h != res || img.w != res) img = core::resize_shorter_center_crop(img, res);
      std::copy(img.px.begin(), img.px.end(), batch.data() + (i - start) * img.px.size());
    }
    const Tensor h = model.encode(batch, /*train=*/false);
    std::copy(h.data(), h.data() + h.numel(), features.data() + start * model.rep_width());
  }
  return features;
}

namespace {

double evaluate_topk(const Tensor& logits, const std::vector<int>& labels, int k) {
  const int64_t n = logits.dim(0);
  const int64_t c = logits.dim(1);
  int64_t hits = 0;
  std::vector<int> order(static_cast<size_t>(c));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < c; ++j) order[static_cast<size_t>(j)] = static_cast<int>(j);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return logits.at(i, a) > logits.at(i, b);
    });
    for (int j = 0; j < k; ++j)
      if (order[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

ProbeResult linear_probe_features(const Tensor& train_x, const std::vector<int>& train_y,
                                  const Tensor& test_x, const std::vector<int>& test_y,
                                  int num_classes, const ProbeProtocol& protocol, uint64_t seed) {
  if (train_x.dim(0) != static_cast<int64_t>(train_y.size()) ||
      test_x.dim(0) != static_cast<int64_t>(test_y.size()))
    throw std::invalid_argument("linear probe: feature/label count mismatch");
  for (int y : train_y)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("linear probe: label outside class range");
  for (int y : test_y)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("linear probe: label outside class range");

  const int64_t n = train_x.dim(0);
  const int64_t d = train_x.dim(1);
  const int64_t c = num_classes;

  Tensor w({c, d}), b({c});
  Tensor vw({c, d}), vb({c});

  trainer::ScheduleConfig schedule{protocol.lr, 0, 1};

  const int64_t batches_per_epoch = (n + protocol.batch_size - 1) / protocol.batch_size;
  const int64_t total_steps = batches_per_epoch * protocol.epochs;
  schedule.total_steps = std::max<int64_t>(total_steps, 1);

  int64_t step = 0;
  for (int epoch = 0; epoch < protocol.epochs; ++epoch) {
    Rng order_rng(Rng::derive(seed, {static_cast<uint64_t>(epoch) + 1}));
    auto order = order_rng.permutation(n);
    for (int64_t start = 0; start < n; start += protocol.batch_size) {
      const int64_t end = std::min(n, start + static_cast<int64_t>(protocol.batch_size));
      const int64_t bs = end - start;
      const double lr = trainer::cosine_lr(step, schedule);
      ++step;

      // logits = x w^T + b
      Tensor x({bs, d});
      std::vector<int> y(static_cast<size_t>(bs));
      for (int64_t i = 0; i < bs; ++i) {
        const int64_t src = order[static_cast<size_t>(start + i)];
        std::copy(train_x.data() + src * d, train_x.data() + (src + 1) * d, x.data() + i * d);
        y[static_cast<size_t>(i)] = train_y[static_cast<size_t>(src)];
      }
      Tensor logits = core::matmul(x, false, w, true);
      for (int64_t i = 0; i < bs; ++i)
        for (int64_t j = 0; j < c; ++j) logits.at(i, j) += b[j];

      // softmax cross-entropy gradient
      Tensor glogits({bs, c});
      for (int64_t i = 0; i < bs; ++i) {
        double mx = logits.at(i, 0);
        for (int64_t j = 1; j < c; ++j) mx = std::max<double>(mx, logits.at(i, j));
        double sum = 0;
        for (int64_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(logits.at(i, j)) - mx);
        for (int64_t j = 0; j < c; ++j) {
          const double p = std::exp(static_cast<double>(logits.at(i, j)) - mx) / sum;
          glogits.at(i, j) = static_cast<float>(
              (p - (j == y[static_cast<size_t>(i)] ? 1.0 : 0.0)) / static_cast<double>(bs));
        }
      }

      Tensor gw = core::matmul(glogits, true, x, false);
      Tensor gb({c});
      for (int64_t i = 0; i < bs; ++i)
        for (int64_t j = 0; j < c; ++j) gb[j] += glogits.at(i, j);

      // Nesterov momentum, no weight decay
      for (int64_t k = 0; k < w.numel(); ++k) {
        vw[k] = static_cast<float>(protocol.momentum * vw[k] + gw[k]);
        w[k] -= static_cast<float>(lr * (gw[k] + protocol.momentum * vw[k]));
      }
      for (int64_t k = 0; k < b.numel(); ++k) {
        vb[k] = static_cast<float>(protocol.momentum * vb[k] + gb[k]);
        b[k] -= static_cast<float>(lr * (gb[k] + protocol.momentum * vb[k]));
      }
    }
  }

  Tensor test_logits = core::matmul(test_x, false, w, true);
  for (int64_t i = 0; i < test_logits.dim(0); ++i)
    for (int64_t j = 0; j < c; ++j) test_logits.at(i, j) += b[j];

  ProbeResult r;
  r.top1 = evaluate_topk(test_logits, test_y, 1);
  r.top5 = evaluate_topk(test_logits, test_y, std::min<int>(5, num_classes));
  return r;
}

ProbeResult linear_probe(networks::EquiModModel& model, const core::DataSource& train,
                         const core::DataSource& test, const ProbeProtocol& protocol,
                         uint64_t seed) {
  if (train.num_classes() != test.num_classes())
    throw std::invalid_argument("linear probe: train/test class counts differ");
  const Tensor train_x = extract_features(model, train);
  const Tensor test_x = extract_features(model, test);
  std::vector<int> train_y(static_cast<size_t>(train.size()));
  std::vector<int> test_y(static_cast<size_t>(test.size()));
  for (int64_t i = 0; i < train.size(); ++i) train_y[static_cast<size_t>(i)] = train.label(i);
  for (int64_t i = 0; i < test.size(); ++i) test_y[static_cast<size_t>(i)] = test.label(i);
  return linear_probe_features(train_x, train_y, test_x, test_y, train.num_classes(), protocol,
                               seed);
}

}  // namespace equimod::evalsuite
