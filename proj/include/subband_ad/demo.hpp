// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/rng.hpp"
#include "subband_ad/tensor.hpp"
#include "subband_ad/wavelet.hpp"
#include "subband_ad/wdam.hpp"

namespace subband_ad {

enum class Band : int { LL = 0, LH = 1, HL = 2, HH = 3 };

inline Band band_from_string(const std::string& s) {
  if (s == "LL" || s == "ll") return Band::LL;
  if (s == "LH" || s == "lh") return Band::LH;
  if (s == "HL" || s == "hl") return Band::HL;
  if (s == "HH" || s == "hh") return Band::HH;
  throw value_error("unknown band '" + s + "', expected LL/LH/HL/HH");
}

inline std::string band_to_string(Band b) {
  static const char* names[4] = {"LL", "LH", "HL", "HH"};
  return names[int(b)];
}

/// Sign pattern of an anomaly patch that is pure in one band: every
/// 2x2-aligned block matches the band's analysis kernel up to sign.
inline int band_patch_sign(Band band, std::int64_t di, std::int64_t dj) {
  switch (band) {
    case Band::LL: return 1;
    case Band::LH: return dj % 2 == 0 ? 1 : -1;
    case Band::HL: return di % 2 == 0 ? 1 : -1;
    default: return (di + dj) % 2 == 0 ? 1 : -1;
  }
}

struct Sample {
  Tensor x;  // 1 x 32 x 32
  int label = 0;
};

struct SyntheticDataset {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
  Band band = Band::HH;
};

inline constexpr std::int64_t kDemoImage = 32;
inline constexpr std::int64_t kDemoPatch = 8;

/// Smooth low-order polynomial surface with small uniform noise.
inline Tensor make_base_surface(Rng& rng) {
  std::array<double, 6> a;
  for (auto& v : a) v = rng.uniform(-0.4, 0.4);
  Tensor t({1, kDemoImage, kDemoImage});
  for (std::int64_t i = 0; i < kDemoImage; ++i) {
    double v = 2.0 * double(i) / double(kDemoImage - 1) - 1.0;
    for (std::int64_t j = 0; j < kDemoImage; ++j) {
      double u = 2.0 * double(j) / double(kDemoImage - 1) - 1.0;
      double s = a[0] + a[1] * u + a[2] * v + a[3] * u * v + a[4] * u * u + a[5] * v * v;
      t.at(0, i, j) = float(s + rng.uniform(-0.02, 0.02));
    }
  }
  return t;
}

/// Adds an 8x8 band-pure patch (amplitude 0.5) at a 2x2-aligned position.
inline void add_band_patch(Tensor& t, Band band, std::int64_t row0, std::int64_t col0,
                           float amplitude = 0.5f) {
  for (std::int64_t di = 0; di < kDemoPatch; ++di)
    for (std::int64_t dj = 0; dj < kDemoPatch; ++dj)
      t.at(0, row0 + di, col0 + dj) += amplitude * float(band_patch_sign(band, di, dj));
}

/// Balanced two-class dataset: smooth surfaces vs. surfaces carrying one
/// band-pure patch at a uniformly drawn 2x2-aligned location.
inline SyntheticDataset make_subband_dataset(std::int64_t n_per_class, Band band,
                                             std::uint64_t seed) {
  if (n_per_class < 1) throw value_error("n_per_class must be >= 1");
  SyntheticDataset ds;
  ds.seed = seed;
  ds.band = band;
  Rng rng(seed);
  const std::int64_t slots = (kDemoImage - kDemoPatch) / 2 + 1;  // 2x2-aligned positions
  for (std::int64_t k = 0; k < n_per_class; ++k)
    ds.samples.push_back({make_base_surface(rng), 0});
  for (std::int64_t k = 0; k < n_per_class; ++k) {
    Tensor x = make_base_surface(rng);
    std::int64_t r0 = 2 * std::int64_t(rng.below(std::uint64_t(slots)));
    std::int64_t c0 = 2 * std::int64_t(rng.below(std::uint64_t(slots)));
    add_band_patch(x, band, r0, c0);
    ds.samples.push_back({std::move(x), 1});
  }
  return ds;
}

/// Tiny classifier: 3x3 conv (pad 1) to 8 channels -> WDAM residual block
/// -> global average pool -> linear head to 2 logits.
template <typename T>
struct DemoNetT {
  BasicTensor<T> conv_w;  // 8 x c_in x 3 x 3
  BasicTensor<T> conv_b;  // 8
  WdamParamsT<T> wdam;    // built for 8 channels
  BasicTensor<T> head_w;  // 2 x 8
  BasicTensor<T> head_b;  // 2

  static constexpr std::int64_t kChannels = 8;
  static constexpr std::int64_t kClasses = 2;

  std::int64_t input_channels() const { return conv_w.extent(1); }

  static DemoNetT init(std::int64_t c_in, std::uint64_t seed) {
    Rng rng(seed);
    DemoNetT net;
    net.conv_w = BasicTensor<T>({kChannels, c_in, 3, 3});
    net.conv_b = BasicTensor<T>({kChannels});
    double s = std::sqrt(6.0 / double(c_in * 9 + kChannels * 9));
    for (std::int64_t i = 0; i < net.conv_w.size(); ++i) net.conv_w[i] = T(rng.uniform(-s, s));
    net.wdam = WdamParamsT<T>::init(kChannels, WdamParamsT<T>::default_hidden(kChannels), rng);
    net.head_w = BasicTensor<T>({kClasses, kChannels});
    net.head_b = BasicTensor<T>({kClasses});
    double sh = std::sqrt(6.0 / double(kChannels + kClasses));
    for (std::int64_t i = 0; i < net.head_w.size(); ++i) net.head_w[i] = T(rng.uniform(-sh, sh));
    return net;
  }

  template <typename U>
  DemoNetT<U> cast() const {
    DemoNetT<U> q;
    q.conv_w = conv_w.template cast<U>();
    q.conv_b = conv_b.template cast<U>();
    q.wdam = wdam.template cast<U>();
    q.head_w = head_w.template cast<U>();
    q.head_b = head_b.template cast<U>();
    return q;
  }
};

using DemoNet = DemoNetT<float>;

namespace detail {

template <typename T>
BasicTensor<T> conv3x3_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                               const BasicTensor<T>& b) {
  const std::int64_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::int64_t cout = w.extent(0);
  BasicTensor<T> out({cout, h, wd});
  for (std::int64_t o = 0; o < cout; ++o)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < wd; ++j) {
        T acc = b[o];
        for (std::int64_t ci = 0; ci < cin; ++ci)
          for (std::int64_t di = -1; di <= 1; ++di) {
            std::int64_t ii = i + di;
            if (ii < 0 || ii >= h) continue;
            for (std::int64_t dj = -1; dj <= 1; ++dj) {
              std::int64_t jj = j + dj;
              if (jj < 0 || jj >= wd) continue;
              acc += w.at(o, ci, di + 1, dj + 1) * x.at(ci, ii, jj);
            }
          }
        out.at(o, i, j) = acc;
      }
  return out;
}

template <typename T>
void conv3x3_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                      BasicTensor<T>& grad_w, BasicTensor<T>& grad_b) {
  const std::int64_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::int64_t cout = grad_out.extent(0);
  for (std::int64_t o = 0; o < cout; ++o)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < wd; ++j) {
        const T g = grad_out.at(o, i, j);
        grad_b[o] += g;
        for (std::int64_t ci = 0; ci < cin; ++ci)
          for (std::int64_t di = -1; di <= 1; ++di) {
            std::int64_t ii = i + di;
            if (ii < 0 || ii >= h) continue;
            for (std::int64_t dj = -1; dj <= 1; ++dj) {
              std::int64_t jj = j + dj;
              if (jj < 0 || jj >= wd) continue;
              grad_w.at(o, ci, di + 1, dj + 1) += g * x.at(ci, ii, jj);
            }
          }
      }
}

}  // namespace detail

template <typename T>
struct DemoForwardTrace {
  BasicTensor<T> conv_out;
  WdamCacheT<T> wdam_cache;
  BasicTensor<T> pre_relu;   // conv_out + wdam output
  BasicTensor<T> block_out;  // relu(pre_relu)
  std::vector<T> pooled;     // global average per channel
  std::array<T, 2> logits{};
};

template <typename T>
DemoForwardTrace<T> demo_forward(const DemoNetT<T>& net, const BasicTensor<T>& x) {
  DemoForwardTrace<T> tr;
  tr.conv_out = detail::conv3x3_forward(x, net.conv_w, net.conv_b);
  auto [y, cache] = wdam_forward(tr.conv_out, net.wdam);
  tr.wdam_cache = std::move(cache);
  tr.pre_relu = tr.conv_out;
  for (std::int64_t i = 0; i < tr.pre_relu.size(); ++i) tr.pre_relu[i] += y[i];
  tr.block_out = tr.pre_relu;
  for (std::int64_t i = 0; i < tr.block_out.size(); ++i)
    if (tr.block_out[i] < T(0)) tr.block_out[i] = T(0);

  const std::int64_t ch = tr.block_out.extent(0);
  const std::int64_t plane = tr.block_out.extent(1) * tr.block_out.extent(2);
  tr.pooled.assign(static_cast<std::size_t>(ch), T(0));
  for (std::int64_t c = 0; c < ch; ++c) {
    const T* p = tr.block_out.data() + c * plane;
    double acc = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) acc += double(p[i]);
    tr.pooled[static_cast<std::size_t>(c)] = T(acc / double(plane));
  }
  for (std::int64_t k = 0; k < 2; ++k) {
    T acc = net.head_b[k];
    for (std::int64_t c = 0; c < ch; ++c) acc += net.head_w.at(k, c) * tr.pooled[static_cast<std::size_t>(c)];
    tr.logits[static_cast<std::size_t>(k)] = acc;
  }
  return tr;
}

template <typename T>
struct DemoGradsT {
  BasicTensor<T> conv_w, conv_b;
  BasicTensor<T> wdam_w1, wdam_b1, wdam_w2, wdam_b2;
  BasicTensor<T> head_w, head_b;

  static DemoGradsT zeros_like(const DemoNetT<T>& net) {
    DemoGradsT g;
    g.conv_w = BasicTensor<T>(net.conv_w.shape());
    g.conv_b = BasicTensor<T>(net.conv_b.shape());
    g.wdam_w1 = BasicTensor<T>(net.wdam.w1.shape());
    g.wdam_b1 = BasicTensor<T>(net.wdam.b1.shape());
    g.wdam_w2 = BasicTensor<T>(net.wdam.w2.shape());
    g.wdam_b2 = BasicTensor<T>(net.wdam.b2.shape());
    g.head_w = BasicTensor<T>(net.head_w.shape());
    g.head_b = BasicTensor<T>(net.head_b.shape());
    return g;
  }
};

/// Mean softmax cross-entropy over the batch; accumulates analytic
/// gradients into `grads` when given. Returns {loss, correct count}.
template <typename T>
std::pair<double, std::int64_t> demo_batch_loss(const DemoNetT<T>& net,
                                                const std::vector<const Sample*>& batch,
                                                DemoGradsT<T>* grads) {
  if (batch.empty()) throw value_error("empty batch");
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  const double inv_n = 1.0 / double(batch.size());

  for (const Sample* s : batch) {
    BasicTensor<T> x = s->x.template cast<T>();
    DemoForwardTrace<T> tr = demo_forward(net, x);

    // Stable softmax cross-entropy.
    double m = std::max(double(tr.logits[0]), double(tr.logits[1]));
    double e0 = std::exp(double(tr.logits[0]) - m);
    double e1 = std::exp(double(tr.logits[1]) - m);
    double z = e0 + e1;
    std::array<double, 2> prob{e0 / z, e1 / z};
    loss_sum += -std::log(std::max(prob[static_cast<std::size_t>(s->label)], 1e-300));
    int pred = tr.logits[1] > tr.logits[0] ? 1 : 0;
    if (pred == s->label) ++correct;
    if (!grads) continue;

    std::array<T, 2> dlogits;
    for (std::size_t k = 0; k < 2; ++k)
      dlogits[k] = T((prob[k] - (int(k) == s->label ? 1.0 : 0.0)) * inv_n);

    const std::int64_t ch = tr.block_out.extent(0);
    const std::int64_t plane = tr.block_out.extent(1) * tr.block_out.extent(2);
    std::vector<T> dpooled(static_cast<std::size_t>(ch), T(0));
    for (std::int64_t k = 0; k < 2; ++k) {
      grads->head_b[k] += dlogits[static_cast<std::size_t>(k)];
      for (std::int64_t c = 0; c < ch; ++c) {
        grads->head_w.at(k, c) += dlogits[static_cast<std::size_t>(k)] * tr.pooled[static_cast<std::size_t>(c)];
        dpooled[static_cast<std::size_t>(c)] += net.head_w.at(k, c) * dlogits[static_cast<std::size_t>(k)];
      }
    }

    // GAP spreads uniformly; ReLU gates on the pre-activation.
    BasicTensor<T> dpre(tr.pre_relu.shape());
    const T inv_plane = T(1) / T(plane);
    for (std::int64_t c = 0; c < ch; ++c) {
      const T g = dpooled[static_cast<std::size_t>(c)] * inv_plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        std::int64_t idx = c * plane + i;
        dpre[idx] = tr.pre_relu[idx] > T(0) ? g : T(0);
      }
    }

    // Residual: conv_out feeds both the identity path and the WDAM.
    WdamGradsT<T> wg = wdam_backward(tr.wdam_cache, dpre);
    for (std::int64_t i = 0; i < wg.w1.size(); ++i) grads->wdam_w1[i] += wg.w1[i];
    for (std::int64_t i = 0; i < wg.b1.size(); ++i) grads->wdam_b1[i] += wg.b1[i];
    for (std::int64_t i = 0; i < wg.w2.size(); ++i) grads->wdam_w2[i] += wg.w2[i];
    for (std::int64_t i = 0; i < wg.b2.size(); ++i) grads->wdam_b2[i] += wg.b2[i];

    BasicTensor<T> dconv = dpre;
    for (std::int64_t i = 0; i < dconv.size(); ++i) dconv[i] += wg.x[i];
    detail::conv3x3_backward(x, dconv, grads->conv_w, grads->conv_b);
  }
  return {loss_sum * inv_n, correct};
}

struct TrainHyper {
  int epochs = 30;
  double lr = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 0;  // shuffle order
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Plain SGD on softmax cross-entropy. Deterministic for a fixed dataset,
/// hyperparameters and seed. Throws on non-finite loss.
template <typename T>
std::vector<EpochStats> train(DemoNetT<T>& net, const SyntheticDataset& data,
                              const TrainHyper& hyper) {
  if (data.samples.empty()) throw value_error("train: empty dataset");
  if (hyper.batch_size < 1) throw value_error("train: batch_size must be >= 1");
  if (hyper.epochs < 0) throw value_error("train: epochs must be >= 0");

  Rng rng(hyper.seed);
  std::vector<std::size_t> order(data.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(hyper.epochs));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    // Fisher-Yates with the deterministic rng.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    double loss_acc = 0.0;
    std::int64_t correct = 0, batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(hyper.batch_size)) {
      std::vector<const Sample*> batch;
      for (std::size_t k = at; k < std::min(order.size(), at + static_cast<std::size_t>(hyper.batch_size)); ++k)
        batch.push_back(&data.samples[order[k]]);
      DemoGradsT<T> g = DemoGradsT<T>::zeros_like(net);
      auto [loss, corr] = demo_batch_loss(net, batch, &g);
      if (!std::isfinite(loss))
        throw error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batches) + "; try a smaller learning rate");
      loss_acc += loss;
      correct += corr;
      ++batches;
      const T lr = T(hyper.lr);
      auto step = [lr](BasicTensor<T>& param, const BasicTensor<T>& grad) {
        for (std::int64_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
      };
      step(net.conv_w, g.conv_w);
      step(net.conv_b, g.conv_b);
      step(net.wdam.w1, g.wdam_w1);
      step(net.wdam.b1, g.wdam_b1);
      step(net.wdam.w2, g.wdam_w2);
      step(net.wdam.b2, g.wdam_b2);
      step(net.head_w, g.head_w);
      step(net.head_b, g.head_b);
    }
    history.push_back({loss_acc / double(batches), double(correct) / double(order.size())});
  }
  return history;
}

struct EvalSummary {
  double accuracy = 0.0;
  std::array<double, 2> per_class_accuracy{0.0, 0.0};
  std::array<double, 4> mean_weights{0.0, 0.0, 0.0, 0.0};  // LL,LH,HL,HH
};

/// Deterministic metrics over a dataset, plus the mean attention weights
/// the WDAM assigns at its position in the network.
template <typename T>
EvalSummary evaluate(const DemoNetT<T>& net, const SyntheticDataset& data) {
  if (data.samples.empty()) throw value_error("evaluate: empty dataset");
  EvalSummary s;
  std::array<std::int64_t, 2> total{0, 0}, hit{0, 0};
  for (const Sample& sample : data.samples) {
    BasicTensor<T> x = sample.x.template cast<T>();
    DemoForwardTrace<T> tr = demo_forward(net, x);
    int pred = tr.logits[1] > tr.logits[0] ? 1 : 0;
    ++total[static_cast<std::size_t>(sample.label)];
    if (pred == sample.label) ++hit[static_cast<std::size_t>(sample.label)];
    for (std::size_t b = 0; b < 4; ++b) s.mean_weights[b] += double(tr.wdam_cache.a[b]);
  }
  const double n = double(data.samples.size());
  s.accuracy = double(hit[0] + hit[1]) / n;
  for (std::size_t k = 0; k < 2; ++k)
    s.per_class_accuracy[k] = total[k] ? double(hit[k]) / double(total[k]) : 0.0;
  for (std::size_t b = 0; b < 4; ++b) s.mean_weights[b] /= n;
  return s;
}

}  // namespace subband_ad
