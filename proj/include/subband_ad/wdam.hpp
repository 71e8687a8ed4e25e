// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/rng.hpp"
#include "subband_ad/tensor.hpp"
#include "subband_ad/wavelet.hpp"

namespace subband_ad {

/// Shared two-layer MLP producing the four sub-band attention logits.
/// Applied to both pooled branches: a = sigmoid(mlp(avg) + mlp(max)),
/// mlp(v) = w2 * relu(w1 * v + b1) + b2.
template <typename T>
struct WdamParamsT {
  std::int64_t c = 0;       // channel count the module was built for
  std::int64_t hidden = 0;  // MLP hidden width
  BasicTensor<T> w1;        // hidden x 4c
  BasicTensor<T> b1;        // hidden
  BasicTensor<T> w2;        // 4 x hidden
  BasicTensor<T> b2;        // 4

  static std::int64_t default_hidden(std::int64_t c) {
    // Reduction ratio 4 on the 4c pooled vector.
    return std::max<std::int64_t>(4, c);
  }

  static WdamParamsT zeros(std::int64_t c, std::int64_t hidden) {
    if (c < 1) throw value_error("channel count must be >= 1");
    if (hidden < 4) throw value_error("hidden width must be >= 4");
    WdamParamsT p;
    p.c = c;
    p.hidden = hidden;
    p.w1 = BasicTensor<T>({hidden, 4 * c});
    p.b1 = BasicTensor<T>({hidden});
    p.w2 = BasicTensor<T>({4, hidden});
    p.b2 = BasicTensor<T>({4});
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static WdamParamsT init(std::int64_t c, std::int64_t hidden, Rng& rng) {
    WdamParamsT p = zeros(c, hidden);
    auto fill = [&rng](BasicTensor<T>& w, std::int64_t fan_in, std::int64_t fan_out) {
      double s = std::sqrt(6.0 / double(fan_in + fan_out));
      for (std::int64_t i = 0; i < w.size(); ++i) w[i] = T(rng.uniform(-s, s));
    };
    fill(p.w1, 4 * c, hidden);
    fill(p.w2, hidden, 4);
    return p;
  }

  void check(std::int64_t expect_c = -1) const {
    if (expect_c >= 0 && c != expect_c)
      throw value_error("WDAM built for c=" + std::to_string(c) + ", input has c=" +
                        std::to_string(expect_c));
    if (hidden < 4) throw value_error("hidden width must be >= 4");
    if (w1.shape() != std::vector<std::int64_t>{hidden, 4 * c} ||
        b1.shape() != std::vector<std::int64_t>{hidden} ||
        w2.shape() != std::vector<std::int64_t>{4, hidden} ||
        b2.shape() != std::vector<std::int64_t>{4})
      throw value_error("WDAM parameter shapes inconsistent with c/hidden");
  }

  template <typename U>
  WdamParamsT<U> cast() const {
    WdamParamsT<U> q;
    q.c = c;
    q.hidden = hidden;
    q.w1 = w1.template cast<U>();
    q.b1 = b1.template cast<U>();
    q.w2 = w2.template cast<U>();
    q.b2 = b2.template cast<U>();
    return q;
  }
};

using WdamParams = WdamParamsT<float>;

/// Four scalar weights in (LL, LH, HL, HH) order, each in [0, 1].
template <typename T>
struct AttentionWeightsT {
  std::array<T, 4> a{T(0), T(0), T(0), T(0)};
};

using AttentionWeights = AttentionWeightsT<float>;

template <typename T>
struct PoolResultT {
  std::vector<T> avg;               // 4c spatial means
  std::vector<T> max;               // 4c spatial maxima
  std::vector<std::int64_t> argmax; // row-major plane index per channel, first on ties
};

/// Spatial average and maximum per channel of the stacked sub-band tensor.
/// Argmax positions are recorded for the backward pass; ties resolve to the
/// first index in row-major scan order.
template <typename T>
PoolResultT<T> pool_subbands(const BasicTensor<T>& xw) {
  if (xw.rank() != 3) throw value_error("pool_subbands expects 4CxH'xW', got " + xw.shape_str());
  const std::int64_t c = xw.extent(0);
  const std::int64_t plane = xw.extent(1) * xw.extent(2);
  PoolResultT<T> r;
  r.avg.resize(static_cast<std::size_t>(c));
  r.max.resize(static_cast<std::size_t>(c));
  r.argmax.resize(static_cast<std::size_t>(c));
  for (std::int64_t q = 0; q < c; ++q) {
    const T* p = xw.data() + q * plane;
    double sum = 0.0;
    T best = p[0];
    std::int64_t best_at = 0;
    for (std::int64_t i = 0; i < plane; ++i) {
      sum += double(p[i]);
      if (p[i] > best) {
        best = p[i];
        best_at = i;
      }
    }
    r.avg[static_cast<std::size_t>(q)] = T(sum / double(plane));
    r.max[static_cast<std::size_t>(q)] = best;
    r.argmax[static_cast<std::size_t>(q)] = best_at;
  }
  return r;
}

namespace detail {

template <typename T>
struct MlpTrace {
  std::vector<T> z1;  // w1*v + b1
  std::vector<T> h;   // relu(z1)
  std::array<T, 4> out{};
};

template <typename T>
MlpTrace<T> mlp_forward(const std::vector<T>& v, const WdamParamsT<T>& p) {
  if (static_cast<std::int64_t>(v.size()) != 4 * p.c)
    throw value_error("pooled vector length " + std::to_string(v.size()) +
                      " does not match 4c = " + std::to_string(4 * p.c));
  MlpTrace<T> t;
  t.z1.resize(static_cast<std::size_t>(p.hidden));
  t.h.resize(static_cast<std::size_t>(p.hidden));
  for (std::int64_t i = 0; i < p.hidden; ++i) {
    T acc = p.b1[i];
    const T* row = p.w1.data() + i * 4 * p.c;
    for (std::int64_t k = 0; k < 4 * p.c; ++k) acc += row[k] * v[static_cast<std::size_t>(k)];
    t.z1[static_cast<std::size_t>(i)] = acc;
    t.h[static_cast<std::size_t>(i)] = acc > T(0) ? acc : T(0);
  }
  for (int o = 0; o < 4; ++o) {
    T acc = p.b2[o];
    const T* row = p.w2.data() + o * p.hidden;
    for (std::int64_t i = 0; i < p.hidden; ++i) acc += row[i] * t.h[static_cast<std::size_t>(i)];
    t.out[static_cast<std::size_t>(o)] = acc;
  }
  return t;
}

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

}  // namespace detail

/// Everything the backward pass needs from a forward call.
template <typename T>
struct WdamCacheT {
  WdamParamsT<T> params;
  BasicTensor<T> x;
  BasicSubBands<T> bands;  // unweighted
  PoolResultT<T> pooled;
  detail::MlpTrace<T> mlp_avg, mlp_max;
  std::array<T, 4> u{};  // pre-sigmoid logits
  std::array<T, 4> a{};  // attention weights
};

using WdamCache = WdamCacheT<float>;

/// a = sigmoid(mlp(avg) + mlp(max)), shared parameters for both branches.
template <typename T>
AttentionWeightsT<T> attention_weights(const std::vector<T>& avg, const std::vector<T>& max,
                                       const WdamParamsT<T>& p) {
  auto ta = detail::mlp_forward(avg, p);
  auto tm = detail::mlp_forward(max, p);
  AttentionWeightsT<T> w;
  for (std::size_t o = 0; o < 4; ++o) w.a[o] = detail::sigmoid(ta.out[o] + tm.out[o]);
  return w;
}

/// Scales each band by its scalar weight (broadcast over the whole
/// C x H' x W' block).
template <typename T>
BasicSubBands<T> apply_subband_weights(const BasicSubBands<T>& s,
                                       const AttentionWeightsT<T>& w) {
  BasicSubBands<T> out;
  out.source_shape = s.source_shape;
  for (int b = 0; b < 4; ++b) {
    out.band(b) = s.band(b);
    T* p = out.band(b).data();
    const T scale = w.a[static_cast<std::size_t>(b)];
    for (std::int64_t i = 0; i < out.band(b).size(); ++i) p[i] *= scale;
  }
  return out;
}

/// Full WDAM forward: DWT -> dual pooling -> shared MLP -> sigmoid weights ->
/// band-wise scaling -> IDWT. Output shape equals input shape.
template <typename T>
std::pair<BasicTensor<T>, WdamCacheT<T>> wdam_forward(const BasicTensor<T>& x,
                                                      const WdamParamsT<T>& p) {
  if (x.rank() != 3) throw value_error("wdam_forward expects CxHxW, got " + x.shape_str());
  p.check(x.extent(0));
  WdamCacheT<T> cache;
  cache.params = p;
  cache.x = x;
  cache.bands = haar_dwt(x);
  BasicTensor<T> stacked = stack_subbands(cache.bands);
  cache.pooled = pool_subbands(stacked);
  cache.mlp_avg = detail::mlp_forward(cache.pooled.avg, p);
  cache.mlp_max = detail::mlp_forward(cache.pooled.max, p);
  for (std::size_t o = 0; o < 4; ++o) {
    cache.u[o] = cache.mlp_avg.out[o] + cache.mlp_max.out[o];
    cache.a[o] = detail::sigmoid(cache.u[o]);
  }
  AttentionWeightsT<T> w;
  w.a = cache.a;
  BasicTensor<T> y = haar_idwt(apply_subband_weights(cache.bands, w));
  return {std::move(y), std::move(cache)};
}

/// Residual block: relu(x + wdam_forward(x).y).
template <typename T>
BasicTensor<T> wdam_block(const BasicTensor<T>& x, const WdamParamsT<T>& p) {
  BasicTensor<T> y = wdam_forward(x, p).first;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    T v = x[i] + y[i];
    y[i] = v > T(0) ? v : T(0);
  }
  return y;
}

template <typename T>
struct WdamGradsT {
  BasicTensor<T> x;   // gradient w.r.t. the input
  BasicTensor<T> w1, b1, w2, b2;
};

using WdamGrads = WdamGradsT<float>;

/// Analytic vector-Jacobian product of wdam_forward. The IDWT adjoint is the
/// DWT (orthonormal kernels) and vice versa; average pooling distributes
/// uniformly; max pooling routes to the recorded argmax.
template <typename T>
WdamGradsT<T> wdam_backward(const WdamCacheT<T>& cache, const BasicTensor<T>& grad_y) {
  const WdamParamsT<T>& p = cache.params;
  if (cache.bands.ll.empty()) throw value_error("wdam_backward: cache not from a forward call");
  if (grad_y.shape() != cache.x.shape())
    throw value_error("wdam_backward: grad_y shape " + grad_y.shape_str() +
                      " does not match forward input " + cache.x.shape_str());

  const std::int64_t c4 = 4 * p.c;
  const std::int64_t plane = cache.bands.ll.extent(1) * cache.bands.ll.extent(2);

  // y = idwt(weighted bands): adjoint is the forward DWT.
  BasicSubBands<T> gw = haar_dwt(grad_y);

  // Weighted multiply: grad w.r.t. the weights and the unweighted bands.
  std::array<T, 4> grad_a{};
  BasicTensor<T> grad_stacked({c4, cache.bands.ll.extent(1), cache.bands.ll.extent(2)});
  for (std::size_t b = 0; b < 4; ++b) {
    const BasicTensor<T>& gband = gw.band(int(b));
    const BasicTensor<T>& sband = cache.bands.band(int(b));
    double acc = 0.0;
    T* dst = grad_stacked.data() + std::int64_t(b) * p.c * plane;
    const T scale = cache.a[b];
    for (std::int64_t i = 0; i < gband.size(); ++i) {
      acc += double(gband[i]) * double(sband[i]);
      dst[i] = scale * gband[i];
    }
    grad_a[b] = T(acc);
  }

  // Sigmoid.
  std::array<T, 4> grad_u{};
  for (std::size_t o = 0; o < 4; ++o) {
    T a = cache.a[o];
    grad_u[o] = grad_a[o] * a * (T(1) - a);
  }

  WdamGradsT<T> g;
  g.w1 = BasicTensor<T>({p.hidden, c4});
  g.b1 = BasicTensor<T>({p.hidden});
  g.w2 = BasicTensor<T>({4, p.hidden});
  g.b2 = BasicTensor<T>({4});

  // Output layer, summed over both branches (shared parameters).
  const std::size_t hidden = static_cast<std::size_t>(p.hidden);
  std::vector<T> grad_h_avg(hidden, T(0));
  std::vector<T> grad_h_max(hidden, T(0));
  for (std::size_t o = 0; o < 4; ++o) {
    const T gu = grad_u[o];
    g.b2[std::int64_t(o)] = T(2) * gu;  // b2 contributes to both branch outputs
    T* wrow = g.w2.data() + std::int64_t(o) * p.hidden;
    const T* w2row = p.w2.data() + std::int64_t(o) * p.hidden;
    for (std::size_t i = 0; i < hidden; ++i) {
      wrow[i] = gu * (cache.mlp_avg.h[i] + cache.mlp_max.h[i]);
      grad_h_avg[i] += w2row[i] * gu;
      grad_h_max[i] += w2row[i] * gu;
    }
  }

  // Hidden layer.
  std::vector<T> grad_z1_avg(hidden);
  std::vector<T> grad_z1_max(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    grad_z1_avg[i] = cache.mlp_avg.z1[i] > T(0) ? grad_h_avg[i] : T(0);
    grad_z1_max[i] = cache.mlp_max.z1[i] > T(0) ? grad_h_max[i] : T(0);
  }
  std::vector<T> grad_avg(static_cast<std::size_t>(c4), T(0));
  std::vector<T> grad_max(static_cast<std::size_t>(c4), T(0));
  for (std::size_t i = 0; i < hidden; ++i) {
    const T ga = grad_z1_avg[i];
    const T gm = grad_z1_max[i];
    g.b1[std::int64_t(i)] = ga + gm;
    const T* w1row = p.w1.data() + std::int64_t(i) * c4;
    T* gw1row = g.w1.data() + std::int64_t(i) * c4;
    for (std::size_t k = 0; k < static_cast<std::size_t>(c4); ++k) {
      gw1row[k] = ga * cache.pooled.avg[k] + gm * cache.pooled.max[k];
      grad_avg[k] += w1row[k] * ga;
      grad_max[k] += w1row[k] * gm;
    }
  }

  // Pooling backward onto the stacked (unweighted) bands.
  const T inv_plane = T(1) / T(plane);
  for (std::size_t q = 0; q < static_cast<std::size_t>(c4); ++q) {
    T* dst = grad_stacked.data() + std::int64_t(q) * plane;
    const T ga = grad_avg[q] * inv_plane;
    for (std::int64_t i = 0; i < plane; ++i) dst[i] += ga;
    dst[cache.pooled.argmax[q]] += grad_max[q];
  }

  // bands = dwt(x): adjoint is the IDWT.
  g.x = haar_idwt(unstack_subbands(grad_stacked, cache.bands.source_shape));
  return g;
}

struct GradCheckStats {
  std::int64_t checked = 0;
  std::int64_t skipped_ties = 0;
};

/// Central-difference verification of wdam_backward under a fixed random
/// cotangent. Returns max over all input and parameter coordinates of
/// |analytic - numeric| / max(1, |analytic|, |numeric|). Coordinates whose
/// perturbation flips a max-pool argmax are non-differentiable points and
/// are excluded (counted in stats).
inline double grad_check(const WdamParamsT<double>& p, const BasicTensor<double>& x,
                         double epsilon, GradCheckStats* stats = nullptr) {
  if (!(epsilon > 0.0)) throw value_error("grad_check: invalid step, epsilon must be > 0");
  auto [y, cache] = wdam_forward(x, p);
  Rng rng(0x5eedc0de);
  BasicTensor<double> cot(y.shape());
  for (std::int64_t i = 0; i < cot.size(); ++i) cot[i] = rng.uniform(-1.0, 1.0);
  WdamGradsT<double> analytic = wdam_backward(cache, cot);

  auto objective = [&cot](const BasicTensor<double>& yv) {
    double s = 0.0;
    for (std::int64_t i = 0; i < yv.size(); ++i) s += cot[i] * yv[i];
    return s;
  };

  GradCheckStats local;
  double max_rel = 0.0;
  auto probe = [&](BasicTensor<double>& storage, std::int64_t i, double analytic_g,
                   const WdamParamsT<double>& params, const BasicTensor<double>& input,
                   bool perturbs_input) {
    double keep = storage[i];
    storage[i] = keep + epsilon;
    auto [yp, cp] = wdam_forward(input, params);
    storage[i] = keep - epsilon;
    auto [ym, cm] = wdam_forward(input, params);
    storage[i] = keep;
    if (perturbs_input && cp.pooled.argmax != cm.pooled.argmax) {
      ++local.skipped_ties;
      return;
    }
    double numeric = (objective(yp) - objective(ym)) / (2.0 * epsilon);
    double denom = std::max({1.0, std::fabs(analytic_g), std::fabs(numeric)});
    max_rel = std::max(max_rel, std::fabs(analytic_g - numeric) / denom);
    ++local.checked;
  };

  BasicTensor<double> xv = x;
  for (std::int64_t i = 0; i < xv.size(); ++i) probe(xv, i, analytic.x[i], p, xv, true);
  WdamParamsT<double> pv = p;
  for (std::int64_t i = 0; i < pv.w1.size(); ++i) probe(pv.w1, i, analytic.w1[i], pv, x, false);
  for (std::int64_t i = 0; i < pv.b1.size(); ++i) probe(pv.b1, i, analytic.b1[i], pv, x, false);
  for (std::int64_t i = 0; i < pv.w2.size(); ++i) probe(pv.w2, i, analytic.w2[i], pv, x, false);
  for (std::int64_t i = 0; i < pv.b2.size(); ++i) probe(pv.b2, i, analytic.b2[i], pv, x, false);

  if (stats) *stats = local;
  return max_rel;
}

/// Per-sample attention weights plus their dataset mean, Table-style.
struct WeightInspection {
  std::vector<std::array<double, 4>> per_sample;
  std::array<double, 4> mean{0, 0, 0, 0};
};

template <typename T>
WeightInspection inspect_weights(const WdamParamsT<T>& p,
                                 const std::vector<BasicTensor<T>>& dataset) {
  if (dataset.empty()) throw value_error("inspect_weights: empty dataset");
  WeightInspection rep;
  rep.per_sample.reserve(dataset.size());
  for (const auto& x : dataset) {
    auto bands = haar_dwt(x);
    auto pooled = pool_subbands(stack_subbands(bands));
    auto w = attention_weights(pooled.avg, pooled.max, p);
    std::array<double, 4> row;
    for (std::size_t b = 0; b < 4; ++b) {
      row[b] = double(w.a[b]);
      rep.mean[b] += row[b];
    }
    rep.per_sample.push_back(row);
  }
  for (std::size_t b = 0; b < 4; ++b) rep.mean[b] /= double(dataset.size());
  return rep;
}

}  // namespace subband_ad
