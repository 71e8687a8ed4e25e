// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/tensor.hpp"

namespace subband_ad {

/// One level of Haar decomposition: four half-resolution bands, each
/// C x H/2 x W/2, plus the shape they reconstruct to.
template <typename T>
struct BasicSubBands {
  BasicTensor<T> ll, lh, hl, hh;
  std::array<std::int64_t, 3> source_shape{0, 0, 0};

  const BasicTensor<T>& band(int b) const {
    switch (b) {
      case 0: return ll;
      case 1: return lh;
      case 2: return hl;
      default: return hh;
    }
  }
  BasicTensor<T>& band(int b) {
    switch (b) {
      case 0: return ll;
      case 1: return lh;
      case 2: return hl;
      default: return hh;
    }
  }
};

using SubBands = BasicSubBands<float>;
using SubBands64 = BasicSubBands<double>;

inline const char* band_name(int b) {
  static const char* names[4] = {"ll", "lh", "hl", "hh"};
  return names[b];
}

namespace detail {

template <typename T>
void check_dwt_input(const BasicTensor<T>& x) {
  if (x.rank() != 3)
    throw value_error("haar_dwt expects a CxHxW tensor, got " + x.shape_str());
  std::int64_t h = x.extent(1), w = x.extent(2);
  if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0)
    throw value_error("haar_dwt requires even spatial extents >= 2, got " + x.shape_str());
}

template <typename T>
void check_subbands(const BasicSubBands<T>& s) {
  const auto& shape = s.ll.shape();
  if (s.ll.rank() != 3) throw value_error("sub-bands must be rank 3");
  for (int b = 1; b < 4; ++b)
    if (s.band(b).shape() != shape)
      throw value_error(std::string("sub-band shape mismatch: ") + band_name(b) + " is " +
                        s.band(b).shape_str() + ", ll is " + s.ll.shape_str());
  if (s.source_shape[0] != shape[0] || s.source_shape[1] != 2 * shape[1] ||
      s.source_shape[2] != 2 * shape[2])
    throw value_error("sub-band source_shape is not twice the band extents");
}

}  // namespace detail

/// Orthonormal Haar analysis. Each output position (i, j) combines the 2x2
/// input block at (2i, 2j), per channel, stride 2, no padding:
///   k_LL = 1/2 [[ 1,  1], [ 1,  1]]   k_LH = 1/2 [[ 1, -1], [ 1, -1]]
///   k_HL = 1/2 [[ 1,  1], [-1, -1]]   k_HH = 1/2 [[ 1, -1], [-1,  1]]
/// LH is high-pass along width, HL along height.
template <typename T>
BasicSubBands<T> haar_dwt(const BasicTensor<T>& x) {
  detail::check_dwt_input(x);
  const std::int64_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::int64_t h2 = h / 2, w2 = w / 2;
  BasicSubBands<T> s;
  s.source_shape = {c, h, w};
  for (int b = 0; b < 4; ++b) s.band(b) = BasicTensor<T>({c, h2, w2});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < h2; ++i)
      for (std::int64_t j = 0; j < w2; ++j) {
        T a = x.at(ch, 2 * i, 2 * j);
        T bb = x.at(ch, 2 * i, 2 * j + 1);
        T cc = x.at(ch, 2 * i + 1, 2 * j);
        T d = x.at(ch, 2 * i + 1, 2 * j + 1);
        s.ll.at(ch, i, j) = T(0.5) * (a + bb + cc + d);
        s.lh.at(ch, i, j) = T(0.5) * (a - bb + cc - d);
        s.hl.at(ch, i, j) = T(0.5) * (a + bb - cc - d);
        s.hh.at(ch, i, j) = T(0.5) * (a - bb - cc + d);
      }
  return s;
}

/// Exact inverse of haar_dwt (transposed-convolution synthesis with the
/// adjoint kernels; the basis is orthonormal so the adjoint is the inverse).
template <typename T>
BasicTensor<T> haar_idwt(const BasicSubBands<T>& s) {
  detail::check_subbands(s);
  const std::int64_t c = s.source_shape[0];
  const std::int64_t h2 = s.ll.extent(1), w2 = s.ll.extent(2);
  BasicTensor<T> x({c, 2 * h2, 2 * w2});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < h2; ++i)
      for (std::int64_t j = 0; j < w2; ++j) {
        T ll = s.ll.at(ch, i, j);
        T lh = s.lh.at(ch, i, j);
        T hl = s.hl.at(ch, i, j);
        T hh = s.hh.at(ch, i, j);
        x.at(ch, 2 * i, 2 * j) = T(0.5) * (ll + lh + hl + hh);
        x.at(ch, 2 * i, 2 * j + 1) = T(0.5) * (ll - lh + hl - hh);
        x.at(ch, 2 * i + 1, 2 * j) = T(0.5) * (ll + lh - hl - hh);
        x.at(ch, 2 * i + 1, 2 * j + 1) = T(0.5) * (ll - lh - hl + hh);
      }
  return x;
}

/// Recursive decomposition of the LL chain. Element k decomposes level k;
/// level k+1 is the DWT of level k's LL band.
template <typename T>
std::vector<BasicSubBands<T>> multi_level_dwt(const BasicTensor<T>& x, int levels) {
  if (levels < 1) throw value_error("levels must be >= 1");
  if (x.rank() != 3)
    throw value_error("multi_level_dwt expects a CxHxW tensor, got " + x.shape_str());
  std::int64_t div = std::int64_t(1) << levels;
  if (x.extent(1) % div != 0 || x.extent(2) % div != 0)
    throw value_error("spatial extents " + x.shape_str() + " not divisible by 2^" +
                      std::to_string(levels));
  std::vector<BasicSubBands<T>> out;
  out.reserve(static_cast<std::size_t>(levels));
  const BasicTensor<T>* cur = &x;
  for (int k = 0; k < levels; ++k) {
    out.push_back(haar_dwt(*cur));
    cur = &out.back().ll;
  }
  return out;
}

/// Inverse of multi_level_dwt: reconstructs bottom-up, substituting each
/// reconstruction for the LL band one level above.
template <typename T>
BasicTensor<T> multi_level_idwt(std::vector<BasicSubBands<T>> levels) {
  if (levels.empty()) throw value_error("multi_level_idwt needs at least one level");
  BasicTensor<T> rec = haar_idwt(levels.back());
  for (std::size_t k = levels.size() - 1; k-- > 0;) {
    levels[k].ll = std::move(rec);
    rec = haar_idwt(levels[k]);
  }
  return rec;
}

/// Concatenates the four bands along the channel axis in LL,LH,HL,HH order:
/// C x H' x W' each -> 4C x H' x W'.
template <typename T>
BasicTensor<T> stack_subbands(const BasicSubBands<T>& s) {
  detail::check_subbands(s);
  const std::int64_t c = s.ll.extent(0), h = s.ll.extent(1), w = s.ll.extent(2);
  BasicTensor<T> out({4 * c, h, w});
  std::int64_t plane = c * h * w;
  for (int b = 0; b < 4; ++b) {
    const T* src = s.band(b).data();
    T* dst = out.data() + b * plane;
    for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
  }
  return out;
}

/// Inverse of stack_subbands.
template <typename T>
BasicSubBands<T> unstack_subbands(const BasicTensor<T>& stacked,
                                  const std::array<std::int64_t, 3>& source_shape) {
  if (stacked.rank() != 3 || stacked.extent(0) % 4 != 0)
    throw value_error("unstack_subbands expects 4CxH'xW', got " + stacked.shape_str());
  const std::int64_t c = stacked.extent(0) / 4;
  const std::int64_t h = stacked.extent(1), w = stacked.extent(2);
  BasicSubBands<T> s;
  s.source_shape = source_shape;
  std::int64_t plane = c * h * w;
  for (int b = 0; b < 4; ++b) {
    s.band(b) = BasicTensor<T>({c, h, w});
    const T* src = stacked.data() + b * plane;
    T* dst = s.band(b).data();
    for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
  }
  detail::check_subbands(s);
  return s;
}

}  // namespace subband_ad
