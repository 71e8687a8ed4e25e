// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/image.hpp"
#include "subband_ad/tensor.hpp"
#include "subband_ad/wavelet.hpp"

namespace subband_ad {

/// Per-class sub-band variation profile: four nonnegative values in
/// (LL, LH, HL, HH) order summing to 1.
struct SaliencyProfile {
  std::string class_name;
  std::array<double, 4> values{0, 0, 0, 0};
  std::int64_t pair_count = 0;
};

/// Accumulated absolute sub-band differences between one normal/anomalous
/// pair: sum_b |dwt(anomalous).b - dwt(normal).b|, unnormalized. RGB inputs
/// are reduced to luminance first; one decomposition level.
template <typename T>
std::array<double, 4> subband_variation(const BasicTensor<T>& normal,
                                        const BasicTensor<T>& anomalous) {
  require_same_shape(normal, anomalous, "subband_variation");
  BasicTensor<T> n = normal.extent(0) == 3 ? to_luminance(normal) : normal;
  BasicTensor<T> a = anomalous.extent(0) == 3 ? to_luminance(anomalous) : anomalous;
  auto bn = haar_dwt(n);
  auto ba = haar_dwt(a);
  std::array<double, 4> out{0, 0, 0, 0};
  for (std::size_t b = 0; b < 4; ++b) {
    const auto& tn = bn.band(int(b));
    const auto& ta = ba.band(int(b));
    double acc = 0.0;
    for (std::int64_t i = 0; i < tn.size(); ++i) acc += std::fabs(double(ta[i]) - double(tn[i]));
    out[b] = acc;
  }
  return out;
}

/// Aggregates pairs into a normalized profile. Canonical order: per-pair
/// band sums -> mean over pairs -> divide by the four-band total.
/// per_pair_normalize instead normalizes each pair to the simplex before
/// averaging (sensitivity-analysis variant); pairs with zero variation are
/// rejected in that mode since they cannot be normalized.
template <typename T>
SaliencyProfile class_saliency(
    const std::vector<std::pair<BasicTensor<T>, BasicTensor<T>>>& pairs,
    const std::string& class_name, bool per_pair_normalize = false) {
  if (pairs.empty()) throw value_error("class_saliency: need at least one pair");
  std::array<double, 4> acc{0, 0, 0, 0};
  for (const auto& [normal, anomalous] : pairs) {
    std::array<double, 4> v = subband_variation(normal, anomalous);
    double total = v[0] + v[1] + v[2] + v[3];
    if (per_pair_normalize) {
      if (total <= 0.0)
        throw value_error("class_saliency: a pair has zero variation, cannot normalize per pair");
      for (std::size_t b = 0; b < 4; ++b) acc[b] += v[b] / total;
    } else {
      for (std::size_t b = 0; b < 4; ++b) acc[b] += v[b];
    }
  }
  double total = acc[0] + acc[1] + acc[2] + acc[3];
  if (total <= 0.0)
    throw value_error("class_saliency: all pairs identical, normalization undefined");
  SaliencyProfile profile;
  profile.class_name = class_name;
  profile.pair_count = static_cast<std::int64_t>(pairs.size());
  for (std::size_t b = 0; b < 4; ++b) profile.values[b] = acc[b] / total;
  return profile;
}

}  // namespace subband_ad
