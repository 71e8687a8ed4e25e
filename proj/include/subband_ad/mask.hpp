// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/image.hpp"

namespace subband_ad {

/// Row-major boolean mask aligned to an image.
struct BinaryMask {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(std::int64_t w, std::int64_t h) : width(w), height(h) {
    if (w < 1 || h < 1) throw value_error("mask dimensions must be >= 1");
    bits.assign(static_cast<std::size_t>(w * h), 0);
  }

  bool at(std::int64_t row, std::int64_t col) const {
    return bits[static_cast<std::size_t>(row * width + col)] != 0;
  }
  void set(std::int64_t row, std::int64_t col, bool v = true) {
    bits[static_cast<std::size_t>(row * width + col)] = v ? 1 : 0;
  }

  std::int64_t count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }

  bool same_size(const BinaryMask& o) const { return width == o.width && height == o.height; }

  bool operator==(const BinaryMask& o) const {
    return width == o.width && height == o.height && bits == o.bits;
  }
};

inline BinaryMask mask_intersect(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_size(b)) throw value_error("mask_intersect: size mismatch");
  BinaryMask out(a.width, a.height);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
  return out;
}

/// True when every set bit of `inner` is also set in `outer`.
inline bool mask_subset(const BinaryMask& inner, const BinaryMask& outer) {
  if (!inner.same_size(outer)) return false;
  for (std::size_t i = 0; i < inner.bits.size(); ++i)
    if (inner.bits[i] && !outer.bits[i]) return false;
  return true;
}

/// Masks serialize as PGM with 0 (clear) / 255 (set); >= 128 reads as set.
inline ImageBuffer mask_to_image(const BinaryMask& m) {
  ImageBuffer img;
  img.width = m.width;
  img.height = m.height;
  img.channels = 1;
  img.samples.resize(m.bits.size());
  for (std::size_t i = 0; i < m.bits.size(); ++i) img.samples[i] = m.bits[i] ? 255 : 0;
  return img;
}

inline BinaryMask image_to_mask(const ImageBuffer& img) {
  if (img.channels != 1) throw value_error("mask images must be single-channel PGM");
  BinaryMask m(img.width, img.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = img.samples[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace subband_ad
