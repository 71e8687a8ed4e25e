// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/tensor.hpp"

namespace subband_ad {

/// 8-bit image, row-major, channel-interleaved. channels is 1 (grayscale,
/// PGM) or 3 (RGB, PPM).
struct ImageBuffer {
  int64_t width = 0;
  int64_t height = 0;
  int channels = 1;
  std::vector<std::uint8_t> samples;

  std::int64_t sample_count() const { return width * height * channels; }

  std::uint8_t& at(std::int64_t row, std::int64_t col, int ch = 0) {
    return samples[static_cast<std::size_t>((row * width + col) * channels + ch)];
  }
  std::uint8_t at(std::int64_t row, std::int64_t col, int ch = 0) const {
    return samples[static_cast<std::size_t>((row * width + col) * channels + ch)];
  }

  bool operator==(const ImageBuffer& o) const {
    return width == o.width && height == o.height && channels == o.channels &&
           samples == o.samples;
  }
};

namespace detail {

inline bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

[[noreturn]] inline void pnm_fail(std::size_t offset, const std::string& what) {
  std::ostringstream os;
  os << "netpbm parse error at byte " << offset << ": " << what;
  throw parse_error(os.str());
}

// Reads one unsigned decimal token preceded by at least one whitespace byte.
inline std::int64_t pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                              const char* field) {
  if (pos >= buf.size() || !is_pnm_space(buf[pos]))
    pnm_fail(pos, std::string("expected whitespace before ") + field);
  while (pos < buf.size() && is_pnm_space(buf[pos])) ++pos;
  if (pos >= buf.size()) pnm_fail(pos, std::string("missing ") + field);
  if (buf[pos] < '0' || buf[pos] > '9')
    pnm_fail(pos, std::string("malformed header: non-numeric ") + field);
  std::int64_t v = 0;
  while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
    v = v * 10 + (buf[pos] - '0');
    if (v > 1'000'000'000) pnm_fail(pos, std::string(field) + " out of range");
    ++pos;
  }
  return v;
}

}  // namespace detail

/// Parses a binary PGM (P5) or PPM (P6) payload. maxval must be 255.
inline ImageBuffer decode_netpbm(const std::vector<std::uint8_t>& buf) {
  using detail::pnm_fail;
  if (buf.size() < 2 || buf[0] != 'P') pnm_fail(0, "bad magic, expected P5 or P6");
  int channels;
  if (buf[1] == '5')
    channels = 1;
  else if (buf[1] == '6')
    channels = 3;
  else
    pnm_fail(1, "bad magic, expected P5 or P6");

  std::size_t pos = 2;
  std::int64_t width = detail::pnm_token(buf, pos, "width");
  std::int64_t height = detail::pnm_token(buf, pos, "height");
  std::size_t maxval_at = pos;
  std::int64_t maxval = detail::pnm_token(buf, pos, "maxval");
  if (width < 1 || height < 1) pnm_fail(maxval_at, "image dimensions must be >= 1");
  if (maxval != 255)
    pnm_fail(maxval_at, "unsupported maxval " + std::to_string(maxval) +
                            " (only 255 is supported)");
  if (pos >= buf.size() || !detail::is_pnm_space(buf[pos]))
    pnm_fail(pos, "expected single whitespace after maxval");
  ++pos;  // exactly one separator byte before the payload

  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  std::size_t need = static_cast<std::size_t>(width * height * channels);
  if (buf.size() - pos < need) {
    std::ostringstream os;
    os << "truncated payload: need " << need << " bytes, have " << (buf.size() - pos);
    pnm_fail(buf.size(), os.str());
  }
  if (buf.size() - pos > need) pnm_fail(pos + need, "trailing bytes after payload");
  img.samples.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos), buf.end());
  return img;
}

/// Canonical binary encoding: "P5\n<w> <h>\n255\n" (or P6) + payload.
inline std::vector<std::uint8_t> encode_netpbm(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3)
    throw value_error("image channels must be 1 or 3, got " + std::to_string(img.channels));
  if (img.width < 1 || img.height < 1)
    throw value_error("image dimensions must be >= 1");
  if (static_cast<std::int64_t>(img.samples.size()) != img.sample_count())
    throw value_error("image sample count mismatch");
  std::ostringstream head;
  head << (img.channels == 1 ? "P5" : "P6") << "\n"
       << img.width << " " << img.height << "\n255\n";
  std::string h = head.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), img.samples.begin(), img.samples.end());
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open file: " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (f.bad()) throw io_error("read failed: " + path.string());
  return buf;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open file for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw io_error("write failed: " + path.string());
}

inline ImageBuffer read_image(const std::filesystem::path& path) {
  try {
    return decode_netpbm(read_file_bytes(path));
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

inline void write_image(const ImageBuffer& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_netpbm(img));
}

/// Planar C x H x W tensor with values sample/255 in [0, 1].
inline Tensor image_to_tensor(const ImageBuffer& img) {
  Tensor t({img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (std::int64_t i = 0; i < img.height; ++i)
      for (std::int64_t j = 0; j < img.width; ++j)
        t.at(c, i, j) = float(img.at(i, j, c)) / 255.0f;
  return t;
}

/// Inverse of image_to_tensor: clamp to [0, 1], round to nearest sample.
inline ImageBuffer tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || (t.extent(0) != 1 && t.extent(0) != 3))
    throw value_error("tensor_to_image expects CxHxW with C in {1,3}, got " + t.shape_str());
  ImageBuffer img;
  img.channels = static_cast<int>(t.extent(0));
  img.height = t.extent(1);
  img.width = t.extent(2);
  img.samples.resize(static_cast<std::size_t>(img.sample_count()));
  for (int c = 0; c < img.channels; ++c)
    for (std::int64_t i = 0; i < img.height; ++i)
      for (std::int64_t j = 0; j < img.width; ++j) {
        float v = t.at(c, i, j);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        img.at(i, j, c) = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
      }
  return img;
}

/// Rec.601 luma; returns grayscale copies of 3-channel inputs unchanged
/// single-channel ones.
template <typename T>
BasicTensor<T> to_luminance(const BasicTensor<T>& t) {
  if (t.rank() != 3) throw value_error("to_luminance expects CxHxW, got " + t.shape_str());
  if (t.extent(0) == 1) return t;
  if (t.extent(0) != 3)
    throw value_error("to_luminance expects 1 or 3 channels, got " + t.shape_str());
  BasicTensor<T> out({1, t.extent(1), t.extent(2)});
  for (std::int64_t i = 0; i < t.extent(1); ++i)
    for (std::int64_t j = 0; j < t.extent(2); ++j)
      out.at(0, i, j) = T(0.299) * t.at(0, i, j) + T(0.587) * t.at(1, i, j) +
                        T(0.114) * t.at(2, i, j);
  return out;
}

}  // namespace subband_ad
