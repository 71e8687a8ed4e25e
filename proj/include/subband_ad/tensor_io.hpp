// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/image.hpp"
#include "subband_ad/tensor.hpp"

namespace subband_ad {

// WTEN tensor file layout:
//   "WTEN" 0x01 | u8 rank (1..4) | rank x u32 LE extents |
//   product(extents) x f32 LE, row-major.

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * static_cast<std::size_t>(t.rank()) + 4 * static_cast<std::size_t>(t.size()));
  const char magic[5] = {'W', 'T', 'E', 'N', 0x01};
  out.insert(out.end(), magic, magic + 5);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (int a = 0; a < t.rank(); ++a) {
    std::uint32_t e = static_cast<std::uint32_t>(t.extent(a));
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((e >> (8 * k)) & 0xff));
  }
  std::size_t base = out.size();
  out.resize(base + 4 * static_cast<std::size_t>(t.size()));
  static_assert(sizeof(float) == 4);
  std::memcpy(out.data() + base, t.data(), 4 * static_cast<std::size_t>(t.size()));
  return out;
}

inline Tensor decode_tensor(const std::vector<std::uint8_t>& buf) {
  auto fail = [](std::size_t off, const std::string& what) -> void {
    std::ostringstream os;
    os << "WTEN parse error at byte " << off << ": " << what;
    throw parse_error(os.str());
  };
  if (buf.size() < 6 || std::memcmp(buf.data(), "WTEN\x01", 5) != 0)
    fail(0, "bad magic, expected WTEN version 1");
  int rank = buf[5];
  if (rank < 1 || rank > 4) fail(5, "rank must be 1..4, got " + std::to_string(rank));
  std::size_t pos = 6;
  if (buf.size() < pos + 4 * static_cast<std::size_t>(rank)) fail(buf.size(), "truncated extents");
  std::vector<std::int64_t> shape;
  for (int a = 0; a < rank; ++a) {
    std::uint32_t e = 0;
    for (int k = 0; k < 4; ++k) e |= std::uint32_t(buf[pos + static_cast<std::size_t>(k)]) << (8 * k);
    pos += 4;
    if (e == 0) fail(pos - 4, "zero extent");
    shape.push_back(static_cast<std::int64_t>(e));
  }
  std::int64_t count = Tensor::element_count(shape);
  std::size_t need = 4 * static_cast<std::size_t>(count);
  if (buf.size() - pos != need) {
    std::ostringstream os;
    os << "payload length mismatch: expected " << need << " bytes, have " << (buf.size() - pos);
    fail(pos, os.str());
  }
  std::vector<float> data(static_cast<std::size_t>(count));
  std::memcpy(data.data(), buf.data() + pos, need);
  return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_file_bytes(path));
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file_bytes(path, encode_tensor(t));
}

}  // namespace subband_ad
