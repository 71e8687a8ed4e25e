// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "subband_ad/demo.hpp"
#include "subband_ad/error.hpp"
#include "subband_ad/tensor_io.hpp"
#include "subband_ad/wavelet.hpp"
#include "subband_ad/wdam.hpp"

namespace subband_ad {

inline constexpr int kSchemaVersion = 1;

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open file for writing: " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw io_error("write failed: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  return j;
}

/// WdamParams bundle: <prefix>.{w1,b1,w2,b2}.wten + <prefix>.json metadata.
inline void save_wdam_params(const WdamParams& p, const std::filesystem::path& prefix) {
  p.check();
  write_tensor(p.w1, prefix.string() + ".w1.wten");
  write_tensor(p.b1, prefix.string() + ".b1.wten");
  write_tensor(p.w2, prefix.string() + ".w2.wten");
  write_tensor(p.b2, prefix.string() + ".b2.wten");
  nlohmann::json meta = {{"schema_version", kSchemaVersion},
                         {"c", p.c},
                         {"hidden", p.hidden},
                         {"activation", "relu"}};
  write_json_file(meta, prefix.string() + ".json");
}

inline WdamParams load_wdam_params(const std::filesystem::path& prefix) {
  nlohmann::json meta = read_json_file(prefix.string() + ".json");
  WdamParams p;
  p.c = meta.at("c").get<std::int64_t>();
  p.hidden = meta.at("hidden").get<std::int64_t>();
  p.w1 = read_tensor(prefix.string() + ".w1.wten");
  p.b1 = read_tensor(prefix.string() + ".b1.wten");
  p.w2 = read_tensor(prefix.string() + ".w2.wten");
  p.b2 = read_tensor(prefix.string() + ".b2.wten");
  p.check();
  return p;
}

/// DemoNet bundle: conv/head tensors + the embedded WDAM bundle.
inline void save_demo_net(const DemoNet& net, const std::filesystem::path& prefix) {
  write_tensor(net.conv_w, prefix.string() + ".conv_w.wten");
  write_tensor(net.conv_b, prefix.string() + ".conv_b.wten");
  write_tensor(net.head_w, prefix.string() + ".head_w.wten");
  write_tensor(net.head_b, prefix.string() + ".head_b.wten");
  save_wdam_params(net.wdam, prefix.string() + ".wdam");
  nlohmann::json meta = {{"schema_version", kSchemaVersion},
                         {"input_channels", net.conv_w.extent(1)},
                         {"channels", DemoNet::kChannels},
                         {"classes", DemoNet::kClasses}};
  write_json_file(meta, prefix.string() + ".json");
}

inline DemoNet load_demo_net(const std::filesystem::path& prefix) {
  DemoNet net;
  net.conv_w = read_tensor(prefix.string() + ".conv_w.wten");
  net.conv_b = read_tensor(prefix.string() + ".conv_b.wten");
  net.head_w = read_tensor(prefix.string() + ".head_w.wten");
  net.head_b = read_tensor(prefix.string() + ".head_b.wten");
  net.wdam = load_wdam_params(prefix.string() + ".wdam");
  if (net.conv_w.rank() != 4 || net.conv_w.extent(0) != DemoNet::kChannels)
    throw parse_error(prefix.string() + ": conv weights have unexpected shape " +
                      net.conv_w.shape_str());
  return net;
}

/// Sub-band set: <prefix>.{ll,lh,hl,hh}.wten + <prefix>.json with the
/// source shape. `levels` > 1 inserts a .l<k>. component per level.
inline void save_subbands(const std::vector<SubBands>& levels,
                          const std::filesystem::path& prefix,
                          const std::vector<std::int64_t>& original_shape) {
  if (levels.empty()) throw value_error("save_subbands: no levels");
  nlohmann::json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["levels"] = levels.size();
  meta["original_shape"] = original_shape;
  nlohmann::json per_level = nlohmann::json::array();
  for (std::size_t k = 0; k < levels.size(); ++k) {
    std::string stem = prefix.string();
    if (levels.size() > 1) stem += ".l" + std::to_string(k + 1);
    for (int b = 0; b < 4; ++b)
      write_tensor(levels[k].band(b), stem + "." + band_name(b) + ".wten");
    per_level.push_back({{"source_shape", levels[k].source_shape},
                         {"files_stem", std::filesystem::path(stem).filename().string()}});
  }
  meta["per_level"] = per_level;
  write_json_file(meta, prefix.string() + ".json");
}

inline std::vector<SubBands> load_subbands(const std::filesystem::path& prefix,
                                           std::vector<std::int64_t>* original_shape = nullptr) {
  nlohmann::json meta = read_json_file(prefix.string() + ".json");
  std::size_t levels = meta.at("levels").get<std::size_t>();
  if (original_shape)
    *original_shape = meta.at("original_shape").get<std::vector<std::int64_t>>();
  std::vector<SubBands> out(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    std::string stem = prefix.string();
    if (levels > 1) stem += ".l" + std::to_string(k + 1);
    for (int b = 0; b < 4; ++b)
      out[k].band(b) = read_tensor(stem + "." + band_name(b) + ".wten");
    auto ss = meta.at("per_level").at(k).at("source_shape").get<std::vector<std::int64_t>>();
    if (ss.size() != 3) throw parse_error(prefix.string() + ".json: bad source_shape");
    out[k].source_shape = {ss[0], ss[1], ss[2]};
  }
  return out;
}

}  // namespace subband_ad
