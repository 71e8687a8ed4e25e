// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "subband_ad/base64.hpp"
#include "subband_ad/error.hpp"
#include "subband_ad/image.hpp"
#include "subband_ad/mask.hpp"
#include "subband_ad/synthesis.hpp"

namespace subband_ad {

namespace detail {

/// Images travel as base64 PPM (P6); grayscale tensors are expanded by
/// channel replication on the way out and reduced to luminance on the way
/// back in.
inline std::string tensor_to_wire_ppm(const Tensor& t) {
  ImageBuffer img = tensor_to_image(t);
  if (img.channels == 1) {
    ImageBuffer rgb;
    rgb.width = img.width;
    rgb.height = img.height;
    rgb.channels = 3;
    rgb.samples.resize(static_cast<std::size_t>(rgb.sample_count()));
    for (std::size_t i = 0; i < img.samples.size(); ++i)
      rgb.samples[3 * i] = rgb.samples[3 * i + 1] = rgb.samples[3 * i + 2] = img.samples[i];
    img = std::move(rgb);
  }
  return base64_encode(encode_netpbm(img));
}

inline std::string mask_to_wire_pgm(const BinaryMask& m) {
  return base64_encode(encode_netpbm(mask_to_image(m)));
}

inline nlohmann::json post_json(httplib::Client& client, const std::string& backend,
                                const std::string& path, const nlohmann::json& body) {
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res)
    throw backend_error(backend + ": transport failure on POST " + path + " (" +
                        httplib::to_string(res.error()) + ")");
  if (res->status < 200 || res->status >= 300)
    throw backend_error(backend + ": POST " + path + " returned status " +
                        std::to_string(res->status));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw backend_error(backend + ": invalid JSON response: " + e.what());
  }
  if (j.contains("error"))
    throw backend_error(backend + ": " + j.at("error").get<std::string>());
  return j;
}

}  // namespace detail

class HttpSegmentation final : public SegmentationBackend {
 public:
  explicit HttpSegmentation(const std::string& base_url) : client_(base_url) {}

  std::string name() const override { return "http-segmentation"; }

  BinaryMask segment(const Tensor& image) override {
    nlohmann::json body = {{"image", detail::tensor_to_wire_ppm(image)}};
    nlohmann::json res = detail::post_json(client_, name(), "/segment", body);
    try {
      return image_to_mask(decode_netpbm(base64_decode(res.at("mask").get<std::string>())));
    } catch (const parse_error& e) {
      throw backend_error(name() + ": bad mask payload: " + e.what());
    }
  }

 private:
  httplib::Client client_;
};

class HttpPrompter final : public PromptBackend {
 public:
  explicit HttpPrompter(const std::string& base_url) : client_(base_url) {}

  std::string name() const override { return "http-prompt"; }

  PromptSet make_prompts(const std::string& class_label) override {
    nlohmann::json body = {{"class_label", class_label}};
    nlohmann::json res = detail::post_json(client_, name(), "/prompt", body);
    return {res.at("prompt").get<std::string>(),
            res.at("negative_prompt").get<std::string>()};
  }

 private:
  httplib::Client client_;
};

class HttpInpainter final : public InpaintBackend {
 public:
  explicit HttpInpainter(const std::string& base_url) : client_(base_url) {}

  std::string name() const override { return "http-inpaint"; }

  Tensor inpaint(const Tensor& image, const BinaryMask& mask, const PromptSet& prompts,
                 std::uint64_t seed, const DiffusionParams& params) override {
    nlohmann::json body = {{"image", detail::tensor_to_wire_ppm(image)},
                           {"mask", detail::mask_to_wire_pgm(mask)},
                           {"prompt", prompts.prompt},
                           {"negative_prompt", prompts.negative_prompt},
                           {"seed", seed},
                           {"steps", params.steps},
                           {"cfg_scale", params.cfg_scale},
                           {"denoising_strength", params.denoising_strength},
                           {"sampler", params.sampler}};
    nlohmann::json res = detail::post_json(client_, name(), "/inpaint", body);
    Tensor out;
    try {
      out = image_to_tensor(decode_netpbm(base64_decode(res.at("image").get<std::string>())));
    } catch (const parse_error& e) {
      throw backend_error(name() + ": bad image payload: " + e.what());
    }
    // Keep the caller's channel count so downstream distances line up.
    if (image.extent(0) == 1 && out.extent(0) == 3) out = to_luminance(out);
    return out;
  }

 private:
  httplib::Client client_;
};

}  // namespace subband_ad
