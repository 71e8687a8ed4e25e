// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "subband_ad/error.hpp"
#include "subband_ad/image.hpp"
#include "subband_ad/mask.hpp"
#include "subband_ad/rng.hpp"
#include "subband_ad/tensor.hpp"
#include "subband_ad/wavelet.hpp"

namespace subband_ad {

/// Rectangle geometry before clipping. h/w follow the frozen rounding rule
/// in sample_rect_mask; aspect = h/w as drawn.
struct RectSpec {
  std::int64_t center_row = 0;
  std::int64_t center_col = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;
  double aspect = 1.0;
};

/// Parameters passed through to the inpainting backend unchanged.
struct DiffusionParams {
  std::string sampler = "DPM++2M";
  int steps = 20;
  double cfg_scale = 7.5;
  double denoising_strength = 0.75;

  void validate() const {
    if (steps < 1) throw value_error("diffusion steps must be >= 1");
    if (cfg_scale < 5.0 || cfg_scale > 10.0)
      throw value_error("cfg_scale must lie in [5, 10]");
    if (denoising_strength < 0.5 || denoising_strength > 0.85)
      throw value_error("denoising_strength must lie in [0.5, 0.85]");
  }
};

struct SynthesisConfig {
  double alpha = 0.1;
  std::array<double, 2> aspect_range{0.5, 2.0};
  int variants_per_image = 5;
  double tau = 0.13;
  std::string backend = "stub";  // "stub" or "http"
  std::string backend_url;
  DiffusionParams diffusion;

  void validate() const {
    if (!(alpha > 0.0) || alpha > 1.0) throw value_error("alpha must lie in (0, 1]");
    if (variants_per_image < 1) throw value_error("variants_per_image must be >= 1");
    if (!(aspect_range[0] > 0.0) || aspect_range[1] < aspect_range[0])
      throw value_error("aspect_range must satisfy 0 < lo <= hi");
    if (tau < 0.0) throw value_error("tau must be >= 0");
    if (backend != "stub" && backend != "http")
      throw value_error("backend must be 'stub' or 'http'");
    diffusion.validate();
  }
};

inline SynthesisConfig synthesis_config_from_json(const nlohmann::json& j) {
  SynthesisConfig cfg;
  cfg.alpha = j.value("alpha", cfg.alpha);
  if (j.contains("aspect_range")) {
    auto a = j.at("aspect_range").get<std::vector<double>>();
    if (a.size() != 2) throw parse_error("aspect_range must have two entries");
    cfg.aspect_range = {a[0], a[1]};
  }
  cfg.variants_per_image = j.value("variants_per_image", cfg.variants_per_image);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.backend = j.value("backend", cfg.backend);
  cfg.backend_url = j.value("backend_url", cfg.backend_url);
  if (j.contains("diffusion")) {
    const auto& d = j.at("diffusion");
    cfg.diffusion.sampler = d.value("sampler", cfg.diffusion.sampler);
    cfg.diffusion.steps = d.value("steps", cfg.diffusion.steps);
    cfg.diffusion.cfg_scale = d.value("cfg_scale", cfg.diffusion.cfg_scale);
    cfg.diffusion.denoising_strength =
        d.value("denoising_strength", cfg.diffusion.denoising_strength);
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json synthesis_config_to_json(const SynthesisConfig& cfg) {
  return {{"alpha", cfg.alpha},
          {"aspect_range", {cfg.aspect_range[0], cfg.aspect_range[1]}},
          {"variants_per_image", cfg.variants_per_image},
          {"tau", cfg.tau},
          {"backend", cfg.backend},
          {"backend_url", cfg.backend_url},
          {"diffusion",
           {{"sampler", cfg.diffusion.sampler},
            {"steps", cfg.diffusion.steps},
            {"cfg_scale", cfg.diffusion.cfg_scale},
            {"denoising_strength", cfg.diffusion.denoising_strength}}}};
}

struct PromptSet {
  std::string prompt;
  std::string negative_prompt;
};

/// Otsu-threshold foreground extraction on luminance. The side of the split
/// with fewer border pixels is taken as the foreground object.
inline BinaryMask foreground_stub(const Tensor& image) {
  if (image.rank() != 3) throw value_error("foreground_stub expects CxHxW, got " + image.shape_str());
  Tensor lum = to_luminance(image);
  const std::int64_t h = lum.extent(1), w = lum.extent(2);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < h * w; ++i) {
    float v = lum[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
  }

  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t b : bytes) ++hist[b];
  const double total = double(h * w);
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += double(i) * double(hist[i]);

  double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
  int best_t = -1;
  for (int t = 0; t < 255; ++t) {
    w0 += double(hist[t]);
    sum0 += double(t) * double(hist[t]);
    double w1 = total - w0;
    if (w0 == 0.0) continue;
    if (w1 == 0.0) break;
    double mu0 = sum0 / w0, mu1 = (sum_all - sum0) / w1;
    double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  if (best_t < 0)
    throw value_error("foreground_stub: constant image, no foreground separable");

  BinaryMask above(w, h), below(w, h);
  for (std::int64_t i = 0; i < h * w; ++i) {
    bool hi = bytes[static_cast<std::size_t>(i)] > best_t;
    above.bits[static_cast<std::size_t>(i)] = hi ? 1 : 0;
    below.bits[static_cast<std::size_t>(i)] = hi ? 0 : 1;
  }
  std::int64_t border_above = 0, border_below = 0;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      if (r != 0 && r != h - 1 && c != 0 && c != w - 1) continue;
      (above.at(r, c) ? border_above : border_below)++;
    }
  return border_above <= border_below ? above : below;
}

/// Samples a rectangle whose pre-clip area tracks alpha * |fg| (Eq. area
/// rule, rounding frozen: w = round(sqrt(A/rho)), h = round(rho * w), both
/// clamped >= 1). The center is drawn uniformly over the set bits of fg;
/// the rectangle is clipped to the image and intersected with fg. Empty
/// intersections retry with a fresh center and aspect, at most 32 attempts.
inline std::pair<BinaryMask, RectSpec> sample_rect_mask(const BinaryMask& fg, double alpha,
                                                        std::array<double, 2> aspect_range,
                                                        Rng& rng) {
  if (!(alpha > 0.0) || alpha > 1.0) throw value_error("alpha must lie in (0, 1]");
  if (!(aspect_range[0] > 0.0) || aspect_range[1] < aspect_range[0])
    throw value_error("aspect_range must satisfy 0 < lo <= hi");
  const std::int64_t fg_area = fg.count();
  if (fg_area == 0) throw value_error("sample_rect_mask: empty foreground");

  std::vector<std::int64_t> fg_indices;
  fg_indices.reserve(static_cast<std::size_t>(fg_area));
  for (std::int64_t i = 0; i < fg.width * fg.height; ++i)
    if (fg.bits[static_cast<std::size_t>(i)]) fg_indices.push_back(i);

  const double target_area = alpha * double(fg_area);
  for (int attempt = 0; attempt < 32; ++attempt) {
    double rho = rng.uniform(aspect_range[0], aspect_range[1]);
    std::int64_t w_r = std::max<std::int64_t>(1, std::lround(std::sqrt(target_area / rho)));
    std::int64_t h_r = std::max<std::int64_t>(1, std::lround(rho * double(w_r)));
    std::int64_t center = fg_indices[rng.below(std::uint64_t(fg_indices.size()))];
    std::int64_t cr = center / fg.width, cc = center % fg.width;

    std::int64_t top = cr - h_r / 2, left = cc - w_r / 2;
    std::int64_t r0 = std::max<std::int64_t>(0, top);
    std::int64_t r1 = std::min<std::int64_t>(fg.height, top + h_r);
    std::int64_t c0 = std::max<std::int64_t>(0, left);
    std::int64_t c1 = std::min<std::int64_t>(fg.width, left + w_r);

    BinaryMask m(fg.width, fg.height);
    std::int64_t hit = 0;
    for (std::int64_t r = r0; r < r1; ++r)
      for (std::int64_t c = c0; c < c1; ++c)
        if (fg.at(r, c)) {
          m.set(r, c);
          ++hit;
        }
    if (hit > 0) {
      RectSpec rect{cr, cc, h_r, w_r, rho};
      return {std::move(m), rect};
    }
  }
  throw value_error("sample_rect_mask: no nonempty intersection after 32 attempts");
}

/// Deterministic stand-in for the LLM prompt step.
inline PromptSet prompt_stub(const std::string& class_label) {
  if (class_label.empty()) throw value_error("prompt_stub: empty class label");
  return {"a photo of a " + class_label + " with a visible defect, damaged, broken surface",
          "pristine, flawless, perfect " + class_label};
}

namespace detail {

inline double lattice_noise(std::uint64_t seed, std::int64_t gy, std::int64_t gx, int ch) {
  std::uint64_t h = hash_mix(hash_mix(hash_mix(seed, std::uint64_t(gy)), std::uint64_t(gx)),
                             std::uint64_t(ch));
  return double(h >> 11) * 0x1.0p-53;
}

/// Smooth value noise in [0, 1): bilinear interpolation of a seeded random
/// lattice with 8-pixel cells.
inline double value_noise(std::uint64_t seed, std::int64_t row, std::int64_t col, int ch) {
  const std::int64_t cell = 8;
  std::int64_t gy = row / cell, gx = col / cell;
  double fy = double(row % cell) / double(cell);
  double fx = double(col % cell) / double(cell);
  double v00 = lattice_noise(seed, gy, gx, ch);
  double v01 = lattice_noise(seed, gy, gx + 1, ch);
  double v10 = lattice_noise(seed, gy + 1, gx, ch);
  double v11 = lattice_noise(seed, gy + 1, gx + 1, ch);
  double top = v00 + (v01 - v00) * fx;
  double bot = v10 + (v11 - v10) * fx;
  return top + (bot - top) * fy;
}

/// 4-neighbor distance (in pixels) from each mask pixel to the nearest
/// outside pixel; out-of-image counts as outside. Non-mask pixels get 0.
inline std::vector<std::int32_t> mask_interior_distance(const BinaryMask& m) {
  std::vector<std::int32_t> dist(m.bits.size(), 0);
  std::deque<std::int64_t> queue;
  auto outside = [&](std::int64_t r, std::int64_t c) {
    return r < 0 || r >= m.height || c < 0 || c >= m.width || !m.at(r, c);
  };
  for (std::int64_t r = 0; r < m.height; ++r)
    for (std::int64_t c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      if (outside(r - 1, c) || outside(r + 1, c) || outside(r, c - 1) || outside(r, c + 1)) {
        dist[static_cast<std::size_t>(r * m.width + c)] = 1;
        queue.push_back(r * m.width + c);
      }
    }
  while (!queue.empty()) {
    std::int64_t cur = queue.front();
    queue.pop_front();
    std::int64_t r = cur / m.width, c = cur % m.width;
    std::int32_t d = dist[static_cast<std::size_t>(cur)];
    const std::int64_t nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (auto& n : nbr) {
      if (n[0] < 0 || n[0] >= m.height || n[1] < 0 || n[1] >= m.width) continue;
      std::int64_t ni = n[0] * m.width + n[1];
      if (m.bits[static_cast<std::size_t>(ni)] && dist[static_cast<std::size_t>(ni)] == 0) {
        dist[static_cast<std::size_t>(ni)] = d + 1;
        queue.push_back(ni);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Offline stand-in for diffusion inpainting: blends seeded value-noise
/// texture into the masked region at mix ratio 0.6, with a 2-pixel linear
/// feather at the mask boundary. Pixels outside the mask are bit-identical
/// to the input; the result is a pure function of (image, mask, seed).
inline Tensor inpaint_stub(const Tensor& image, const BinaryMask& mask, std::uint64_t seed) {
  if (image.rank() != 3) throw value_error("inpaint_stub expects CxHxW, got " + image.shape_str());
  if (image.extent(1) != mask.height || image.extent(2) != mask.width)
    throw value_error("inpaint_stub: mask size does not match image");
  if (mask.count() == 0) throw value_error("inpaint_stub: empty mask");

  std::vector<std::int32_t> dist = detail::mask_interior_distance(mask);
  Tensor out = image;
  const int channels = static_cast<int>(image.extent(0));
  for (std::int64_t r = 0; r < mask.height; ++r)
    for (std::int64_t c = 0; c < mask.width; ++c) {
      std::int32_t d = dist[static_cast<std::size_t>(r * mask.width + c)];
      if (d == 0) continue;
      double feather = std::min(1.0, 0.5 * double(d));
      double mix = 0.6 * feather;
      for (int ch = 0; ch < channels; ++ch) {
        double noise = detail::value_noise(seed, r, c, ch);
        double v = (1.0 - mix) * double(out.at(ch, r, c)) + mix * noise;
        out.at(ch, r, c) = float(v);
      }
    }
  return out;
}

/// Wavelet-domain proxy for a learned perceptual distance: mean over three
/// decomposition levels of the normalized L1 band differences (detail bands
/// at every level, plus LL at the deepest). Symmetric, zero iff equal.
inline double builtin_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "builtin_distance");
  if (a.rank() != 3) throw value_error("builtin_distance expects CxHxW, got " + a.shape_str());
  if (a.extent(1) % 8 != 0 || a.extent(2) % 8 != 0)
    throw value_error("builtin_distance requires spatial extents divisible by 8, got " +
                      a.shape_str());
  auto la = multi_level_dwt(a, 3);
  auto lb = multi_level_dwt(b, 3);
  auto band_l1 = [](const Tensor& x, const Tensor& y) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += std::fabs(double(x[i]) - double(y[i]));
    return acc / double(x.size());
  };
  double sum = 0.0;
  int terms = 0;
  for (int lvl = 0; lvl < 3; ++lvl)
    for (int bnd = 1; bnd < 4; ++bnd) {
      sum += band_l1(la[static_cast<std::size_t>(lvl)].band(bnd), lb[static_cast<std::size_t>(lvl)].band(bnd));
      ++terms;
    }
  sum += band_l1(la[2].ll, lb[2].ll);
  ++terms;
  return sum / double(terms);
}

/// argmin_k |distances[k] - tau|; ties resolve to the smallest index.
inline std::size_t select_candidate(const std::vector<double>& distances, double tau) {
  if (distances.empty()) throw value_error("select_candidate: empty distance list");
  if (tau < 0.0) throw value_error("select_candidate: tau must be >= 0");
  std::size_t best = 0;
  double best_gap = std::fabs(distances[0] - tau);
  for (std::size_t k = 1; k < distances.size(); ++k) {
    double gap = std::fabs(distances[k] - tau);
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

// Pluggable backends. Stubs run offline and deterministically; the HTTP
// implementations in backend_http.hpp speak the wire contract.

class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;
  virtual std::string name() const = 0;
  virtual BinaryMask segment(const Tensor& image) = 0;
};

class PromptBackend {
 public:
  virtual ~PromptBackend() = default;
  virtual std::string name() const = 0;
  virtual PromptSet make_prompts(const std::string& class_label) = 0;
};

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  virtual std::string name() const = 0;
  virtual Tensor inpaint(const Tensor& image, const BinaryMask& mask, const PromptSet& prompts,
                         std::uint64_t seed, const DiffusionParams& params) = 0;
};

class StubSegmentation final : public SegmentationBackend {
 public:
  std::string name() const override { return "stub-segmentation"; }
  BinaryMask segment(const Tensor& image) override { return foreground_stub(image); }
};

class StubPrompter final : public PromptBackend {
 public:
  std::string name() const override { return "stub-prompt"; }
  PromptSet make_prompts(const std::string& class_label) override {
    return prompt_stub(class_label);
  }
};

class StubInpainter final : public InpaintBackend {
 public:
  std::string name() const override { return "stub-inpaint"; }
  Tensor inpaint(const Tensor& image, const BinaryMask& mask, const PromptSet& prompts,
                 std::uint64_t seed, const DiffusionParams& params) override {
    (void)prompts;
    (void)params;
    return inpaint_stub(image, mask, seed);
  }
};

struct BackendSet {
  SegmentationBackend& segmentation;
  PromptBackend& prompt;
  InpaintBackend& inpaint;
};

struct Candidate {
  Tensor image;
  std::uint64_t seed = 0;
  double distance = 0.0;
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::size_t selected_index = 0;
};

struct SynthesisResult {
  Tensor image;      // the selected anomalous variant
  BinaryMask mask;   // M = M_fg intersect M_rect
  RectSpec rect;
  PromptSet prompts;
  CandidateSet candidates;
};

/// Full pipeline for one image: segmentation -> mask sampling -> prompting
/// -> variants_per_image inpaint calls with seeds drawn from rng ->
/// distances against the normal image -> threshold-closest selection.
/// precomputed_distances (seed -> distance, e.g. external LPIPS) overrides
/// builtin_distance when given.
inline SynthesisResult synthesize_pair(
    const Tensor& normal_image, const std::string& class_label, const SynthesisConfig& cfg,
    const BackendSet& backends, Rng& rng,
    const std::optional<std::map<std::uint64_t, double>>& precomputed_distances = std::nullopt) {
  cfg.validate();
  SynthesisResult result;

  BinaryMask fg = backends.segmentation.segment(normal_image);
  auto [mask, rect] = sample_rect_mask(fg, cfg.alpha, cfg.aspect_range, rng);
  result.mask = std::move(mask);
  result.rect = rect;
  result.prompts = backends.prompt.make_prompts(class_label);

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.variants_per_image));
  for (auto& s : seeds) s = rng.next_u64();

  std::vector<double> distances;
  distances.reserve(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    Candidate cand;
    cand.seed = seeds[k];
    try {
      cand.image = backends.inpaint.inpaint(normal_image, result.mask, result.prompts,
                                            cand.seed, cfg.diffusion);
    } catch (const backend_error& e) {
      throw backend_error("backend '" + backends.inpaint.name() + "' failed at attempt " +
                          std::to_string(k) + ": " + e.what());
    }
    if (precomputed_distances) {
      auto it = precomputed_distances->find(cand.seed);
      if (it == precomputed_distances->end())
        throw value_error("distances sidecar has no entry for seed " + std::to_string(cand.seed));
      cand.distance = it->second;
    } else {
      cand.distance = builtin_distance(cand.image, normal_image);
    }
    distances.push_back(cand.distance);
    result.candidates.candidates.push_back(std::move(cand));
  }
  result.candidates.selected_index = select_candidate(distances, cfg.tau);
  result.image = result.candidates.candidates[result.candidates.selected_index].image;
  return result;
}

}  // namespace subband_ad
