// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subband_ad/error.hpp"
#include "subband_ad/mask.hpp"
#include "subband_ad/tensor.hpp"

namespace subband_ad {

/// Scores with binary labels (1 = anomalous).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Mann-Whitney AUROC: (wins + 0.5 * ties) / (P * N) over all
/// positive-negative pairs, computed via average ranks. Equals the
/// trapezoidal area under the ROC curve.
inline double auroc(const ScoredSet& set) {
  const std::size_t n = set.scores.size();
  if (set.labels.size() != n) throw value_error("auroc: scores/labels length mismatch");
  std::int64_t pos = 0, neg = 0;
  for (int l : set.labels) (l ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw value_error("auroc undefined: need at least one positive and one negative");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) ++j;
    // 1-based average rank over the tie group [i, j).
    double avg_rank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (set.labels[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  return (rank_sum_pos - 0.5 * double(pos) * double(pos + 1)) / (double(pos) * double(neg));
}

/// One anomaly map with its pixel ground truth.
struct PixelEvalCase {
  Tensor map;     // H x W scores
  BinaryMask gt;  // matching extents

  void check() const {
    if (map.rank() != 2) throw value_error("anomaly map must be rank 2, got " + map.shape_str());
    if (map.extent(0) != gt.height || map.extent(1) != gt.width)
      throw value_error("anomaly map " + map.shape_str() + " does not match mask " +
                        std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
};

/// AUROC over the pooled pixel population of all cases.
inline double pixel_auroc(const std::vector<PixelEvalCase>& cases) {
  ScoredSet pool;
  for (const auto& c : cases) {
    c.check();
    for (std::int64_t i = 0; i < c.map.size(); ++i) {
      pool.scores.push_back(double(c.map[i]));
      pool.labels.push_back(c.gt.bits[static_cast<std::size_t>(i)] ? 1 : 0);
    }
  }
  return auroc(pool);
}

/// 8-connected components in first-seen row-major order. Label 0 is
/// background; pixel lists hold row-major indices.
struct Components {
  std::vector<std::int32_t> labels;
  std::int32_t count = 0;
  std::vector<std::vector<std::int64_t>> pixels;
};

inline Components connected_components(const BinaryMask& mask) {
  Components out;
  out.labels.assign(static_cast<std::size_t>(mask.width * mask.height), 0);
  std::deque<std::int64_t> queue;
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      std::int64_t idx = r * mask.width + c;
      if (!mask.bits[static_cast<std::size_t>(idx)] || out.labels[static_cast<std::size_t>(idx)]) continue;
      ++out.count;
      out.pixels.emplace_back();
      out.labels[static_cast<std::size_t>(idx)] = out.count;
      queue.push_back(idx);
      while (!queue.empty()) {
        std::int64_t cur = queue.front();
        queue.pop_front();
        out.pixels.back().push_back(cur);
        std::int64_t cr = cur / mask.width, cc = cur % mask.width;
        for (std::int64_t dr = -1; dr <= 1; ++dr)
          for (std::int64_t dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            std::int64_t nr = cr + dr, nc = cc + dc;
            if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width) continue;
            std::int64_t nidx = nr * mask.width + nc;
            if (mask.bits[static_cast<std::size_t>(nidx)] && !out.labels[static_cast<std::size_t>(nidx)]) {
              out.labels[static_cast<std::size_t>(nidx)] = out.count;
              queue.push_back(nidx);
            }
          }
      }
    }
  }
  return out;
}

namespace detail {

struct ProPixel {
  double score;
  std::int32_t component;  // global component id, -1 for normal pixels
};

}  // namespace detail

/// Per-Region Overlap: mean fractional coverage of every ground-truth
/// component, as a function of the pooled false-positive rate, integrated
/// (trapezoidal) over FPR in [0, fpr_limit] and normalized by fpr_limit.
/// Prediction at threshold t is score >= t; the sweep descends through all
/// unique scores when there are at most 10000, else through 256 evenly
/// spaced quantiles.
inline double pro(const std::vector<PixelEvalCase>& cases, double fpr_limit = 0.3) {
  if (!(fpr_limit > 0.0) || fpr_limit > 1.0)
    throw value_error("pro: fpr_limit must be in (0, 1]");

  std::vector<detail::ProPixel> pixels;
  std::vector<std::int64_t> comp_sizes;
  std::int64_t total_neg = 0;
  for (const auto& c : cases) {
    c.check();
    Components comps = connected_components(c.gt);
    std::int32_t base = static_cast<std::int32_t>(comp_sizes.size());
    for (const auto& plist : comps.pixels)
      comp_sizes.push_back(static_cast<std::int64_t>(plist.size()));
    for (std::int64_t i = 0; i < c.map.size(); ++i) {
      std::int32_t label = comps.labels[static_cast<std::size_t>(i)];
      pixels.push_back({double(c.map[i]), label ? base + label - 1 : -1});
      if (!label) ++total_neg;
    }
  }
  if (comp_sizes.empty()) throw value_error("pro: no anomalous pixels in ground truth");
  if (total_neg == 0) throw value_error("pro: no normal pixels, FPR undefined");

  std::sort(pixels.begin(), pixels.end(),
            [](const detail::ProPixel& a, const detail::ProPixel& b) { return a.score > b.score; });

  // Candidate thresholds, descending.
  std::vector<double> thresholds;
  thresholds.reserve(pixels.size());
  for (const auto& p : pixels)
    if (thresholds.empty() || p.score != thresholds.back()) thresholds.push_back(p.score);
  if (thresholds.size() > 10000) {
    std::vector<double> quantiles;
    quantiles.reserve(256);
    for (int k = 0; k < 256; ++k) {
      std::size_t at = static_cast<std::size_t>(
          (double(k) / 255.0) * double(thresholds.size() - 1) + 0.5);
      double t = thresholds[at];
      if (quantiles.empty() || t != quantiles.back()) quantiles.push_back(t);
    }
    thresholds = std::move(quantiles);
  }

  // Incremental sweep: points (FPR, PRO) from (0, 0) as the threshold drops.
  std::vector<std::int64_t> hits(comp_sizes.size(), 0);
  const double n_comp = double(comp_sizes.size());
  double pro_sum = 0.0;  // sum over components of hits/|comp|
  std::int64_t fp = 0;
  std::size_t cursor = 0;

  double prev_fpr = 0.0, prev_pro = 0.0, area = 0.0;
  bool done = false;
  for (double t : thresholds) {
    while (cursor < pixels.size() && pixels[cursor].score >= t) {
      const auto& p = pixels[cursor];
      if (p.component >= 0) {
        pro_sum -= double(hits[static_cast<std::size_t>(p.component)]) /
                   double(comp_sizes[static_cast<std::size_t>(p.component)]);
        ++hits[static_cast<std::size_t>(p.component)];
        pro_sum += double(hits[static_cast<std::size_t>(p.component)]) /
                   double(comp_sizes[static_cast<std::size_t>(p.component)]);
      } else {
        ++fp;
      }
      ++cursor;
    }
    double fpr = double(fp) / double(total_neg);
    double pro_t = pro_sum / n_comp;
    if (fpr >= fpr_limit) {
      // Clip the last trapezoid at the integration limit.
      double y_at_limit = prev_pro;
      if (fpr > prev_fpr)
        y_at_limit += (pro_t - prev_pro) * (fpr_limit - prev_fpr) / (fpr - prev_fpr);
      area += (fpr_limit - prev_fpr) * 0.5 * (prev_pro + y_at_limit);
      done = true;
      break;
    }
    area += (fpr - prev_fpr) * 0.5 * (prev_pro + pro_t);
    prev_fpr = fpr;
    prev_pro = pro_t;
  }
  if (!done) {
    // The lowest threshold predicts every pixel anomalous, so FPR reaches 1
    // and the loop above must have crossed any valid limit.
    throw value_error("pro: sweep did not reach fpr_limit");
  }
  return area / fpr_limit;
}

/// The (image AUROC, pixel AUROC, PRO) result triple; absent metrics were
/// not requested.
struct MetricTriple {
  std::optional<double> image_auroc;
  std::optional<double> pixel_auroc;
  std::optional<double> pro_score;
};

struct EvalReport {
  MetricTriple overall;
  std::vector<std::pair<std::string, MetricTriple>> per_category;
  std::int64_t image_count = 0;
  std::int64_t pixel_case_count = 0;
};

/// Tables-style display: values scaled to percent, two decimals, "-" for
/// absent entries, e.g. "(98.00, 88.28, 72.04)".
inline std::string format_triple(const MetricTriple& t) {
  auto fmt = [](const std::optional<double>& v) -> std::string {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
    return buf;
  };
  return "(" + fmt(t.image_auroc) + ", " + fmt(t.pixel_auroc) + ", " + fmt(t.pro_score) + ")";
}

}  // namespace subband_ad
