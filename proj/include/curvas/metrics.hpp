// Copyright 2026 The curvas-eval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CURVAS_METRICS_HPP
#define CURVAS_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "curvas/grid.hpp"

namespace curvas {

/// Strictly increasing probability thresholds in (0,1).
class ThresholdSet {
 public:
  ThresholdSet() : ThresholdSet({0.10, 0.24, 0.38, 0.52, 0.66, 0.80}) {}

  ThresholdSet(std::initializer_list<double> values)
      : ThresholdSet(std::vector<double>(values)) {}

  explicit ThresholdSet(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("threshold set is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] > 0.0 && values_[i] < 1.0))
        throw std::invalid_argument("thresholds must lie in (0,1)");
      if (i > 0 && !(values_[i] > values_[i - 1]))
        throw std::invalid_argument("thresholds must be strictly increasing");
    }
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::vector<double> values_;
};

struct OverlapCounts {
  std::size_t intersection = 0;
  std::size_t pred = 0;
  std::size_t ref = 0;
};

inline OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& ref) {
  require_same_geometry(pred.geometry(), ref.geometry(), "masks");
  OverlapCounts c;
  const auto a = pred.values();
  const auto b = ref.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.intersection += a[i] & b[i];
    c.pred += a[i];
    c.ref += b[i];
  }
  return c;
}

inline constexpr double kDiceEpsilon = 1e-5;

inline double dice_from_counts(const OverlapCounts& c, double eps = kDiceEpsilon) {
  return 2.0 * double(c.intersection) / (double(c.pred) + double(c.ref) + eps);
}

/// 2|A∩B| / (|A| + |B| + eps). Two empty masks score 0.
inline double dsc(const BinaryMask& pred, const BinaryMask& ref, double eps = kDiceEpsilon) {
  if (!(eps > 0.0)) throw std::invalid_argument("dice epsilon must be positive");
  return dice_from_counts(overlap(pred, ref), eps);
}

/// Voxelwise mean of the rater masks.
inline ProbMap average_annotation(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw std::invalid_argument("no masks to average");
  for (const auto& m : masks)
    require_same_geometry(m.geometry(), masks[0].geometry(), "rater masks");
  std::vector<float> out(masks[0].size(), 0.0f);
  std::vector<unsigned> hits(out.size(), 0);
  for (const auto& m : masks) {
    const auto v = m.values();
    for (std::size_t i = 0; i < v.size(); ++i) hits[i] += v[i];
  }
  const double n = double(masks.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = float(double(hits[i]) / n);
  return ProbMap(VoxelGrid<float>(masks[0].geometry(), std::move(out)));
}

/// Dice averaged over strict binarizations {p > t} and {ā > t}; a threshold
/// where both binarizations are empty contributes 1.
inline double thr_dsc(const ProbMap& prob, const ProbMap& avg_annotation,
                      const ThresholdSet& thresholds = {}, double eps = kDiceEpsilon) {
  require_same_geometry(prob.geometry(), avg_annotation.geometry(), "probability maps");
  const auto p = prob.values();
  const auto a = avg_annotation.values();
  double total = 0.0;
  for (double t : thresholds) {
    OverlapCounts c;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool pi = double(p[i]) > t;
      const bool ai = double(a[i]) > t;
      c.intersection += pi && ai;
      c.pred += pi;
      c.ref += ai;
    }
    total += (c.pred == 0 && c.ref == 0) ? 1.0 : dice_from_counts(c, eps);
  }
  return total / double(thresholds.size());
}

struct EceOptions {
  std::size_t padding = 5;
  std::size_t bins = 50;
};

/// Per-annotator expected calibration error on the padded union bounding box
/// of the annotations, plus their mean.
struct EceBreakdown {
  std::vector<double> per_rater;
  double mean = 0.0;
  BoundingBox region;
};

inline EceBreakdown mr_ece_breakdown(const ProbMap& prob, std::span<const BinaryMask> raters,
                                     const EceOptions& opt = {}) {
  if (opt.bins < 1) throw std::invalid_argument("ECE needs at least one bin");
  if (raters.empty()) throw std::invalid_argument("no annotations for ECE");
  for (const auto& r : raters)
    require_same_geometry(r.geometry(), prob.geometry(), "probability map and annotations");
  auto [any, box] = union_bounding_box(raters);
  if (!any) throw std::invalid_argument("no annotation support");
  const BoundingBox region = box.padded(opt.padding, prob.dims());

  const std::size_t m_bins = opt.bins;
  const std::size_t n_raters = raters.size();
  std::vector<std::size_t> count(m_bins, 0);
  std::vector<double> conf_sum(m_bins, 0.0);
  std::vector<std::size_t> correct(m_bins * n_raters, 0);
  const auto p = prob.values();
  std::size_t total = 0;
  for_each_voxel(region, prob.dims(), [&](std::size_t i) {
    const double pi = p[i];
    const bool fg = pi >= 0.5;
    const double conf = fg ? pi : 1.0 - pi;
    const std::size_t m = std::min(static_cast<std::size_t>(conf * double(m_bins)), m_bins - 1);
    ++count[m];
    conf_sum[m] += conf;
    ++total;
    for (std::size_t k = 0; k < n_raters; ++k)
      correct[m * n_raters + k] += (raters[k].values()[i] != 0) == fg;
  });

  EceBreakdown out;
  out.region = region;
  out.per_rater.assign(n_raters, 0.0);
  for (std::size_t m = 0; m < m_bins; ++m) {
    if (count[m] == 0) continue;
    const double w = double(count[m]) / double(total);
    const double conf = conf_sum[m] / double(count[m]);
    for (std::size_t k = 0; k < n_raters; ++k) {
      const double acc = double(correct[m * n_raters + k]) / double(count[m]);
      out.per_rater[k] += w * std::abs(acc - conf);
    }
  }
  out.mean = std::accumulate(out.per_rater.begin(), out.per_rater.end(), 0.0) / double(n_raters);
  return out;
}

inline double mr_ece(const ProbMap& prob, std::span<const BinaryMask> raters,
                     const EceOptions& opt = {}) {
  return mr_ece_breakdown(prob, raters, opt).mean;
}

/// Foreground volume in cm^3.
inline double expert_volume(const BinaryMask& mask) {
  return double(mask.count()) * voxel_volume(mask.geometry());
}

/// Probability-weighted volume in cm^3.
inline double prob_volume(const ProbMap& prob) {
  double s = 0.0;
  for (float v : prob.values()) s += v;
  return s * voxel_volume(prob.geometry());
}

struct VolumeStats {
  std::vector<double> expert_volumes;
  double mu_v = 0.0;
  double sigma_v = 0.0;  // population std
  double pred_volume = 0.0;

  static VolumeStats from_volumes(std::vector<double> experts, double predicted) {
    if (experts.empty()) throw std::invalid_argument("no expert volumes");
    VolumeStats s;
    s.expert_volumes = std::move(experts);
    const double n = double(s.expert_volumes.size());
    s.mu_v = std::accumulate(s.expert_volumes.begin(), s.expert_volumes.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s.expert_volumes) ss += (v - s.mu_v) * (v - s.mu_v);
    s.sigma_v = std::sqrt(ss / n);
    s.pred_volume = predicted;
    return s;
  }
};

inline VolumeStats volume_stats(std::span<const BinaryMask> raters, const ProbMap& prob) {
  std::vector<double> v;
  for (const auto& r : raters) v.push_back(expert_volume(r));
  return VolumeStats::from_volumes(std::move(v), prob_volume(prob));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Standard normal 99th percentile.
inline constexpr double kZ99 = 2.3263478740408408;

inline double effective_sigma(const VolumeStats& s) {
  return std::max(s.sigma_v, 1e-6 + 1e-6 * std::abs(s.mu_v));
}

/// Discrete CRPS of the predicted volume against N(mu_v, sigma_v^2), using
/// `grid_size` points spanning the 1st..99th percentiles of that Gaussian.
inline double crps(const VolumeStats& s, std::size_t grid_size = 100) {
  if (grid_size < 2) throw std::invalid_argument("CRPS grid needs at least two points");
  const double sigma = effective_sigma(s);
  const double lo = s.mu_v - kZ99 * sigma;
  const double hi = s.mu_v + kZ99 * sigma;
  const double dx = (hi - lo) / double(grid_size - 1);
  double acc = 0.0;
  for (std::size_t l = 0; l < grid_size; ++l) {
    const double x = lo + dx * double(l);
    const double f = normal_cdf((x - s.mu_v) / sigma);
    const double h = x >= s.pred_volume ? 1.0 : 0.0;
    acc += (f - h) * (f - h);
  }
  return dx * acc;
}

}  // namespace curvas

#endif  // CURVAS_METRICS_HPP
