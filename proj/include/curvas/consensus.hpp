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

#ifndef CURVAS_CONSENSUS_HPP
#define CURVAS_CONSENSUS_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curvas/dataset.hpp"
#include "curvas/grid.hpp"
#include "curvas/metrics.hpp"

namespace curvas {

struct StapleOptions {
  int max_iter = 100;
  double tol = 1e-6;
  double init_performance = 0.99;
};

struct StapleResult {
  ProbMap consensus_prob;
  BinaryMask consensus_bin;
  std::vector<double> sensitivities;
  std::vector<double> specificities;
  double prior = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Binary STAPLE (EM over rater sensitivity/specificity) restricted to the
/// union bounding box of the masks plus a one-voxel margin.
///
/// Voxels sharing the same rater decision pattern share a posterior, so the
/// EM runs over at most 2^R pattern classes weighted by their voxel counts.
inline StapleResult staple(std::span<const BinaryMask> masks, const StapleOptions& opt = {}) {
  const std::size_t r = masks.size();
  if (r == 0 || r > 16) throw std::invalid_argument("staple supports 1..16 raters");
  for (const auto& m : masks)
    require_same_geometry(m.geometry(), masks[0].geometry(), "rater masks");
  auto [any, tight] = union_bounding_box(masks);
  if (!any) throw std::invalid_argument("no foreground to fuse");
  const Dims& dims = masks[0].dims();
  const BoundingBox box = tight.padded(1, dims);

  const std::size_t n_patterns = std::size_t{1} << r;
  std::vector<double> pattern_count(n_patterns, 0.0);
  double label_sum = 0.0, voxels = 0.0;
  for_each_voxel(box, dims, [&](std::size_t i) {
    std::size_t pat = 0;
    for (std::size_t j = 0; j < r; ++j)
      if (masks[j].values()[i]) pat |= std::size_t{1} << j;
    pattern_count[pat] += 1.0;
    label_sum += double(std::popcount(pat));
    voxels += 1.0;
  });

  constexpr double kParamFloor = 1e-12;
  const double prior = std::clamp(label_sum / (voxels * double(r)), 1e-6, 1.0 - 1e-6);
  std::vector<double> sens(r, opt.init_performance), spec(r, opt.init_performance);
  std::vector<double> w(n_patterns, 0.0);

  auto e_step = [&] {
    for (std::size_t pat = 0; pat < n_patterns; ++pat) {
      double log_a = std::log(prior), log_b = std::log1p(-prior);
      for (std::size_t j = 0; j < r; ++j) {
        const bool d = (pat >> j) & 1u;
        log_a += std::log(d ? sens[j] : 1.0 - sens[j]);
        log_b += std::log(d ? 1.0 - spec[j] : spec[j]);
      }
      const double m = std::max(log_a, log_b);
      const double a = std::exp(log_a - m), b = std::exp(log_b - m);
      w[pat] = a / (a + b);
    }
  };

  StapleResult res;
  res.prior = prior;
  for (int it = 0; it < opt.max_iter; ++it) {
    e_step();
    double change = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      double tp = 0.0, fg = 0.0, tn = 0.0, bg = 0.0;
      for (std::size_t pat = 0; pat < n_patterns; ++pat) {
        const double c = pattern_count[pat];
        if (c == 0.0) continue;
        const bool d = (pat >> j) & 1u;
        fg += c * w[pat];
        bg += c * (1.0 - w[pat]);
        if (d) tp += c * w[pat];
        else tn += c * (1.0 - w[pat]);
      }
      const double new_sens =
          fg > 0.0 ? std::clamp(tp / fg, kParamFloor, 1.0 - kParamFloor) : sens[j];
      const double new_spec =
          bg > 0.0 ? std::clamp(tn / bg, kParamFloor, 1.0 - kParamFloor) : spec[j];
      change = std::max({change, std::abs(new_sens - sens[j]), std::abs(new_spec - spec[j])});
      sens[j] = new_sens;
      spec[j] = new_spec;
    }
    res.iterations = it + 1;
    if (change < opt.tol) {
      res.converged = true;
      break;
    }
  }
  e_step();

  std::vector<float> post(masks[0].size(), 0.0f);
  std::vector<std::uint8_t> bin(masks[0].size(), 0);
  for_each_voxel(box, dims, [&](std::size_t i) {
    std::size_t pat = 0;
    for (std::size_t j = 0; j < r; ++j)
      if (masks[j].values()[i]) pat |= std::size_t{1} << j;
    post[i] = static_cast<float>(w[pat]);
    bin[i] = w[pat] >= 0.5 ? 1 : 0;
  });
  const Geometry& g = masks[0].geometry();
  res.consensus_prob = ProbMap(VoxelGrid<float>(g, std::move(post)));
  res.consensus_bin = BinaryMask(VoxelGrid<std::uint8_t>(g, std::move(bin)));
  res.sensitivities = std::move(sens);
  res.specificities = std::move(spec);
  return res;
}

/// Dice for every pair of masks, computed in one pass. Diagonal is 1.
inline std::vector<std::vector<double>> pairwise_dice(std::span<const BinaryMask> masks,
                                                      double eps = kDiceEpsilon) {
  const std::size_t n = masks.size();
  for (const auto& m : masks)
    require_same_geometry(m.geometry(), masks[0].geometry(), "masks");
  std::vector<std::size_t> counts(n, 0);
  std::vector<std::size_t> inter(n * n, 0);
  const std::size_t v = n ? masks[0].size() : 0;
  std::vector<const std::uint8_t*> ptr(n);
  for (std::size_t a = 0; a < n; ++a) ptr[a] = masks[a].values().data();
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t a = 0; a < n; ++a) {
      if (!ptr[a][i]) continue;
      ++counts[a];
      for (std::size_t b = a + 1; b < n; ++b) inter[a * n + b] += ptr[b][i];
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 1.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = dice_from_counts({inter[a * n + b], counts[a], counts[b]}, eps);
      out[a][b] = out[b][a] = d;
    }
  return out;
}

/// Mean of the pairwise rater Dice values (consensus excluded).
inline double mean_interrater_dsc(std::span<const BinaryMask> raters) {
  if (raters.size() < 2) throw std::invalid_argument("need at least two raters");
  const auto d = pairwise_dice(raters);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < d.size(); ++a)
    for (std::size_t b = a + 1; b < d.size(); ++b, ++n) s += d[a][b];
  return s / double(n);
}

inline double mean_interrater_dsc(const ReferenceCase& ref) {
  return mean_interrater_dsc(ref.raters);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) return {};
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / double(v.size()))};
}

/// Rater1..RaterN plus the consensus as the last row/column. Each off-diagonal
/// cell pools the per-case Dice values of that pair.
struct AgreementMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<MeanStd>> cells;
  MeanStd rater_pairs;  // pooled over every rater-rater pair and case
  std::size_t cases = 0;
};

/// Pools per-case Dice matrices (raters first, consensus last).
inline AgreementMatrix pool_agreement(std::span<const std::vector<std::vector<double>>> per_case) {
  if (per_case.empty()) throw std::invalid_argument("agreement needs at least one case");
  const std::size_t n = kRaterCount + 1;
  std::vector<std::vector<std::vector<double>>> pools(n, std::vector<std::vector<double>>(n));
  std::vector<double> rater_pool;
  for (const auto& d : per_case) {
    if (d.size() != n) throw std::invalid_argument("agreement expects 5 raters plus consensus");
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        pools[a][b].push_back(d[a][b]);
        if (b < kRaterCount) rater_pool.push_back(d[a][b]);
      }
  }
  AgreementMatrix m;
  m.cases = per_case.size();
  for (int k = 1; k <= kRaterCount; ++k) m.labels.push_back("Rater" + std::to_string(k));
  m.labels.push_back("STAPLE");
  m.cells.assign(n, std::vector<MeanStd>(n, MeanStd{1.0, 0.0}));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) m.cells[a][b] = m.cells[b][a] = mean_std(pools[a][b]);
  m.rater_pairs = mean_std(rater_pool);
  return m;
}

/// Dice of every rater pair and of each rater against the consensus.
inline std::vector<std::vector<double>> case_agreement(const ReferenceCase& c) {
  std::vector<BinaryMask> masks(c.raters.begin(), c.raters.end());
  masks.push_back(c.staple);
  return pairwise_dice(masks);
}

inline AgreementMatrix pairwise_agreement(std::span<const ReferenceCase* const> cases) {
  std::vector<std::vector<std::vector<double>>> per_case;
  for (const ReferenceCase* c : cases) per_case.push_back(case_agreement(*c));
  return pool_agreement(per_case);
}

}  // namespace curvas

#endif  // CURVAS_CONSENSUS_HPP
