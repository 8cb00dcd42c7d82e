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

#ifndef CURVAS_RANKING_HPP
#define CURVAS_RANKING_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "curvas/metrics.hpp"

namespace curvas {

enum class Axis : std::uint8_t {
  kDsc,
  kThrDsc,
  kMrEce,
  kCrps,
  kPorta,
  kSmv,
  kAorta,
  kCeliacTrunk,
  kSma,
};

inline constexpr std::size_t kAxisCount = 9;

inline constexpr std::array<Axis, kAxisCount> kAllAxes = {
    Axis::kDsc,   Axis::kThrDsc, Axis::kMrEce,       Axis::kCrps, Axis::kPorta,
    Axis::kSmv,   Axis::kAorta,  Axis::kCeliacTrunk, Axis::kSma};

inline std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::kDsc: return "dsc";
    case Axis::kThrDsc: return "thr_dsc";
    case Axis::kMrEce: return "mr_ece";
    case Axis::kCrps: return "crps";
    case Axis::kPorta: return "w1_porta";
    case Axis::kSmv: return "w1_smv";
    case Axis::kAorta: return "w1_aorta";
    case Axis::kCeliacTrunk: return "w1_celiac_trunk";
    case Axis::kSma: return "w1_sma";
  }
  return "?";
}

enum class Direction : std::uint8_t { kHigherBetter, kLowerBetter };

inline constexpr Direction axis_direction(Axis a) {
  return (a == Axis::kDsc || a == Axis::kThrDsc) ? Direction::kHigherBetter
                                                 : Direction::kLowerBetter;
}

/// Ranks with 1 = best; tied values share the average of their positions.
inline std::vector<double> rank_axis(std::span<const double> values, Direction dir) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    return dir == Direction::kHigherBetter ? values[a] > values[b] : values[a] < values[b];
  };
  std::stable_sort(order.begin(), order.end(), better);
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

using AxisValues = std::array<double, kAxisCount>;

/// teams × cases × axes.
class MetricTable {
 public:
  MetricTable(std::vector<std::string> teams, std::vector<std::string> cases)
      : teams_(std::move(teams)),
        cases_(std::move(cases)),
        values_(teams_.size() * cases_.size(), AxisValues{}) {}

  const std::vector<std::string>& teams() const { return teams_; }
  const std::vector<std::string>& cases() const { return cases_; }
  std::size_t team_count() const { return teams_.size(); }
  std::size_t case_count() const { return cases_.size(); }

  AxisValues& at(std::size_t team, std::size_t c) { return values_[team * cases_.size() + c]; }
  const AxisValues& at(std::size_t team, std::size_t c) const {
    return values_[team * cases_.size() + c];
  }
  double value(std::size_t team, std::size_t c, Axis a) const {
    return at(team, c)[static_cast<std::size_t>(a)];
  }

  void validate() const {
    if (teams_.empty()) throw std::invalid_argument("metric table has no teams");
    if (cases_.empty()) throw std::invalid_argument("metric table has no cases");
    for (std::size_t t = 0; t < teams_.size(); ++t)
      for (std::size_t c = 0; c < cases_.size(); ++c)
        for (double v : at(t, c))
          if (!std::isfinite(v))
            throw std::invalid_argument("missing metric cell for team " + teams_[t] +
                                        ", case " + cases_[c]);
  }

  /// Same teams restricted to the given case indices (in that order).
  MetricTable select_cases(std::span<const std::size_t> idx) const {
    std::vector<std::string> ids;
    for (auto i : idx) ids.push_back(cases_.at(i));
    MetricTable out(teams_, std::move(ids));
    for (std::size_t t = 0; t < teams_.size(); ++t)
      for (std::size_t k = 0; k < idx.size(); ++k) out.at(t, k) = at(t, idx[k]);
    return out;
  }

  /// Per-team per-axis mean over a case resample (indices may repeat).
  std::vector<AxisValues> axis_means(std::span<const std::size_t> idx) const {
    std::vector<AxisValues> m(teams_.size(), AxisValues{});
    for (std::size_t t = 0; t < teams_.size(); ++t) {
      for (auto c : idx)
        for (std::size_t a = 0; a < kAxisCount; ++a) m[t][a] += at(t, c)[a];
      for (auto& v : m[t]) v /= double(idx.size());
    }
    return m;
  }

  std::vector<AxisValues> axis_means() const {
    std::vector<std::size_t> all(cases_.size());
    std::iota(all.begin(), all.end(), 0);
    return axis_means(all);
  }

 private:
  std::vector<std::string> teams_;
  std::vector<std::string> cases_;
  std::vector<AxisValues> values_;
};

struct TeamStanding {
  std::string team;
  AxisValues axis_mean{};
  AxisValues axis_rank{};
  double mean_rank = 0.0;
  double rank_std = 0.0;  // population std over the nine axis ranks
};

struct Leaderboard {
  std::vector<TeamStanding> standings;  // input team order

  /// Team indices sorted by mean rank (stable on ties).
  std::vector<std::size_t> order() const {
    std::vector<std::size_t> o(standings.size());
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      return standings[a].mean_rank < standings[b].mean_rank;
    });
    return o;
  }
};

/// Ranks precomputed per-axis team values (e.g. reported challenge means).
inline Leaderboard leaderboard_from_means(std::span<const std::string> teams,
                                          std::span<const AxisValues> means) {
  if (teams.size() != means.size()) throw std::invalid_argument("team/value count mismatch");
  Leaderboard lb;
  for (std::size_t t = 0; t < teams.size(); ++t) lb.standings.push_back({teams[t], means[t]});
  std::vector<double> col(teams.size());
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    for (std::size_t t = 0; t < teams.size(); ++t) col[t] = means[t][a];
    const auto r = rank_axis(col, axis_direction(kAllAxes[a]));
    for (std::size_t t = 0; t < teams.size(); ++t) lb.standings[t].axis_rank[a] = r[t];
  }
  for (auto& s : lb.standings) {
    double m = 0.0;
    for (double r : s.axis_rank) m += r;
    m /= double(kAxisCount);
    double ss = 0.0;
    for (double r : s.axis_rank) ss += (r - m) * (r - m);
    s.mean_rank = m;
    s.rank_std = std::sqrt(ss / double(kAxisCount));
  }
  return lb;
}

/// Case-mean per axis → per-axis ranks → mean and std of the nine ranks.
inline Leaderboard build_leaderboard(const MetricTable& table) {
  table.validate();
  const auto means = table.axis_means();
  return leaderboard_from_means(table.teams(), means);
}

/// Rank-frequency tensor. Ranks are stored on a half-integer lattice
/// (1, 1.5, ..., n) so averaged ties are representable.
struct BootstrapResult {
  std::vector<std::string> teams;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  // [axis][team][slot], slot = 2 * rank - 2
  std::vector<std::vector<std::vector<double>>> frequency;

  std::size_t slot_count() const { return teams.empty() ? 0 : 2 * teams.size() - 1; }
  static double slot_rank(std::size_t slot) { return 1.0 + 0.5 * double(slot); }
  double rank_frequency(Axis a, std::size_t team, double rank) const {
    return frequency[std::size_t(a)][team][std::size_t(std::lround(2.0 * rank - 2.0))];
  }
};

/// Independent generator for one bootstrap iteration.
inline std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t iteration) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(iteration),
                    std::uint32_t(iteration >> 32)};
  return std::mt19937_64(seq);
}

/// Resamples cases with replacement (shared across teams and axes) and
/// tallies per-axis ranks. Output does not depend on `workers`.
inline BootstrapResult bootstrap_ranks(const MetricTable& table, std::size_t iterations,
                                       std::uint64_t seed, unsigned workers = 1) {
  table.validate();
  const std::size_t n_teams = table.team_count();
  const std::size_t n_cases = table.case_count();
  BootstrapResult res;
  res.teams = table.teams();
  res.iterations = iterations;
  res.seed = seed;
  const std::size_t slots = res.slot_count();

  // slot per (iteration, axis, team)
  std::vector<std::uint16_t> tally(iterations * kAxisCount * n_teams, 0);
  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(n_cases);
    std::vector<double> col(n_teams);
    for (std::size_t it = begin; it < end; ++it) {
      auto rng = iteration_rng(seed, it);
      std::uniform_int_distribution<std::size_t> pick(0, n_cases - 1);
      for (auto& i : idx) i = pick(rng);
      const auto means = table.axis_means(idx);
      for (std::size_t a = 0; a < kAxisCount; ++a) {
        for (std::size_t t = 0; t < n_teams; ++t) col[t] = means[t][a];
        const auto r = rank_axis(col, axis_direction(kAllAxes[a]));
        for (std::size_t t = 0; t < n_teams; ++t)
          tally[(it * kAxisCount + a) * n_teams + t] =
              static_cast<std::uint16_t>(std::lround(2.0 * r[t] - 2.0));
      }
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || iterations < 2) {
    run(0, iterations);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (iterations + workers - 1) / workers;
    for (std::size_t b = 0; b < iterations; b += chunk)
      pool.emplace_back(run, b, std::min(iterations, b + chunk));
    for (auto& th : pool) th.join();
  }

  res.frequency.assign(kAxisCount, std::vector<std::vector<double>>(
                                       n_teams, std::vector<double>(slots, 0.0)));
  std::vector<std::size_t> counts(kAxisCount * n_teams * slots, 0);
  for (std::size_t it = 0; it < iterations; ++it)
    for (std::size_t a = 0; a < kAxisCount; ++a)
      for (std::size_t t = 0; t < n_teams; ++t)
        ++counts[(a * n_teams + t) * slots + tally[(it * kAxisCount + a) * n_teams + t]];
  if (iterations > 0)
    for (std::size_t a = 0; a < kAxisCount; ++a)
      for (std::size_t t = 0; t < n_teams; ++t)
        for (std::size_t s = 0; s < slots; ++s)
          res.frequency[a][t][s] =
              double(counts[(a * n_teams + t) * slots + s]) / double(iterations);
  return res;
}

/// Minimum number of non-zero paired differences for a p-value.
inline constexpr std::size_t kWilcoxonMinPairs = 5;
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped;
/// exact null distribution up to 25 pairs, tie- and continuity-corrected
/// normal approximation above. Returns nullopt with fewer than 5 pairs left.
inline std::optional<double> wilcoxon_signed_rank(std::span<const double> x,
                                                  std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon inputs differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
  const std::size_t n = d.size();
  if (n < kWilcoxonMinPairs) return std::nullopt;

  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  const auto ranks = rank_axis(mag, Direction::kLowerBetter);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += ranks[i];

  if (n <= kWilcoxonExactLimit) {
    // Subset-sum counts over doubled (integer) ranks.
    std::vector<long> r2(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) total += (r2[i] = std::lround(2.0 * ranks[i]));
    std::vector<double> ways(std::size_t(total) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (long r : r2) {
      for (long s = reach; s >= 0; --s)
        if (ways[s] != 0.0) ways[s + r] += ways[s];
      reach += r;
    }
    const long w2 = std::lround(2.0 * w_plus);
    double lower = 0.0, upper = 0.0, all = 0.0;
    for (long s = 0; s <= total; ++s) {
      all += ways[s];
      if (s <= w2) lower += ways[s];
      if (s >= w2) upper += ways[s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
  }

  const double nn = double(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = double(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  const double dev = std::max(0.0, std::abs(w_plus - mean) - 0.5);
  const double z = dev / std::sqrt(var);
  return std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
}

/// Per-axis team×team p-values; NaN marks "insufficient data".
struct SignificanceMatrix {
  std::vector<std::string> teams;
  std::vector<std::vector<std::vector<double>>> p;  // [axis][a][b]
};

inline SignificanceMatrix pairwise_significance(const MetricTable& table) {
  table.validate();
  const std::size_t n = table.team_count();
  SignificanceMatrix m;
  m.teams = table.teams();
  m.p.assign(kAxisCount, std::vector<std::vector<double>>(n, std::vector<double>(n, 1.0)));
  std::vector<double> xa(table.case_count()), xb(table.case_count());
  for (std::size_t a = 0; a < kAxisCount; ++a)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        for (std::size_t c = 0; c < table.case_count(); ++c) {
          xa[c] = table.at(i, c)[a];
          xb[c] = table.at(j, c)[a];
        }
        const auto pv = wilcoxon_signed_rank(xa, xb);
        m.p[a][i][j] = m.p[a][j][i] = pv ? *pv : std::nan("");
      }
  return m;
}

/// Indices of cases whose mean inter-rater Dice is at or below `threshold`.
inline std::vector<std::size_t> high_complexity_filter(std::span<const double> mean_interrater,
                                                       double threshold = 0.30) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mean_interrater.size(); ++i)
    if (mean_interrater[i] <= threshold) out.push_back(i);
  return out;
}

/// Percentile with linear interpolation between closest ranks (q in [0,100]).
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * double(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace curvas

#endif  // CURVAS_RANKING_HPP
