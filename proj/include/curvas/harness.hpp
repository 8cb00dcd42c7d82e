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

#ifndef CURVAS_HARNESS_HPP
#define CURVAS_HARNESS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "curvas/consensus.hpp"
#include "curvas/dataset.hpp"
#include "curvas/metrics.hpp"
#include "curvas/ranking.hpp"
#include "curvas/vascular.hpp"

namespace curvas {

struct Submission {
  std::string team;
  std::filesystem::path root;
};

enum class VolumeUnit : std::uint8_t { kCm3, kMm3 };

struct EvalConfig {
  std::filesystem::path dataset_root;
  std::vector<Submission> submissions;
  ThresholdSet thresholds;
  std::size_t ece_padding = 5;
  std::size_t ece_bins = 50;
  std::size_t crps_grid = 100;
  std::size_t angle_grid = 1000;
  double angle_smoothing = 1.0;
  double dice_eps = kDiceEpsilon;
  std::size_t bootstrap_iters = 500;
  std::uint64_t seed = 2025;
  double complexity_threshold = 0.30;
  VolumeUnit unit = VolumeUnit::kCm3;
  bool percent = false;
  unsigned workers = 1;
  bool plots = false;

  VascularOptions vascular() const {
    VascularOptions v;
    v.grid_size = angle_grid;
    v.smoothing = angle_smoothing;
    return v;
  }
  EceOptions ece() const { return {ece_padding, ece_bins}; }
};

NLOHMANN_JSON_SERIALIZE_ENUM(VolumeUnit, {{VolumeUnit::kCm3, "cm3"}, {VolumeUnit::kMm3, "mm3"}})

inline void to_json(nlohmann::json& j, const EvalConfig& c) {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : c.submissions) subs.push_back({{"team", s.team}, {"root", s.root.string()}});
  j = {{"dataset_root", c.dataset_root.string()},
       {"submissions", subs},
       {"thresholds", std::vector<double>(c.thresholds.begin(), c.thresholds.end())},
       {"ece_padding", c.ece_padding},
       {"ece_bins", c.ece_bins},
       {"crps_grid", c.crps_grid},
       {"angle_grid", c.angle_grid},
       {"angle_smoothing", c.angle_smoothing},
       {"dice_eps", c.dice_eps},
       {"bootstrap_iters", c.bootstrap_iters},
       {"seed", c.seed},
       {"complexity_threshold", c.complexity_threshold},
       {"unit", c.unit},
       {"percent", c.percent},
       {"workers", c.workers},
       {"plots", c.plots}};
}

inline void from_json(const nlohmann::json& j, EvalConfig& c) {
  EvalConfig d;
  c.dataset_root = j.value("dataset_root", std::string());
  c.submissions.clear();
  for (const auto& s : j.value("submissions", nlohmann::json::array()))
    c.submissions.push_back({s.at("team").get<std::string>(), s.at("root").get<std::string>()});
  if (j.contains("thresholds")) c.thresholds = ThresholdSet(j.at("thresholds").get<std::vector<double>>());
  c.ece_padding = j.value("ece_padding", d.ece_padding);
  c.ece_bins = j.value("ece_bins", d.ece_bins);
  c.crps_grid = j.value("crps_grid", d.crps_grid);
  c.angle_grid = j.value("angle_grid", d.angle_grid);
  c.angle_smoothing = j.value("angle_smoothing", d.angle_smoothing);
  c.dice_eps = j.value("dice_eps", d.dice_eps);
  c.bootstrap_iters = j.value("bootstrap_iters", d.bootstrap_iters);
  c.seed = j.value("seed", d.seed);
  c.complexity_threshold = j.value("complexity_threshold", d.complexity_threshold);
  c.unit = j.value("unit", d.unit);
  c.percent = j.value("percent", d.percent);
  c.workers = j.value("workers", d.workers);
  c.plots = j.value("plots", d.plots);
}

struct GlobalMetrics {
  double dsc = 0.0;
  double thr_dsc = 0.0;
  double mr_ece = 0.0;
  double crps = 0.0;  // cm^3
};

struct MetricReport {
  std::string team;
  std::string case_id;
  bool ok = false;
  std::string error;
  GlobalMetrics global;
  VolumeStats volumes;
  std::array<ViScore, 5> vi;  // kAllVessels order
  double mean_interrater_dsc = std::nan("");
  Vec3 spacing{};
  double voxel_volume = 0.0;

  double axis(Axis a) const {
    switch (a) {
      case Axis::kDsc: return global.dsc;
      case Axis::kThrDsc: return global.thr_dsc;
      case Axis::kMrEce: return global.mr_ece;
      case Axis::kCrps: return global.crps;
      case Axis::kPorta: return vi[0].score;
      case Axis::kSmv: return vi[1].score;
      case Axis::kAorta: return vi[2].score;
      case Axis::kCeliacTrunk: return vi[3].score;
      case Axis::kSma: return vi[4].score;
    }
    return std::nan("");
  }
  AxisValues axes() const {
    AxisValues v{};
    for (std::size_t a = 0; a < kAxisCount; ++a) v[a] = axis(kAllAxes[a]);
    return v;
  }
};

/// All nine axes for one case and submission. Throws on invalid input.
inline MetricReport evaluate_case(const CaseBundle& c, const EvalConfig& cfg) {
  c.validate();
  const ReferenceCase& ref = *c.reference;
  const Prediction& pred = c.prediction;
  MetricReport r;
  r.case_id = ref.case_id;
  r.spacing = ref.geometry().spacing;
  r.voxel_volume = voxel_volume(ref.geometry());
  r.mean_interrater_dsc = mean_interrater_dsc(ref.raters);

  r.global.dsc = dsc(pred.binary, ref.staple, cfg.dice_eps);
  r.global.thr_dsc = thr_dsc(pred.prob, average_annotation(ref.raters), cfg.thresholds, cfg.dice_eps);
  r.global.mr_ece = mr_ece(pred.prob, ref.raters, cfg.ece());
  r.volumes = volume_stats(ref.raters, pred.prob);
  r.global.crps = crps(r.volumes, cfg.crps_grid);
  const auto vopt = cfg.vascular();
  for (std::size_t i = 0; i < kAllVessels.size(); ++i)
    r.vi[i] = vi_score(ref.raters, pred.prob, ref.vessels, kAllVessels[i], cfg.thresholds, vopt);
  r.ok = true;
  return r;
}

struct CohortResult {
  std::vector<std::string> teams;
  std::vector<std::string> case_ids;                // every discovered case
  std::vector<std::vector<MetricReport>> reports;   // [team][case]
  std::vector<double> mean_interrater;              // per case, NaN if unreadable
  std::vector<std::vector<std::vector<double>>> case_agreement;  // loaded cases only
  std::vector<std::string> warnings;

  MetricTable table{{}, {}};                        // ranked cases only
  std::vector<std::size_t> ranked_cases;            // indices into case_ids
  Leaderboard leaderboard;
  BootstrapResult bootstrap;
  SignificanceMatrix significance;
  std::optional<AgreementMatrix> agreement;
  std::vector<std::size_t> high_complexity_cases;   // indices into table cases
  std::optional<Leaderboard> high_complexity;
};

/// Ranked cases are those every team evaluated without error.
inline MetricTable table_from_reports(const std::vector<std::string>& teams,
                                      const std::vector<std::string>& case_ids,
                                      const std::vector<std::vector<MetricReport>>& reports,
                                      std::vector<std::size_t>& ranked) {
  ranked.clear();
  for (std::size_t c = 0; c < case_ids.size(); ++c) {
    bool all = true;
    for (std::size_t t = 0; t < teams.size(); ++t) all = all && reports[t][c].ok;
    if (all) ranked.push_back(c);
  }
  std::vector<std::string> ids;
  for (auto c : ranked) ids.push_back(case_ids[c]);
  MetricTable table(teams, ids);
  for (std::size_t t = 0; t < teams.size(); ++t)
    for (std::size_t k = 0; k < ranked.size(); ++k) table.at(t, k) = reports[t][ranked[k]].axes();
  return table;
}

/// Runs the whole protocol; per-case failures are recorded, not fatal.
inline CohortResult evaluate_cohort(const EvalConfig& cfg) {
  if (cfg.submissions.empty()) throw std::invalid_argument("no submissions configured");
  CohortResult res;
  Discovery disc = discover_cases(cfg.dataset_root);
  res.warnings = disc.warnings;
  for (const auto& s : cfg.submissions) res.teams.push_back(s.team);
  for (const auto& c : disc.complete) res.case_ids.push_back(c.case_id);
  const std::size_t n_cases = disc.complete.size();
  const std::size_t n_teams = cfg.submissions.size();
  res.reports.assign(n_teams, std::vector<MetricReport>(n_cases));
  res.mean_interrater.assign(n_cases, std::nan(""));
  std::vector<std::optional<std::vector<std::vector<double>>>> agreement(n_cases);

  auto process = [&](std::size_t c) {
    CaseFiles files = disc.complete[c];
    std::shared_ptr<const ReferenceCase> ref;
    std::string ref_error;
    try {
      ref = load_reference(files);
      res.mean_interrater[c] = mean_interrater_dsc(ref->raters);
      agreement[c] = case_agreement(*ref);
    } catch (const std::exception& e) {
      ref_error = std::string("reference: ") + e.what();
    }
    for (std::size_t t = 0; t < n_teams; ++t) {
      MetricReport& r = res.reports[t][c];
      r.team = cfg.submissions[t].team;
      r.case_id = files.case_id;
      if (!ref) {
        r.error = ref_error;
        continue;
      }
      try {
        files.pred_binary = prediction_binary_path(cfg.submissions[t].root, files.case_id);
        files.pred_prob = prediction_prob_path(cfg.submissions[t].root, files.case_id);
        CaseBundle bundle{ref, load_prediction(files)};
        r = evaluate_case(bundle, cfg);
        r.team = cfg.submissions[t].team;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };

  const unsigned workers = std::max(1u, cfg.workers);
  if (workers == 1) {
    for (std::size_t c = 0; c < n_cases; ++c) process(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n_cases; c = next++) process(c);
      });
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < n_cases; ++c)
    if (agreement[c]) res.case_agreement.push_back(std::move(*agreement[c]));
  for (std::size_t t = 0; t < n_teams; ++t)
    for (std::size_t c = 0; c < n_cases; ++c)
      if (!res.reports[t][c].ok)
        res.warnings.push_back("team " + res.teams[t] + ", case " + res.case_ids[c] + ": " +
                               res.reports[t][c].error);

  res.table = table_from_reports(res.teams, res.case_ids, res.reports, res.ranked_cases);
  if (res.ranked_cases.empty()) throw std::runtime_error("no case was evaluated for every team");
  res.leaderboard = build_leaderboard(res.table);
  res.bootstrap = bootstrap_ranks(res.table, cfg.bootstrap_iters, cfg.seed, workers);
  res.significance = pairwise_significance(res.table);
  if (!res.case_agreement.empty()) res.agreement = pool_agreement(res.case_agreement);

  std::vector<double> mi;
  for (auto c : res.ranked_cases) mi.push_back(res.mean_interrater[c]);
  res.high_complexity_cases = high_complexity_filter(mi, cfg.complexity_threshold);
  if (!res.high_complexity_cases.empty())
    res.high_complexity = build_leaderboard(res.table.select_cases(res.high_complexity_cases));
  return res;
}

}  // namespace curvas

#endif  // CURVAS_HARNESS_HPP
