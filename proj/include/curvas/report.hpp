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

// Output files of a cohort evaluation.

#ifndef CURVAS_REPORT_HPP
#define CURVAS_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curvas/harness.hpp"

namespace curvas {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

/// Human-facing scaling of a value: percentages for overlap axes and the
/// volume unit for CRPS/volumes.
struct Presentation {
  bool percent = false;
  VolumeUnit unit = VolumeUnit::kCm3;

  double axis(Axis a, double v) const {
    if (percent && (a == Axis::kDsc || a == Axis::kThrDsc)) return 100.0 * v;
    if (a == Axis::kCrps) return volume(v);
    return v;
  }
  double volume(double cm3) const { return unit == VolumeUnit::kMm3 ? 1000.0 * cm3 : cm3; }
};

inline std::string agreement_csv(const AgreementMatrix& m) {
  std::ostringstream os;
  os << "rater";
  for (const auto& l : m.labels) os << ',' << l;
  os << '\n';
  char buf[64];
  for (std::size_t a = 0; a < m.labels.size(); ++a) {
    os << m.labels[a];
    for (std::size_t b = 0; b < m.labels.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.4f±%.4f", m.cells[a][b].mean, m.cells[a][b].std);
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

/// Raw per-case rows (fractions, cm^3); sufficient to rebuild the leaderboard.
inline std::string per_case_csv(const CohortResult& r, const EvalConfig& cfg) {
  // Failure flags: overlap below the 5th percentile of pooled human pairwise
  // Dice; ECE/CRPS above the 90th percentile over all evaluated submissions.
  std::vector<double> human, eces, crpss;
  for (const auto& d : r.case_agreement)
    for (std::size_t a = 0; a < kRaterCount; ++a)
      for (std::size_t b = a + 1; b < kRaterCount; ++b) human.push_back(d[a][b]);
  for (const auto& team : r.reports)
    for (const auto& m : team)
      if (m.ok) {
        eces.push_back(m.global.mr_ece);
        crpss.push_back(m.global.crps);
      }
  const double human_p5 = human.empty() ? std::nan("") : percentile(human, 5.0);
  const double ece_p90 = eces.empty() ? std::nan("") : percentile(eces, 90.0);
  const double crps_p90 = crpss.empty() ? std::nan("") : percentile(crpss, 90.0);

  std::ostringstream os;
  os << "team,case_id,status,dsc,thr_dsc,mr_ece,crps_cm3";
  for (Axis a : {Axis::kPorta, Axis::kSmv, Axis::kAorta, Axis::kCeliacTrunk, Axis::kSma})
    os << ',' << axis_name(a);
  os << ",mean_interrater_dsc,high_complexity,spacing_x,spacing_y,spacing_z,voxel_volume_cm3,"
        "mu_v_cm3,sigma_v_cm3,pred_volume_cm3,dsc_fail,thr_dsc_fail,mr_ece_fail,crps_fail,error\n";
  for (std::size_t t = 0; t < r.teams.size(); ++t)
    for (std::size_t c = 0; c < r.case_ids.size(); ++c) {
      const MetricReport& m = r.reports[t][c];
      os << r.teams[t] << ',' << r.case_ids[c] << ',' << (m.ok ? "ok" : "error");
      const double mi = r.mean_interrater[c];
      if (m.ok) {
        for (Axis a : kAllAxes) os << ',' << fmt_double(m.axis(a));
      } else {
        for (std::size_t a = 0; a < kAxisCount; ++a) os << ",NA";
      }
      os << ',' << fmt_double(mi) << ','
         << (std::isnan(mi) ? "NA" : (mi <= cfg.complexity_threshold ? "1" : "0"));
      if (m.ok) {
        os << ',' << fmt_double(m.spacing[0]) << ',' << fmt_double(m.spacing[1]) << ','
           << fmt_double(m.spacing[2]) << ',' << fmt_double(m.voxel_volume) << ','
           << fmt_double(m.volumes.mu_v) << ',' << fmt_double(m.volumes.sigma_v) << ','
           << fmt_double(m.volumes.pred_volume);
        auto flag = [](bool b) { return b ? ",1" : ",0"; };
        os << flag(m.global.dsc < human_p5) << flag(m.global.thr_dsc < human_p5)
           << flag(m.global.mr_ece > ece_p90) << flag(m.global.crps > crps_p90) << ',';
      } else {
        os << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,";
      }
      std::string err = m.error;
      for (char& ch : err)
        if (ch == ',' || ch == '\n') ch = ';';
      os << err << '\n';
    }
  return os.str();
}

inline nlohmann::json per_case_json(const CohortResult& r, const Presentation& pres) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t t = 0; t < r.teams.size(); ++t)
    for (std::size_t c = 0; c < r.case_ids.size(); ++c) {
      const MetricReport& m = r.reports[t][c];
      nlohmann::json j = {{"team", r.teams[t]}, {"case_id", r.case_ids[c]}};
      if (m.ok) {
        j["dsc"] = pres.axis(Axis::kDsc, m.global.dsc);
        j["thr_dsc"] = pres.axis(Axis::kThrDsc, m.global.thr_dsc);
        j["mr_ece"] = m.global.mr_ece;
        j["crps"] = pres.axis(Axis::kCrps, m.global.crps);
      } else {
        j["error"] = m.error;
      }
      out.push_back(std::move(j));
    }
  return out;
}

inline nlohmann::json vascular_json(const CohortResult& r) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t t = 0; t < r.teams.size(); ++t)
    for (std::size_t c = 0; c < r.case_ids.size(); ++c) {
      const MetricReport& m = r.reports[t][c];
      if (!m.ok) continue;
      for (const ViScore& v : m.vi) {
        for (const PlaneScore& p : v.planes)
          out.push_back({{"team", r.teams[t]},
                         {"case_id", r.case_ids[c]},
                         {"vessel", vessel_name(v.vessel)},
                         {"plane", plane_name(p.plane)},
                         {"w1", p.w1.value},
                         {"gt_mean", p.gt.mean},
                         {"gt_std", p.gt.std},
                         {"pred_mean", p.pred.mean},
                         {"pred_std", p.pred.std},
                         {"gt_angles", p.gt.samples},
                         {"pred_angles", p.pred.samples},
                         {"fallback", fallback_name(p.w1.fallback)}});
        out.push_back({{"team", r.teams[t]},
                       {"case_id", r.case_ids[c]},
                       {"vessel", vessel_name(v.vessel)},
                       {"plane", "mean"},
                       {"w1", v.score}});
      }
    }
  return out;
}

/// Per-team vessel means with ranks, columns ordered like the challenge
/// vascular table.
inline std::string vascular_table_csv(const Leaderboard& lb) {
  const std::array<Axis, 5> cols = {Axis::kPorta, Axis::kAorta, Axis::kSma, Axis::kSmv,
                                    Axis::kCeliacTrunk};
  std::ostringstream os;
  os << "team";
  for (Axis a : cols) os << ',' << axis_name(a) << ',' << axis_name(a) << "_rank";
  os << '\n';
  for (const auto& s : lb.standings) {
    os << s.team;
    for (Axis a : cols)
      os << ',' << fmt_double(s.axis_mean[std::size_t(a)]) << ','
         << fmt_double(s.axis_rank[std::size_t(a)]);
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json leaderboard_json(const Leaderboard& lb, const std::vector<std::string>& cases,
                                       const Presentation& pres) {
  nlohmann::json teams = nlohmann::json::array();
  const auto order = lb.order();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const TeamStanding& s = lb.standings[order[pos]];
    nlohmann::json axes = nlohmann::json::object();
    for (Axis a : kAllAxes)
      axes[std::string(axis_name(a))] = {{"mean", pres.axis(a, s.axis_mean[std::size_t(a)])},
                                         {"rank", s.axis_rank[std::size_t(a)]}};
    teams.push_back({{"position", pos + 1},
                     {"team", s.team},
                     {"axes", axes},
                     {"mean_rank", s.mean_rank},
                     {"rank_std", s.rank_std}});
  }
  return {{"cases", cases},
          {"case_count", cases.size()},
          {"percent", pres.percent},
          {"crps_unit", pres.unit},
          {"teams", teams}};
}

inline std::string bootstrap_csv(const BootstrapResult& b) {
  std::ostringstream os;
  os << "axis,team,rank,frequency\n";
  for (std::size_t a = 0; a < kAxisCount; ++a)
    for (std::size_t t = 0; t < b.teams.size(); ++t)
      for (std::size_t s = 0; s < b.slot_count(); ++s)
        os << axis_name(kAllAxes[a]) << ',' << b.teams[t] << ','
           << fmt_double(BootstrapResult::slot_rank(s)) << ','
           << fmt_double(b.frequency[a][t][s]) << '\n';
  return os.str();
}

inline std::string significance_csv(const SignificanceMatrix& m) {
  std::ostringstream os;
  os << "axis,team_a,team_b,p_value\n";
  for (std::size_t a = 0; a < kAxisCount; ++a)
    for (std::size_t i = 0; i < m.teams.size(); ++i)
      for (std::size_t j = i + 1; j < m.teams.size(); ++j)
        os << axis_name(kAllAxes[a]) << ',' << m.teams[i] << ',' << m.teams[j] << ','
           << fmt_double(m.p[a][i][j]) << '\n';
  return os.str();
}

// Static SVG charts; presentation only.

inline std::string leaderboard_svg(const Leaderboard& lb) {
  const auto order = lb.order();
  const double w = 640, row = 28, top = 40;
  const double h = top + row * double(order.size()) + 20;
  const double n_teams = double(std::max<std::size_t>(1, order.size()));
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<text x=\"10\" y=\"20\" font-size=\"14\">Mean rank over nine axes (lower is better)</text>\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TeamStanding& s = lb.standings[order[i]];
    const double y = top + row * double(i);
    const double bw = 400.0 * s.mean_rank / n_teams;
    os << "<text x=\"10\" y=\"" << y + 16 << "\">" << s.team << "</text>\n"
       << "<rect x=\"150\" y=\"" << y + 4 << "\" width=\"" << bw << "\" height=\"16\" fill=\"#4c72b0\"/>\n"
       << "<text x=\"" << 155 + bw << "\" y=\"" << y + 16 << "\">" << fmt_double(std::round(s.mean_rank * 100) / 100)
       << " ± " << fmt_double(std::round(s.rank_std * 100) / 100) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string bootstrap_svg(const BootstrapResult& b) {
  const std::size_t n = b.teams.size();
  const double cell = 26, label = 110, panel_w = label + cell * double(n) + 20;
  const double panel_h = 30 + cell * double(n) + 20;
  const double w = panel_w * 3, h = panel_h * 3;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const double ox = panel_w * double(a % 3), oy = panel_h * double(a / 3);
    os << "<text x=\"" << ox + 10 << "\" y=\"" << oy + 18 << "\" font-size=\"13\">"
       << axis_name(kAllAxes[a]) << "</text>\n";
    for (std::size_t t = 0; t < n; ++t) {
      const double y = oy + 30 + cell * double(t) + cell / 2;
      os << "<text x=\"" << ox + 10 << "\" y=\"" << y + 4 << "\">" << b.teams[t] << "</text>\n";
      for (std::size_t s = 0; s < b.slot_count(); ++s) {
        const double f = b.frequency[a][t][s];
        if (f <= 0.0) continue;
        const double x = ox + label + cell * (BootstrapResult::slot_rank(s) - 0.5);
        os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << 0.5 * cell * std::sqrt(f)
           << "\" fill=\"#dd8452\" fill-opacity=\"0.8\"/>\n";
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes every artifact of a cohort run into `out_dir`.
inline void write_outputs(const CohortResult& r, const EvalConfig& cfg,
                          const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const Presentation pres{cfg.percent, cfg.unit};
  nlohmann::json cfg_json = cfg;
  write_text(out_dir / "config.json", cfg_json.dump(2) + "\n");
  write_text(out_dir / "per_case.csv", per_case_csv(r, cfg));
  write_text(out_dir / "per_case.json", per_case_json(r, pres).dump(2) + "\n");
  write_text(out_dir / "vascular.json", vascular_json(r).dump(2) + "\n");
  write_text(out_dir / "vascular_table.csv", vascular_table_csv(r.leaderboard));
  write_text(out_dir / "leaderboard.json",
             leaderboard_json(r.leaderboard, r.table.cases(), pres).dump(2) + "\n");
  if (r.high_complexity) {
    std::vector<std::string> ids;
    for (auto i : r.high_complexity_cases) ids.push_back(r.table.cases()[i]);
    nlohmann::json j = leaderboard_json(*r.high_complexity, ids, pres);
    j["complexity_threshold"] = cfg.complexity_threshold;
    write_text(out_dir / "leaderboard_high_complexity.json", j.dump(2) + "\n");
  }
  write_text(out_dir / "bootstrap.csv", bootstrap_csv(r.bootstrap));
  write_text(out_dir / "significance.csv", significance_csv(r.significance));
  if (r.agreement) write_text(out_dir / "agreement_matrix.csv", agreement_csv(*r.agreement));
  nlohmann::json summary = {{"teams", r.teams},
                            {"discovered_cases", r.case_ids.size()},
                            {"ranked_cases", r.ranked_cases.size()},
                            {"high_complexity_cases", r.high_complexity_cases.size()},
                            {"warnings", r.warnings}};
  if (r.agreement)
    summary["interrater_dsc"] = {{"mean", r.agreement->rater_pairs.mean},
                                 {"std", r.agreement->rater_pairs.std}};
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  if (cfg.plots) {
    write_text(out_dir / "leaderboard.svg", leaderboard_svg(r.leaderboard));
    write_text(out_dir / "bootstrap.svg", bootstrap_svg(r.bootstrap));
  }
}

}  // namespace curvas

#endif  // CURVAS_REPORT_HPP
