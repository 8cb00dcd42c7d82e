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

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "curvas/curvas.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

curvas::Submission parse_submission(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    fs::path root(arg);
    std::string team = root.filename().string();
    if (team.empty()) team = root.parent_path().filename().string();
    return {team, root};
  }
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

int run_evaluate(const curvas::EvalConfig& cfg, const fs::path& out) {
  const curvas::CohortResult r = curvas::evaluate_cohort(cfg);
  curvas::write_outputs(r, cfg, out);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  const auto order = r.leaderboard.order();
  std::printf("%zu ranked case(s) of %zu discovered\n", r.ranked_cases.size(), r.case_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = r.leaderboard.standings[order[i]];
    std::printf("%2zu. %-24s mean rank %.2f ± %.2f\n", i + 1, s.team.c_str(), s.mean_rank,
                s.rank_std);
  }
  return 0;
}

int run_consensus(const fs::path& dataset_root, const fs::path& out) {
  const curvas::Discovery disc = curvas::discover_cases(dataset_root);
  for (const auto& w : disc.warnings) std::cerr << "warning: " << w << '\n';
  std::vector<std::vector<std::vector<double>>> cells;
  for (const auto& files : disc.complete) {
    try {
      cells.push_back(curvas::case_agreement(*curvas::load_reference(files)));
    } catch (const std::exception& e) {
      std::cerr << "warning: " << files.case_id << ": " << e.what() << '\n';
    }
  }
  if (cells.empty()) throw std::runtime_error("no readable case under " + dataset_root.string());
  const curvas::AgreementMatrix m = curvas::pool_agreement(cells);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  curvas::write_text(out, curvas::agreement_csv(m));
  std::printf("%zu case(s); mean pairwise rater DSC %.4f ± %.4f\n", cells.size(),
              m.rater_pairs.mean, m.rater_pairs.std);
  return 0;
}

// A spec file is either one PhantomSpec, or
// {"cases": [PhantomSpec...], "teams": [{"name": ..., "prediction": PredictionSpec}...]}.
int run_phantom(const fs::path& spec_path, const fs::path& out) {
  const json j = read_json(spec_path);
  std::vector<curvas::PhantomSpec> specs;
  std::vector<std::pair<std::string, curvas::PredictionSpec>> teams;
  if (j.contains("cases")) {
    specs = j.at("cases").get<std::vector<curvas::PhantomSpec>>();
    for (const auto& t : j.value("teams", json::array()))
      teams.emplace_back(t.at("name").get<std::string>(),
                         t.value("prediction", curvas::PredictionSpec{}));
  } else {
    specs.push_back(j.get<curvas::PhantomSpec>());
  }
  json oracles = json::object();
  for (const auto& spec : specs) {
    const curvas::PhantomCase pc = curvas::generate_case(spec);
    curvas::write_reference(*pc.reference, out / "dataset");
    if (teams.empty()) {
      curvas::write_prediction(spec.case_id, pc.prediction, out / "submission");
    } else {
      for (const auto& [name, pred] : teams)
        curvas::write_prediction(spec.case_id, curvas::make_prediction(*pc.reference, pred),
                                 out / "submissions" / name);
    }
    oracles[spec.case_id] = curvas::oracle_json(pc.oracle);
  }
  curvas::write_text(out / "oracle.json", oracles.dump(2) + "\n");
  std::printf("wrote %zu case(s) to %s\n", specs.size(), out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-rater tumor segmentation and vascular-invasion evaluation"};
  app.require_subcommand(1);

  auto* eval = app.add_subcommand("evaluate", "Evaluate submissions and build leaderboards");
  std::string config_path, dataset_root, out_dir = "results", unit = "cm3";
  std::vector<std::string> submission_args;
  std::size_t iters = 500;
  std::uint64_t seed = 2025;
  double complexity = 0.30;
  unsigned workers = 1;
  bool percent = false, plots = false;
  eval->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  eval->add_option("--dataset-root", dataset_root, "Ground-truth directory");
  eval->add_option("--submission-root", submission_args,
                   "Submission directory, optionally TEAM=DIR; repeatable");
  eval->add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* o_iters = eval->add_option("--bootstrap-iters", iters, "Bootstrap iterations");
  auto* o_seed = eval->add_option("--seed", seed, "Bootstrap seed");
  auto* o_cplx = eval->add_option("--complexity-threshold", complexity,
                                  "Mean pairwise rater DSC cut-off for the high-complexity cohort");
  auto* o_workers = eval->add_option("--workers", workers, "Case-level worker threads");
  auto* o_unit = eval->add_option("--unit", unit, "Reported volume unit")
                     ->check(CLI::IsMember({"cm3", "mm3"}));
  auto* o_percent = eval->add_flag("--percent", percent, "Report overlap metrics in percent");
  auto* o_plots = eval->add_flag("--plots", plots, "Write SVG charts");

  auto* cons = app.add_subcommand("consensus", "Pooled rater/STAPLE agreement matrix");
  std::string cons_root, cons_out = "agreement_matrix.csv";
  cons->add_option("--dataset-root", cons_root, "Ground-truth directory")->required();
  cons->add_option("--out", cons_out, "Output CSV")->capture_default_str();

  auto* phantom = app.add_subcommand("phantom", "Synthetic cases");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("generate", "Write a phantom cohort in the benchmark layout");
  std::string spec_path, gen_out;
  gen->add_option("--spec", spec_path, "Phantom spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) {
      curvas::EvalConfig cfg;
      if (!config_path.empty()) cfg = read_json(config_path).get<curvas::EvalConfig>();
      if (!dataset_root.empty()) cfg.dataset_root = dataset_root;
      if (!submission_args.empty()) {
        cfg.submissions.clear();
        for (const auto& s : submission_args) cfg.submissions.push_back(parse_submission(s));
      }
      if (o_iters->count()) cfg.bootstrap_iters = iters;
      if (o_seed->count()) cfg.seed = seed;
      if (o_cplx->count()) cfg.complexity_threshold = complexity;
      if (o_workers->count()) cfg.workers = workers;
      if (o_unit->count()) cfg.unit = unit == "mm3" ? curvas::VolumeUnit::kMm3 : curvas::VolumeUnit::kCm3;
      if (o_percent->count()) cfg.percent = true;
      if (o_plots->count()) cfg.plots = true;
      if (cfg.dataset_root.empty()) throw std::invalid_argument("--dataset-root is required");
      return run_evaluate(cfg, out_dir);
    }
    if (*cons) return run_consensus(cons_root, cons_out);
    if (*gen) return run_phantom(spec_path, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
