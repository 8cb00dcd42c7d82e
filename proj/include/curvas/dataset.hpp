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

#ifndef CURVAS_DATASET_HPP
#define CURVAS_DATASET_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "curvas/grid.hpp"
#include "curvas/nifti.hpp"

namespace curvas {

inline constexpr int kRaterCount = 5;

enum class VesselId : std::uint8_t {
  kPorta = 1,
  kSMV = 2,
  kAorta = 3,
  kCeliacTrunk = 4,
  kSMA = 5,
};

inline constexpr std::array<VesselId, 5> kAllVessels = {
    VesselId::kPorta, VesselId::kSMV, VesselId::kAorta, VesselId::kCeliacTrunk,
    VesselId::kSMA};

inline constexpr std::uint8_t label_of(VesselId v) {
  return static_cast<std::uint8_t>(v);
}

inline VesselId vessel_from_label(int label) {
  if (label < 1 || label > 5)
    throw std::invalid_argument("vessel label " + std::to_string(label) + " not in {1..5}");
  return static_cast<VesselId>(label);
}

inline std::string_view vessel_name(VesselId v) {
  switch (v) {
    case VesselId::kPorta: return "PORTA";
    case VesselId::kSMV: return "SMV";
    case VesselId::kAorta: return "AORTA";
    case VesselId::kCeliacTrunk: return "CELIAC_TRUNK";
    case VesselId::kSMA: return "SMA";
  }
  return "?";
}

/// Integer label map restricted to a declared label set.
class LabelMap {
 public:
  LabelMap() = default;

  LabelMap(const VoxelGrid<float>& src, const std::set<int>& allowed) {
    std::vector<std::uint8_t> out(src.size());
    auto in = src.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const float v = in[i];
      const float r = std::round(v);
      if (r != v || !allowed.contains(static_cast<int>(r)))
        throw std::invalid_argument("label value " + std::to_string(v) +
                                    " outside the declared label set");
      out[i] = static_cast<std::uint8_t>(r);
    }
    grid_ = VoxelGrid<std::uint8_t>(src.geometry(), std::move(out));
  }

  explicit LabelMap(VoxelGrid<std::uint8_t> grid) : grid_(std::move(grid)) {}

  const VoxelGrid<std::uint8_t>& grid() const { return grid_; }
  const Geometry& geometry() const { return grid_.geometry(); }

  BinaryMask select(int label) const {
    return BinaryMask::from(grid_, [label](std::uint8_t v) { return v == label; });
  }

 private:
  VoxelGrid<std::uint8_t> grid_;
};

/// Tumor (label 1) extraction; idempotent on already-binary masks.
inline BinaryMask extract_tumor(const VoxelGrid<float>& annotation) {
  return BinaryMask::from(annotation, [](float v) { return v == 1.0f; });
}

/// Strict {0,1} conversion for submitted binary predictions.
inline BinaryMask to_binary_mask(const VoxelGrid<float>& g) {
  for (float v : g.values())
    if (v != 0.0f && v != 1.0f)
      throw std::invalid_argument("binary prediction holds value " + std::to_string(v));
  return BinaryMask::from(g, [](float v) { return v == 1.0f; });
}

/// Ground-truth side of one study, shared read-only across teams.
struct ReferenceCase {
  std::string case_id;
  std::array<BinaryMask, kRaterCount> raters;
  LabelMap vessels;
  BinaryMask staple;
  std::optional<VoxelGrid<float>> image;

  const Geometry& geometry() const { return staple.geometry(); }

  void validate() const {
    for (const auto& r : raters) require_same_geometry(r.geometry(), geometry(), "rater masks");
    require_same_geometry(vessels.geometry(), geometry(), "vessel map and staple mask");
    if (image) require_same_geometry(image->geometry(), geometry(), "image and annotations");
  }
};

struct Prediction {
  BinaryMask binary;
  ProbMap prob;
};

struct CaseBundle {
  std::shared_ptr<const ReferenceCase> reference;
  Prediction prediction;

  const std::string& case_id() const { return reference->case_id; }

  void validate() const {
    reference->validate();
    require_same_geometry(prediction.binary.geometry(), reference->geometry(),
                          "binary prediction and annotations");
    require_same_geometry(prediction.prob.geometry(), reference->geometry(),
                          "probabilistic prediction and annotations");
  }
};

struct CaseFiles {
  std::string case_id;
  std::array<std::filesystem::path, kRaterCount> raters;
  std::filesystem::path vessels;
  std::filesystem::path staple;
  std::filesystem::path image;  // optional on disk
  std::filesystem::path pred_binary;
  std::filesystem::path pred_prob;
};

struct Discovery {
  std::vector<CaseFiles> complete;
  std::vector<std::string> warnings;
};

inline std::filesystem::path prediction_binary_path(const std::filesystem::path& root,
                                                    const std::string& id) {
  return root / (id + "_binary.nii.gz");
}
inline std::filesystem::path prediction_prob_path(const std::filesystem::path& root,
                                                  const std::string& id) {
  return root / (id + "_prob.nii.gz");
}

/// Scans `dataset_root` for case directories. When `submission_root` is
/// empty only ground-truth files are required. Incomplete cases are skipped
/// with a warning.
inline Discovery discover_cases(const std::filesystem::path& dataset_root,
                                const std::filesystem::path& submission_root = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dataset_root))
    throw std::runtime_error("dataset root is not a directory: " + dataset_root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dataset_root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  Discovery out;
  for (const auto& dir : dirs) {
    CaseFiles c;
    c.case_id = dir.filename().string();
    for (int k = 0; k < kRaterCount; ++k)
      c.raters[k] = dir / ("annotation_" + std::to_string(k + 1) + ".nii.gz");
    c.vessels = dir / "annotation_vascular.nii.gz";
    c.staple = dir / "annotation_staple.nii.gz";
    c.image = dir / "image.nii.gz";

    std::vector<fs::path> required(c.raters.begin(), c.raters.end());
    required.push_back(c.vessels);
    required.push_back(c.staple);
    if (!submission_root.empty()) {
      c.pred_binary = prediction_binary_path(submission_root, c.case_id);
      c.pred_prob = prediction_prob_path(submission_root, c.case_id);
      required.push_back(c.pred_binary);
      required.push_back(c.pred_prob);
    }
    std::vector<std::string> missing;
    for (const auto& p : required)
      if (!fs::exists(p)) missing.push_back(p.filename().string());
    if (!missing.empty()) {
      std::string msg = "case " + c.case_id + " incomplete, missing:";
      for (const auto& m : missing) msg += " " + m;
      out.warnings.push_back(std::move(msg));
      continue;
    }
    out.complete.push_back(std::move(c));
  }
  return out;
}

/// Loads and validates the ground-truth side of a case.
inline std::shared_ptr<const ReferenceCase> load_reference(const CaseFiles& files,
                                                           bool with_image = false) {
  auto ref = std::make_shared<ReferenceCase>();
  ref->case_id = files.case_id;
  for (int k = 0; k < kRaterCount; ++k)
    ref->raters[k] = extract_tumor(load_grid(files.raters[k]));
  ref->vessels = LabelMap(load_grid(files.vessels), {0, 1, 2, 3, 4, 5});
  ref->staple = extract_tumor(load_grid(files.staple));
  if (with_image && std::filesystem::exists(files.image)) ref->image = load_grid(files.image);
  ref->validate();
  return ref;
}

inline Prediction load_prediction(const CaseFiles& files) {
  return Prediction{to_binary_mask(load_grid(files.pred_binary)),
                    ProbMap(load_grid(files.pred_prob))};
}

inline CaseBundle load_case(const CaseFiles& files) {
  CaseBundle b{load_reference(files), load_prediction(files)};
  b.validate();
  return b;
}

}  // namespace curvas

#endif  // CURVAS_DATASET_HPP
