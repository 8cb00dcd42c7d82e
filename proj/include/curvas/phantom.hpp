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

// Synthetic multi-rater cases with known volumes, agreement and contact arcs.

#ifndef CURVAS_PHANTOM_HPP
#define CURVAS_PHANTOM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curvas/consensus.hpp"
#include "curvas/dataset.hpp"
#include "curvas/grid.hpp"
#include "curvas/metrics.hpp"
#include "curvas/nifti.hpp"

namespace curvas {

class PhantomError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Straight tube parallel to array axis `axis`; center and radius in voxels.
struct TubeSpec {
  int label = 1;
  int axis = 2;
  std::array<double, 2> center{0.0, 0.0};  // in-plane coordinates (ascending axes)
  double radius = 10.0;
};

/// Cuff of tumor around a tube over slices [slice_begin, slice_end) along its
/// axis, covering `arc_deg` degrees from `start_deg`.
struct WrapSpec {
  int label = 1;
  double arc_deg = 0.0;
  double start_deg = 0.0;
  std::size_t slice_begin = 0;
  std::size_t slice_end = 0;
  double thickness = 3.0;
};

/// Ellipsoidal tumor body; `jitter` is the per-rater boundary perturbation
/// amplitude in voxels.
struct BlobSpec {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 radii{5.0, 5.0, 5.0};
  double jitter = 0.0;
  int sectors = 4;
};

enum class PredictionMode : std::uint8_t { kAverage, kStaple, kEmpty, kShift };

struct PredictionSpec {
  PredictionMode mode = PredictionMode::kAverage;
  int blur = 0;        // 3x3x3 box-filter passes on the probability map
  int shift = 0;       // voxels along axis 0 (kShift)
};

struct PhantomSpec {
  std::string case_id = "phantom_000";
  Dims dims{64, 64, 32};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::vector<TubeSpec> vessels;
  std::vector<WrapSpec> wraps;
  std::optional<BlobSpec> tumor;
  PredictionSpec prediction;
  std::uint64_t seed = 0;
};

struct PhantomOracle {
  std::array<std::size_t, kRaterCount> rater_voxels{};
  std::array<double, kRaterCount> rater_volumes{};  // cm^3
  double voxel_volume = 0.0;
  std::vector<std::vector<double>> pairwise_dsc;
  double mean_interrater_dsc = 0.0;
  std::vector<WrapSpec> wraps;
};

struct PhantomCase {
  std::shared_ptr<const ReferenceCase> reference;
  Prediction prediction;
  PhantomOracle oracle;

  CaseBundle bundle() const { return {reference, prediction}; }
};

namespace phantom_detail {

inline std::array<int, 2> other_axes(int axis) {
  switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

inline double wrap_angle(double deg) {
  double a = std::fmod(deg, 360.0);
  return a < 0 ? a + 360.0 : a;
}

inline VoxelGrid<float> box_blur(const VoxelGrid<float>& in) {
  const auto& d = in.dims();
  VoxelGrid<float> out(in.geometry());
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        double s = 0.0;
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const long xx = long(x) + dx, yy = long(y) + dy, zz = long(z) + dz;
              if (xx < 0 || yy < 0 || zz < 0 || xx >= long(d[0]) || yy >= long(d[1]) ||
                  zz >= long(d[2]))
                continue;
              s += in(std::size_t(xx), std::size_t(yy), std::size_t(zz));
              ++n;
            }
        out(x, y, z) = float(s / n);
      }
  return out;
}

struct Sector {
  Vec3 dir;
  double cos_half;
  double offset;
};

}  // namespace phantom_detail

/// Rasterized vessel label map.
inline LabelMap rasterize_vessels(const Geometry& g, const std::vector<TubeSpec>& tubes) {
  VoxelGrid<std::uint8_t> lab(g);
  for (const auto& t : tubes) {
    if (t.label < 1 || t.label > 5) throw PhantomError("vessel label must be in 1..5");
    if (t.axis < 0 || t.axis > 2) throw PhantomError("tube axis must be 0, 1 or 2");
    const auto ax = phantom_detail::other_axes(t.axis);
    for (int k = 0; k < 2; ++k)
      if (t.center[k] - t.radius < 0.0 || t.center[k] + t.radius > double(g.dims[ax[k]] - 1))
        throw PhantomError("vessel tube does not fit inside the grid");
    for (std::size_t z = 0; z < g.dims[2]; ++z)
      for (std::size_t y = 0; y < g.dims[1]; ++y)
        for (std::size_t x = 0; x < g.dims[0]; ++x) {
          const std::array<double, 3> p{double(x), double(y), double(z)};
          const double du = p[ax[0]] - t.center[0], dv = p[ax[1]] - t.center[1];
          if (du * du + dv * dv <= t.radius * t.radius) lab(x, y, z) = std::uint8_t(t.label);
        }
  }
  return LabelMap(std::move(lab));
}

/// Cuff voxels: non-vessel voxels whose centre lies within r + thickness of
/// the tube axis and whose area lies at least half inside the angular sector
/// (5x5 in-plane supersampling). Radial inclusion by centre keeps the cuff
/// flush against the rasterized vessel wall.
inline VoxelGrid<std::uint8_t> rasterize_wraps(const Geometry& g,
                                               const std::vector<TubeSpec>& tubes,
                                               const std::vector<WrapSpec>& wraps,
                                               const LabelMap& vessels) {
  VoxelGrid<std::uint8_t> out(g);
  constexpr int kSub = 5;
  // Off-centre sample lattice: no sample lies on a line through a pixel
  // centre or corner, so sector edges never tie.
  constexpr double kOffset[2] = {0.5 + 0.0917, 0.5 - 0.0613};
  for (const auto& w : wraps) {
    if (w.arc_deg < 0.0 || w.arc_deg > 360.0) throw PhantomError("wrap arc must lie in [0,360]");
    if (w.arc_deg == 0.0) continue;
    auto it = std::find_if(tubes.begin(), tubes.end(),
                           [&](const TubeSpec& t) { return t.label == w.label; });
    if (it == tubes.end()) throw PhantomError("wrap refers to an unknown vessel label");
    const TubeSpec& t = *it;
    const auto ax = phantom_detail::other_axes(t.axis);
    if (w.slice_end > g.dims[t.axis] || w.slice_begin >= w.slice_end)
      throw PhantomError("wrap slice range outside the grid");
    const double outer = t.radius + w.thickness;
    for (int k = 0; k < 2; ++k)
      if (t.center[k] - outer < 0.0 || t.center[k] + outer > double(g.dims[ax[k]] - 1))
        throw PhantomError("wrap cuff does not fit inside the grid");
    for (std::size_t z = 0; z < g.dims[2]; ++z)
      for (std::size_t y = 0; y < g.dims[1]; ++y)
        for (std::size_t x = 0; x < g.dims[0]; ++x) {
          const std::array<std::size_t, 3> p{x, y, z};
          if (p[t.axis] < w.slice_begin || p[t.axis] >= w.slice_end) continue;
          if (vessels.grid()(x, y, z) != 0) continue;
          if (std::hypot(double(p[ax[0]]) - t.center[0], double(p[ax[1]]) - t.center[1]) > outer)
            continue;
          int inside = 0;
          for (int su = 0; su < kSub; ++su)
            for (int sv = 0; sv < kSub; ++sv) {
              const double du = double(p[ax[0]]) + (su + kOffset[0]) / kSub - 0.5 - t.center[0];
              const double dv = double(p[ax[1]]) + (sv + kOffset[1]) / kSub - 0.5 - t.center[1];
              const double ang = phantom_detail::wrap_angle(
                  std::atan2(dv * g.spacing[ax[1]], du * g.spacing[ax[0]]) * 180.0 /
                      std::numbers::pi -
                  w.start_deg);
              if (w.arc_deg >= 360.0 || ang <= w.arc_deg) ++inside;
            }
          if (2 * inside >= kSub * kSub) out(x, y, z) = 1;
        }
  }
  return out;
}

/// Five rater masks of an ellipsoid whose boundary is pushed in or out on
/// random angular sectors.
inline std::array<BinaryMask, kRaterCount> rasterize_raters(const Geometry& g,
                                                            const BlobSpec& b,
                                                            std::mt19937_64& rng) {
  const double rmean = (b.radii[0] + b.radii[1] + b.radii[2]) / 3.0;
  for (int k = 0; k < 3; ++k) {
    if (!(b.radii[k] > 0.0)) throw PhantomError("blob radii must be positive");
    // Worst case: every sector pushes outward at the same point.
    const double max_offset = b.jitter * std::max(1, b.sectors) * b.radii[k] / rmean;
    if (b.center[k] - b.radii[k] - max_offset < 0.0 ||
        b.center[k] + b.radii[k] + max_offset > double(g.dims[k] - 1))
      throw PhantomError("tumor blob does not fit inside the grid");
  }
  std::array<BinaryMask, kRaterCount> out;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int r = 0; r < kRaterCount; ++r) {
    std::vector<phantom_detail::Sector> sectors;
    if (b.jitter > 0.0) {
      for (int s = 0; s < b.sectors; ++s) {
        Vec3 d{gauss(rng), gauss(rng), gauss(rng)};
        const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) + 1e-12;
        for (auto& c : d) c /= n;
        const double half = (30.0 + 30.0 * unif(rng)) * std::numbers::pi / 180.0;
        const double off = b.jitter * (2.0 * unif(rng) - 1.0);
        sectors.push_back({d, std::cos(half), off});
      }
    }
    VoxelGrid<std::uint8_t> m(g);
    for (std::size_t z = 0; z < g.dims[2]; ++z)
      for (std::size_t y = 0; y < g.dims[1]; ++y)
        for (std::size_t x = 0; x < g.dims[0]; ++x) {
          const Vec3 q{(double(x) - b.center[0]) / b.radii[0],
                       (double(y) - b.center[1]) / b.radii[1],
                       (double(z) - b.center[2]) / b.radii[2]};
          const double rho = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
          double limit = 1.0;
          if (!sectors.empty() && rho > 0.0) {
            for (const auto& s : sectors) {
              const double c = (q[0] * s.dir[0] + q[1] * s.dir[1] + q[2] * s.dir[2]) / rho;
              if (c >= s.cos_half) limit += s.offset / rmean;
            }
          }
          if (rho <= limit) m(x, y, z) = 1;
        }
    out[r] = BinaryMask(std::move(m));
  }
  return out;
}

/// Synthetic submission derived from the rater masks of a reference case.
inline Prediction make_prediction(const ReferenceCase& ref, const PredictionSpec& spec) {
  const Geometry& g = ref.geometry();
  VoxelGrid<float> prob(g);
  switch (spec.mode) {
    case PredictionMode::kAverage:
      prob = average_annotation(ref.raters).grid();
      break;
    case PredictionMode::kStaple:
      prob = ProbMap::from_mask(ref.staple).grid();
      break;
    case PredictionMode::kEmpty:
      break;
    case PredictionMode::kShift: {
      const auto avg = average_annotation(ref.raters);
      const long s = spec.shift;
      for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
          for (std::size_t x = 0; x < g.dims[0]; ++x) {
            const long src = long(x) - s;
            if (src >= 0 && src < long(g.dims[0])) prob(x, y, z) = avg(std::size_t(src), y, z);
          }
      break;
    }
  }
  for (int i = 0; i < spec.blur; ++i) prob = phantom_detail::box_blur(prob);
  Prediction p;
  p.prob = ProbMap(std::move(prob));
  p.binary = BinaryMask::from(p.prob.grid(), [](float v) { return v >= 0.5f; });
  return p;
}

/// Rasterizes a phantom case and its oracle record. Deterministic per seed.
inline PhantomCase generate_case(const PhantomSpec& spec) {
  Geometry g;
  g.dims = spec.dims;
  g.spacing = spec.spacing;
  g.validate();
  std::mt19937_64 rng(spec.seed);

  const LabelMap vessels = rasterize_vessels(g, spec.vessels);
  const VoxelGrid<std::uint8_t> cuff = rasterize_wraps(g, spec.vessels, spec.wraps, vessels);

  std::array<BinaryMask, kRaterCount> body;
  if (spec.tumor) {
    body = rasterize_raters(g, *spec.tumor, rng);
    // Contact must come from the wraps alone: keep the body two voxels clear
    // of every vessel.
    const auto lab = vessels.grid().values();
    const auto& d = g.dims;
    for (const auto& m : body)
      for (std::size_t z = 0; z < d[2]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
          for (std::size_t x = 0; x < d[0]; ++x) {
            if (!m(x, y, z)) continue;
            for (long dz = -2; dz <= 2; ++dz)
              for (long dy = -2; dy <= 2; ++dy)
                for (long dx = -2; dx <= 2; ++dx) {
                  const long xx = long(x) + dx, yy = long(y) + dy, zz = long(z) + dz;
                  if (xx < 0 || yy < 0 || zz < 0 || xx >= long(d[0]) || yy >= long(d[1]) ||
                      zz >= long(d[2]))
                    continue;
                  if (lab[std::size_t(xx) + d[0] * (std::size_t(yy) + d[1] * std::size_t(zz))])
                    throw PhantomError("tumor blob touches a vessel");
                }
          }
  } else {
    for (auto& m : body) m = BinaryMask::zeros(g);
  }

  auto ref = std::make_shared<ReferenceCase>();
  ref->case_id = spec.case_id;
  ref->vessels = vessels;
  for (int r = 0; r < kRaterCount; ++r) {
    std::vector<std::uint8_t> v(body[r].values().begin(), body[r].values().end());
    const auto c = cuff.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] |= c[i];
    ref->raters[r] = BinaryMask(VoxelGrid<std::uint8_t>(g, std::move(v)));
  }
  bool any = false;
  for (const auto& m : ref->raters) any = any || !m.empty();
  ref->staple = any ? staple(ref->raters).consensus_bin : BinaryMask::zeros(g);

  PhantomCase out;
  out.prediction = make_prediction(*ref, spec.prediction);
  ref->validate();

  PhantomOracle& o = out.oracle;
  o.voxel_volume = voxel_volume(g);
  for (int r = 0; r < kRaterCount; ++r) {
    o.rater_voxels[r] = ref->raters[r].count();
    o.rater_volumes[r] = double(o.rater_voxels[r]) * o.voxel_volume;
  }
  o.pairwise_dsc = pairwise_dice(ref->raters);
  o.mean_interrater_dsc = mean_interrater_dsc(ref->raters);
  o.wraps = spec.wraps;
  out.reference = std::move(ref);
  return out;
}

// JSON (de)serialization.

inline void to_json(nlohmann::json& j, const TubeSpec& t) {
  j = {{"label", t.label}, {"axis", t.axis}, {"center", t.center}, {"radius", t.radius}};
}
inline void from_json(const nlohmann::json& j, TubeSpec& t) {
  t.label = j.value("label", 1);
  t.axis = j.value("axis", 2);
  t.center = j.at("center").get<std::array<double, 2>>();
  t.radius = j.value("radius", 10.0);
}
inline void to_json(nlohmann::json& j, const WrapSpec& w) {
  j = {{"label", w.label},           {"arc_deg", w.arc_deg},     {"start_deg", w.start_deg},
       {"slice_begin", w.slice_begin}, {"slice_end", w.slice_end}, {"thickness", w.thickness}};
}
inline void from_json(const nlohmann::json& j, WrapSpec& w) {
  w.label = j.value("label", 1);
  w.arc_deg = j.value("arc_deg", 0.0);
  w.start_deg = j.value("start_deg", 0.0);
  w.slice_begin = j.at("slice_begin").get<std::size_t>();
  w.slice_end = j.at("slice_end").get<std::size_t>();
  w.thickness = j.value("thickness", 3.0);
}
inline void to_json(nlohmann::json& j, const BlobSpec& b) {
  j = {{"center", b.center}, {"radii", b.radii}, {"jitter", b.jitter}, {"sectors", b.sectors}};
}
inline void from_json(const nlohmann::json& j, BlobSpec& b) {
  b.center = j.at("center").get<Vec3>();
  b.radii = j.at("radii").get<Vec3>();
  b.jitter = j.value("jitter", 0.0);
  b.sectors = j.value("sectors", 4);
}

NLOHMANN_JSON_SERIALIZE_ENUM(PredictionMode, {{PredictionMode::kAverage, "average"},
                                              {PredictionMode::kStaple, "staple"},
                                              {PredictionMode::kEmpty, "empty"},
                                              {PredictionMode::kShift, "shift"}})

inline void to_json(nlohmann::json& j, const PredictionSpec& p) {
  j = {{"mode", p.mode}, {"blur", p.blur}, {"shift", p.shift}};
}
inline void from_json(const nlohmann::json& j, PredictionSpec& p) {
  p.mode = j.value("mode", PredictionMode::kAverage);
  p.blur = j.value("blur", 0);
  p.shift = j.value("shift", 0);
}

inline void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = {{"case_id", s.case_id},       {"dims", s.dims},   {"spacing", s.spacing},
       {"vessels", s.vessels},       {"wraps", s.wraps}, {"prediction", s.prediction},
       {"seed", s.seed}};
  if (s.tumor) j["tumor"] = *s.tumor;
}
inline void from_json(const nlohmann::json& j, PhantomSpec& s) {
  s.case_id = j.value("case_id", std::string("phantom_000"));
  s.dims = j.at("dims").get<Dims>();
  s.spacing = j.value("spacing", Vec3{1.0, 1.0, 1.0});
  s.vessels = j.value("vessels", std::vector<TubeSpec>{});
  s.wraps = j.value("wraps", std::vector<WrapSpec>{});
  if (j.contains("tumor")) s.tumor = j.at("tumor").get<BlobSpec>();
  s.prediction = j.value("prediction", PredictionSpec{});
  s.seed = j.value("seed", std::uint64_t{0});
}

inline nlohmann::json oracle_json(const PhantomOracle& o) {
  return {{"rater_voxels", o.rater_voxels},
          {"rater_volumes_cm3", o.rater_volumes},
          {"voxel_volume_cm3", o.voxel_volume},
          {"pairwise_dsc", o.pairwise_dsc},
          {"mean_interrater_dsc", o.mean_interrater_dsc},
          {"wraps", o.wraps}};
}

/// Writes the ground-truth side in the benchmark layout under
/// `dataset_root/<case_id>/`. annotation_1 carries a parenchyma shell
/// (label 2) around the tumor.
inline void write_reference(const ReferenceCase& ref, const std::filesystem::path& dataset_root) {
  namespace fs = std::filesystem;
  const fs::path dir = dataset_root / ref.case_id;
  fs::create_directories(dir);
  const Geometry& g = ref.geometry();
  for (int k = 0; k < kRaterCount; ++k) {
    VoxelGrid<std::uint8_t> lab = ref.raters[k].grid();
    if (k == 0) {
      const auto& d = g.dims;
      const auto src = ref.raters[k];
      for (std::size_t z = 0; z < d[2]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
          for (std::size_t x = 0; x < d[0]; ++x) {
            if (src(x, y, z)) continue;
            bool near = false;
            for (long dz = -2; dz <= 2 && !near; ++dz)
              for (long dy = -2; dy <= 2 && !near; ++dy)
                for (long dx = -2; dx <= 2 && !near; ++dx) {
                  const long xx = long(x) + dx, yy = long(y) + dy, zz = long(z) + dz;
                  if (xx < 0 || yy < 0 || zz < 0 || xx >= long(d[0]) || yy >= long(d[1]) ||
                      zz >= long(d[2]))
                    continue;
                  near = src(std::size_t(xx), std::size_t(yy), std::size_t(zz)) != 0;
                }
            if (near && !ref.vessels.grid()(x, y, z)) lab(x, y, z) = 2;
          }
    }
    write_grid(dir / ("annotation_" + std::to_string(k + 1) + ".nii.gz"), lab);
  }
  write_grid(dir / "annotation_vascular.nii.gz", ref.vessels.grid());
  write_grid(dir / "annotation_staple.nii.gz", ref.staple.grid());
  VoxelGrid<float> img(g);
  const auto v = ref.vessels.grid().values();
  const auto t = ref.staple.values();
  auto iv = img.values();
  for (std::size_t i = 0; i < iv.size(); ++i) iv[i] = v[i] ? 200.0f : (t[i] ? 80.0f : 40.0f);
  write_grid(dir / "image.nii.gz", img);
}

inline void write_prediction(const std::string& case_id, const Prediction& p,
                             const std::filesystem::path& submission_root) {
  std::filesystem::create_directories(submission_root);
  write_grid(prediction_binary_path(submission_root, case_id), p.binary.grid());
  write_grid(prediction_prob_path(submission_root, case_id), p.prob.grid());
}

}  // namespace curvas

#endif  // CURVAS_PHANTOM_HPP
