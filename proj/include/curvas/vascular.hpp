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

// Tumor-vessel contact angles and the Wasserstein comparison of rater- and
// threshold-derived angle distributions.
//
// Slice-wise contact angle: the largest 8-connected vessel component of the
// slice is probed by rays cast from its centroid (physical coordinates). A
// ray is in contact when a tumor pixel lies between the point where the ray
// leaves the component and `probe` pixels beyond it. The angle is the
// circumference minus the longest circular run of non-contact rays.

#ifndef CURVAS_VASCULAR_HPP
#define CURVAS_VASCULAR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "curvas/dataset.hpp"
#include "curvas/grid.hpp"
#include "curvas/metrics.hpp"

namespace curvas {

enum class Plane : std::uint8_t { kCoronal, kSagittal, kAxial };

inline constexpr std::array<Plane, 3> kAllPlanes = {Plane::kCoronal, Plane::kSagittal,
                                                    Plane::kAxial};

inline std::string_view plane_name(Plane p) {
  switch (p) {
    case Plane::kCoronal: return "coronal";
    case Plane::kSagittal: return "sagittal";
    case Plane::kAxial: return "axial";
  }
  return "?";
}

/// Array axis held constant within a slice of `p` (canonical orientation).
inline constexpr int slice_axis(Plane p) {
  switch (p) {
    case Plane::kSagittal: return 0;
    case Plane::kCoronal: return 1;
    case Plane::kAxial: return 2;
  }
  return 2;
}

inline constexpr std::array<int, 2> in_plane_axes(Plane p) {
  switch (slice_axis(p)) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

/// Row-major 2-D binary image, u fastest.
struct Slice2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> px;

  Slice2D() = default;
  Slice2D(std::size_t w, std::size_t h) : width(w), height(h), px(w * h, 0) {}

  std::uint8_t& at(std::size_t u, std::size_t v) { return px[u + width * v]; }
  std::uint8_t at(std::size_t u, std::size_t v) const { return px[u + width * v]; }
  bool empty() const {
    return std::none_of(px.begin(), px.end(), [](std::uint8_t x) { return x != 0; });
  }
};

inline Slice2D extract_slice(const BinaryMask& m, Plane p, std::size_t index) {
  const auto& d = m.dims();
  const int a = slice_axis(p);
  const auto [ua, va] = in_plane_axes(p);
  Slice2D s(d[ua], d[va]);
  std::array<std::size_t, 3> c{};
  c[a] = index;
  for (std::size_t v = 0; v < d[va]; ++v)
    for (std::size_t u = 0; u < d[ua]; ++u) {
      c[ua] = u;
      c[va] = v;
      s.at(u, v) = m(c[0], c[1], c[2]);
    }
  return s;
}

struct ContactOptions {
  int rays = 720;
  double probe_pixels = 1.0;  // search depth beyond the vessel wall
  double step_fraction = 0.25;  // ray marching step, fraction of the finest spacing
};

/// 8-connected component labelling; returns a mask of the largest component
/// (first in scan order on ties).
inline Slice2D largest_component(const Slice2D& img) {
  std::vector<int> label(img.px.size(), 0);
  std::vector<std::size_t> stack;
  int best_label = 0;
  std::size_t best_size = 0;
  int next = 0;
  for (std::size_t start = 0; start < img.px.size(); ++start) {
    if (!img.px[start] || label[start]) continue;
    ++next;
    std::size_t size = 0;
    stack.push_back(start);
    label[start] = next;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const long u = long(i % img.width), v = long(i / img.width);
      for (long dv = -1; dv <= 1; ++dv)
        for (long du = -1; du <= 1; ++du) {
          const long nu = u + du, nv = v + dv;
          if (nu < 0 || nv < 0 || nu >= long(img.width) || nv >= long(img.height)) continue;
          const std::size_t j = std::size_t(nu) + img.width * std::size_t(nv);
          if (img.px[j] && !label[j]) {
            label[j] = next;
            stack.push_back(j);
          }
        }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
  }
  Slice2D out(img.width, img.height);
  for (std::size_t i = 0; i < label.size(); ++i) out.px[i] = label[i] == best_label && best_label;
  return out;
}

/// Vessel-only part of the contact computation for one slice: for every ray,
/// the tumor-mask samples a tumor must fill for that ray to count as contact.
class SliceContactProfile {
 public:
  SliceContactProfile() = default;

  SliceContactProfile(const Slice2D& vessel, std::array<double, 2> spacing,
                      const ContactOptions& opt = {}) {
    if (opt.rays < 1) throw std::invalid_argument("contact profile needs at least one ray");
    rays_ = opt.rays;
    width_ = vessel.width;
    const Slice2D comp = largest_component(vessel);
    double cu = 0.0, cv = 0.0;
    std::size_t n = 0;
    for (std::size_t v = 0; v < comp.height; ++v)
      for (std::size_t u = 0; u < comp.width; ++u)
        if (comp.at(u, v)) {
          cu += double(u) * spacing[0];
          cv += double(v) * spacing[1];
          ++n;
        }
    if (n == 0) return;
    cu /= double(n);
    cv /= double(n);
    double radius = 0.0;
    for (std::size_t v = 0; v < comp.height; ++v)
      for (std::size_t u = 0; u < comp.width; ++u)
        if (comp.at(u, v))
          radius = std::max(radius, std::hypot(double(u) * spacing[0] - cu,
                                               double(v) * spacing[1] - cv));
    const double coarse = std::max(spacing[0], spacing[1]);
    const double step = opt.step_fraction * std::min(spacing[0], spacing[1]);
    radius += coarse;
    const double probe = opt.probe_pixels * coarse;

    auto pixel_at = [&](double s, double cs, double sn) -> std::optional<std::size_t> {
      const double pu = std::floor((cu + s * cs) / spacing[0] + 0.5);
      const double pv = std::floor((cv + s * sn) / spacing[1] + 0.5);
      if (pu < 0 || pv < 0 || pu >= double(comp.width) || pv >= double(comp.height))
        return std::nullopt;
      return std::size_t(pu) + comp.width * std::size_t(pv);
    };

    offsets_.push_back(0);
    for (int k = 0; k < rays_; ++k) {
      const double theta = 2.0 * std::numbers::pi * (double(k) + 0.5) / double(rays_);
      const double cs = std::cos(theta), sn = std::sin(theta);
      std::optional<double> exit;
      for (double s = 0.0; s <= radius; s += step) {
        auto p = pixel_at(s, cs, sn);
        if (p && comp.px[*p]) exit = s;
      }
      if (exit) {
        for (double s = *exit; s <= *exit + probe + 1e-9; s += step) {
          // Bilinear sample of the tumor mask: the contact edge falls midway
          // between the last touching and the first non-touching pixel.
          const double x = (cu + s * cs) / spacing[0], y = (cv + s * sn) / spacing[1];
          const double x0 = std::floor(x), y0 = std::floor(y);
          const double fx = x - x0, fy = y - y0;
          Sample smp{};
          int j = 0;
          for (int dv = 0; dv < 2; ++dv)
            for (int du = 0; du < 2; ++du) {
              const double pu = x0 + du, pv = y0 + dv;
              const double w = (du ? fx : 1.0 - fx) * (dv ? fy : 1.0 - fy);
              if (pu < 0 || pv < 0 || pu >= double(comp.width) || pv >= double(comp.height) ||
                  w <= 0.0)
                continue;
              smp.pixel[j] = std::size_t(pu) + comp.width * std::size_t(pv);
              smp.weight[j++] = w;
            }
          smp.count = j;
          if (j > 0) probes_.push_back(smp);
        }
      }
      offsets_.push_back(probes_.size());
    }
  }

  bool empty() const { return probes_.empty(); }
  int rays() const { return rays_; }

  /// Per-ray contact flags for a tumor given as a pixel predicate.
  template <typename TumorAt>
  std::vector<bool> contact_rays(TumorAt&& tumor_at) const {
    std::vector<bool> hit(std::size_t(rays_), false);
    for (int k = 0; k < rays_ && !probes_.empty(); ++k)
      for (std::size_t i = offsets_[k]; i < offsets_[k + 1] && !hit[k]; ++i) {
        const Sample& smp = probes_[i];
        double f = 0.0;
        for (int j = 0; j < smp.count; ++j)
          if (tumor_at(smp.pixel[j] % width_, smp.pixel[j] / width_)) f += smp.weight[j];
        hit[k] = f >= 0.5;
      }
    return hit;
  }

  template <typename TumorAt>
  double angle(TumorAt&& tumor_at) const {
    if (probes_.empty()) return 0.0;
    return covered_arc(contact_rays(tumor_at));
  }

  /// 360 minus the longest circular run of rays without contact.
  static double covered_arc(const std::vector<bool>& hit) {
    const std::size_t n = hit.size();
    std::size_t contacts = std::count(hit.begin(), hit.end(), true);
    if (contacts == 0) return 0.0;
    if (contacts == n) return 360.0;
    std::size_t best = 0, run = 0;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      run = hit[i % n] ? 0 : run + 1;
      best = std::max(best, std::min(run, n));
    }
    return 360.0 * double(n - best) / double(n);
  }

 private:
  int rays_ = 0;
  std::size_t width_ = 0;
  std::vector<std::size_t> offsets_;
  struct Sample {
    std::size_t pixel[4];
    double weight[4];
    int count;
  };
  std::vector<Sample> probes_;
};

/// Contact angle in degrees for one slice pair.
inline double contact_angle_slice(const Slice2D& tumor, const Slice2D& vessel,
                                  std::array<double, 2> pixel_spacing,
                                  const ContactOptions& opt = {}) {
  if (tumor.width != vessel.width || tumor.height != vessel.height)
    throw std::invalid_argument("tumor and vessel slices differ in shape");
  if (tumor.empty() || vessel.empty()) return 0.0;
  SliceContactProfile prof(vessel, pixel_spacing, opt);
  return prof.angle([&](std::size_t u, std::size_t v) { return tumor.at(u, v) != 0; });
}

/// Per-slice contact profiles of one vessel along one plane. Slices without
/// vessel, or excluded by `relevant`, contribute angle 0.
class VesselContactProfile {
 public:
  VesselContactProfile(const BinaryMask& vessel, Plane plane, const ContactOptions& opt = {},
                       const BinaryMask* relevant = nullptr)
      : plane_(plane), geometry_(vessel.geometry()) {
    if (relevant) require_same_geometry(relevant->geometry(), geometry_, "vessel and tumor masks");
    const auto& d = vessel.dims();
    const int a = slice_axis(plane);
    const auto [ua, va] = in_plane_axes(plane);
    const std::array<double, 2> sp{geometry_.spacing[ua], geometry_.spacing[va]};
    for (std::size_t s = 0; s < d[a]; ++s) {
      Slice2D vs = extract_slice(vessel, plane, s);
      if (vs.empty()) continue;
      if (relevant && extract_slice(*relevant, plane, s).empty()) continue;
      SliceContactProfile prof(vs, sp, opt);
      if (!prof.empty()) slices_.push_back({s, std::move(prof)});
    }
  }

  Plane plane() const { return plane_; }

  double max_contact_angle(const BinaryMask& tumor) const {
    require_same_geometry(tumor.geometry(), geometry_, "vessel and tumor masks");
    const int a = slice_axis(plane_);
    const auto [ua, va] = in_plane_axes(plane_);
    double best = 0.0;
    for (const auto& [index, prof] : slices_) {
      std::array<std::size_t, 3> c{};
      c[a] = index;
      const double ang = prof.angle([&](std::size_t u, std::size_t v) {
        auto cc = c;
        cc[ua] = u;
        cc[va] = v;
        return tumor(cc[0], cc[1], cc[2]) != 0;
      });
      best = std::max(best, ang);
      if (best >= 360.0) break;
    }
    return best;
  }

 private:
  struct Entry {
    std::size_t index;
    SliceContactProfile profile;
  };
  Plane plane_;
  Geometry geometry_;
  std::vector<Entry> slices_;
};

/// Maximum slice-wise contact angle along `plane`.
inline double max_contact_angle(const BinaryMask& tumor, const BinaryMask& vessel, Plane plane,
                                const ContactOptions& opt = {}) {
  require_same_geometry(tumor.geometry(), vessel.geometry(), "vessel and tumor masks");
  if (tumor.empty() || vessel.empty()) return 0.0;
  return VesselContactProfile(vessel, plane, opt, &tumor).max_contact_angle(tumor);
}

/// Angles in degrees with their population mean and std.
struct AngleDistribution {
  std::vector<double> samples;
  double mean = 0.0;
  double std = 0.0;

  static AngleDistribution from_samples(std::vector<double> s) {
    if (s.empty()) throw std::invalid_argument("angle distribution needs samples");
    AngleDistribution d;
    d.samples = std::move(s);
    for (double v : d.samples) d.mean += v;
    d.mean /= double(d.samples.size());
    double ss = 0.0;
    for (double v : d.samples) ss += (v - d.mean) * (v - d.mean);
    d.std = std::sqrt(ss / double(d.samples.size()));
    return d;
  }

  std::size_t sample_count() const { return samples.size(); }

  /// True when no sample shows any contact.
  bool no_contact() const {
    return std::all_of(samples.begin(), samples.end(), [](double v) { return v <= 0.0; });
  }
};

inline AngleDistribution gt_angle_distribution(std::span<const BinaryMask> raters,
                                               const VesselContactProfile& vessel) {
  std::vector<double> s;
  for (const auto& r : raters) s.push_back(vessel.max_contact_angle(r));
  return AngleDistribution::from_samples(std::move(s));
}

inline AngleDistribution gt_angle_distribution(std::span<const BinaryMask> raters,
                                               const BinaryMask& vessel, Plane plane,
                                               const ContactOptions& opt = {}) {
  return gt_angle_distribution(raters, VesselContactProfile(vessel, plane, opt));
}

inline AngleDistribution pred_angle_distribution(const ProbMap& prob,
                                                 const VesselContactProfile& vessel,
                                                 const ThresholdSet& thresholds = {}) {
  std::vector<double> s;
  for (double t : thresholds) s.push_back(vessel.max_contact_angle(prob.threshold(t)));
  return AngleDistribution::from_samples(std::move(s));
}

inline AngleDistribution pred_angle_distribution(const ProbMap& prob, const BinaryMask& vessel,
                                                 Plane plane, const ThresholdSet& thresholds = {},
                                                 const ContactOptions& opt = {}) {
  return pred_angle_distribution(prob, VesselContactProfile(vessel, plane, opt), thresholds);
}

/// Unit-mass weights on a uniform [0,360] grid, or an all-zero vector
/// flagged empty.
struct SampledAngles {
  std::vector<double> weights;
  bool empty = true;
  double mean = 0.0;  // sample mean of the source distribution
};

inline constexpr double kAngleMax = 360.0;

inline double angle_grid_step(std::size_t grid_size) {
  return kAngleMax / double(grid_size - 1);
}

/// Sanitizes raw weights (non-finite or negative → 0) and normalizes them to
/// unit mass. An all-zero result is returned as-is and flagged empty.
inline SampledAngles sanitize_weights(std::vector<double> w, double mean) {
  double total = 0.0;
  for (double& v : w) {
    if (!std::isfinite(v) || v < 0.0) v = 0.0;
    total += v;
  }
  SampledAngles out;
  out.mean = mean;
  if (total > 0.0 && std::isfinite(total)) {
    for (double& v : w) v /= total;
    out.empty = false;
  }
  out.weights = std::move(w);
  return out;
}

/// Density of N(mean, (std + smoothing)^2) sampled on `grid_size` points of
/// [0,360], sanitized and normalized. Mass outside the window is dropped.
/// A distribution with no contact at all is treated as empty.
inline SampledAngles sample_gaussian_on_grid(const AngleDistribution& dist,
                                             std::size_t grid_size = 1000,
                                             double smoothing = 1.0) {
  if (grid_size < 2) throw std::invalid_argument("angle grid needs at least two points");
  if (dist.no_contact()) return {std::vector<double>(grid_size, 0.0), true, dist.mean};
  const double sigma = dist.std + smoothing;
  const double dz = angle_grid_step(grid_size);
  std::vector<double> w(grid_size);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t n = 0; n < grid_size; ++n) {
    const double z = (double(n) * dz - dist.mean) / sigma;
    w[n] = norm * std::exp(-0.5 * z * z);
  }
  return sanitize_weights(std::move(w), dist.mean);
}

enum class Fallback : std::uint8_t {
  kNone,
  kBothEmpty,
  kOneEmptyDegenerate,
  kOneEmptyPenalty,
};

inline std::string_view fallback_name(Fallback f) {
  switch (f) {
    case Fallback::kNone: return "none";
    case Fallback::kBothEmpty: return "both_empty";
    case Fallback::kOneEmptyDegenerate: return "one_empty_degenerate";
    case Fallback::kOneEmptyPenalty: return "one_empty_penalty";
  }
  return "?";
}

struct W1Result {
  double value = 0.0;
  Fallback fallback = Fallback::kNone;
};

inline constexpr double kDegenerateMass = 0.999;
inline constexpr double kEmptyPenalty = 360.0;

inline bool is_degenerate(const SampledAngles& s, double mass = kDegenerateMass) {
  if (s.empty) return false;
  return *std::max_element(s.weights.begin(), s.weights.end()) >= mass;
}

/// Discrete 1-D Wasserstein distance Δz·Σ|P_n − Q_n| with the empty-input
/// fallbacks.
inline W1Result w1_discrete(const SampledAngles& p, const SampledAngles& q, double delta_z,
                            double degenerate_mass = kDegenerateMass) {
  if (p.weights.size() != q.weights.size())
    throw std::invalid_argument("W1 inputs differ in length");
  if (p.empty && q.empty) return {0.0, Fallback::kBothEmpty};
  if (p.empty || q.empty) {
    const SampledAngles& full = p.empty ? q : p;
    if (is_degenerate(full, degenerate_mass))
      return {std::abs(full.mean - 0.0), Fallback::kOneEmptyDegenerate};
    return {kEmptyPenalty, Fallback::kOneEmptyPenalty};
  }
  double cp = 0.0, cq = 0.0, acc = 0.0;
  for (std::size_t n = 0; n < p.weights.size(); ++n) {
    cp += p.weights[n];
    cq += q.weights[n];
    acc += std::abs(cp - cq);
  }
  return {delta_z * acc, Fallback::kNone};
}

struct VascularOptions {
  ContactOptions contact;
  std::size_t grid_size = 1000;
  double smoothing = 1.0;
  double degenerate_mass = kDegenerateMass;
};

struct PlaneScore {
  Plane plane = Plane::kAxial;
  AngleDistribution gt;
  AngleDistribution pred;
  W1Result w1;
};

struct ViScore {
  VesselId vessel = VesselId::kPorta;
  std::array<PlaneScore, 3> planes;
  double score = 0.0;  // mean of the plane-wise W1
};

/// Vascular invasion score for one vessel: plane-wise W1 between the rater
/// and the thresholded-prediction angle distributions, averaged over planes.
inline ViScore vi_score(std::span<const BinaryMask> raters, const ProbMap& prob,
                        const LabelMap& vessels, VesselId vessel,
                        const ThresholdSet& thresholds = {}, const VascularOptions& opt = {}) {
  const BinaryMask vmask = vessels.select(label_of(vessel));
  // Slices with no tumor in any rater mask or binarization cannot score.
  std::vector<std::uint8_t> any(vmask.size(), 0);
  for (const auto& r : raters) {
    require_same_geometry(r.geometry(), vmask.geometry(), "rater masks and vessel map");
    const auto v = r.values();
    for (std::size_t i = 0; i < any.size(); ++i) any[i] |= v[i];
  }
  require_same_geometry(prob.geometry(), vmask.geometry(), "prediction and vessel map");
  const auto pv = prob.values();
  for (std::size_t i = 0; i < any.size(); ++i) any[i] |= double(pv[i]) > thresholds[0];
  const BinaryMask relevant(VoxelGrid<std::uint8_t>(vmask.geometry(), std::move(any)));

  const double dz = angle_grid_step(opt.grid_size);
  std::vector<BinaryMask> binarized;
  for (double t : thresholds) binarized.push_back(prob.threshold(t));

  ViScore out;
  out.vessel = vessel;
  double total = 0.0;
  for (std::size_t i = 0; i < kAllPlanes.size(); ++i) {
    const Plane plane = kAllPlanes[i];
    PlaneScore& ps = out.planes[i];
    ps.plane = plane;
    std::vector<double> gt, pred;
    if (vmask.empty() || relevant.empty()) {
      gt.assign(raters.size(), 0.0);
      pred.assign(thresholds.size(), 0.0);
    } else {
      const VesselContactProfile prof(vmask, plane, opt.contact, &relevant);
      for (const auto& r : raters) gt.push_back(prof.max_contact_angle(r));
      for (const auto& b : binarized) pred.push_back(prof.max_contact_angle(b));
    }
    ps.gt = AngleDistribution::from_samples(std::move(gt));
    ps.pred = AngleDistribution::from_samples(std::move(pred));
    ps.w1 = w1_discrete(sample_gaussian_on_grid(ps.gt, opt.grid_size, opt.smoothing),
                        sample_gaussian_on_grid(ps.pred, opt.grid_size, opt.smoothing), dz,
                        opt.degenerate_mass);
    total += ps.w1.value;
  }
  out.score = total / double(kAllPlanes.size());
  return out;
}

inline ViScore vi_score(const CaseBundle& c, VesselId vessel, const ThresholdSet& thresholds = {},
                        const VascularOptions& opt = {}) {
  return vi_score(c.reference->raters, c.prediction.prob, c.reference->vessels, vessel,
                  thresholds, opt);
}

}  // namespace curvas

#endif  // CURVAS_VASCULAR_HPP
