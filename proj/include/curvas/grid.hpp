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

#ifndef CURVAS_GRID_HPP
#define CURVAS_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace curvas {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Dims = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

// Column k of `direction` is the world-space unit vector of array axis k.
struct Geometry {
  Dims dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::array<Vec3, 3> direction{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  Vec3 origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  void validate() const {
    for (int k = 0; k < 3; ++k) {
      if (dims[k] == 0) throw GeometryError("grid dimension must be positive");
      if (!(spacing[k] > 0.0) || !std::isfinite(spacing[k]))
        throw GeometryError("grid spacing must be strictly positive");
    }
  }

  // Spacing/origin compared in mm, direction cosines as unitless values.
  bool matches(const Geometry& other, double mm_tol = 1e-3,
               double dir_tol = 1e-4) const {
    if (dims != other.dims) return false;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(spacing[k] - other.spacing[k]) > mm_tol) return false;
      if (std::abs(origin[k] - other.origin[k]) > mm_tol) return false;
      for (int r = 0; r < 3; ++r)
        if (std::abs(direction[k][r] - other.direction[k][r]) > dir_tol)
          return false;
    }
    return true;
  }
};

/// Voxel volume in cm^3 (native header spacing, no resampling).
inline double voxel_volume(const Geometry& g) {
  g.validate();
  return g.spacing[0] * g.spacing[1] * g.spacing[2] / 1000.0;
}

/// Dense 3-D lattice, x fastest.
template <typename T>
class VoxelGrid {
 public:
  using value_type = T;

  VoxelGrid() = default;

  explicit VoxelGrid(Geometry geometry)
      : geometry_(std::move(geometry)) {
    geometry_.validate();
    data_.assign(geometry_.voxel_count(), T{});
  }

  VoxelGrid(Geometry geometry, std::vector<T> data)
      : geometry_(std::move(geometry)), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
      throw GeometryError("payload length " + std::to_string(data_.size()) +
                          " does not match dims product " +
                          std::to_string(geometry_.voxel_count()));
  }

  const Geometry& geometry() const { return geometry_; }
  const Dims& dims() const { return geometry_.dims; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + geometry_.dims[0] * (y + geometry_.dims[1] * z);
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) {
    return data_[index(x, y, z)];
  }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& storage() const { return data_; }

  template <typename U, typename F>
  VoxelGrid<U> map(F&& f) const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), f);
    return VoxelGrid<U>(geometry_, std::move(out));
  }

 private:
  Geometry geometry_;
  std::vector<T> data_;
};

/// Binary {0,1} mask.
class BinaryMask {
 public:
  BinaryMask() = default;

  explicit BinaryMask(VoxelGrid<std::uint8_t> grid) : grid_(std::move(grid)) {
    for (auto v : grid_.values())
      if (v > 1) throw std::invalid_argument("binary mask holds a value outside {0,1}");
  }

  static BinaryMask zeros(const Geometry& g) {
    return BinaryMask(VoxelGrid<std::uint8_t>(g));
  }

  template <typename T, typename Pred>
  static BinaryMask from(const VoxelGrid<T>& src, Pred&& pred) {
    std::vector<std::uint8_t> out(src.size());
    auto in = src.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pred(in[i]) ? 1 : 0;
    return BinaryMask(VoxelGrid<std::uint8_t>(src.geometry(), std::move(out)));
  }

  const VoxelGrid<std::uint8_t>& grid() const { return grid_; }
  const Geometry& geometry() const { return grid_.geometry(); }
  const Dims& dims() const { return grid_.dims(); }
  std::size_t size() const { return grid_.size(); }
  std::span<const std::uint8_t> values() const { return grid_.values(); }
  std::uint8_t operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return grid_(x, y, z);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : grid_.values()) n += v;
    return n;
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.dims() == b.dims() && a.grid_.storage() == b.grid_.storage();
  }

 private:
  VoxelGrid<std::uint8_t> grid_;
};

/// Probability map with payload in [0,1].
class ProbMap {
 public:
  /// Values within `tol` outside [0,1] are clamped; larger excursions throw.
  static constexpr double kClampTolerance = 1e-4;

  ProbMap() = default;

  explicit ProbMap(VoxelGrid<float> grid, double tol = kClampTolerance)
      : grid_(std::move(grid)) {
    for (auto& v : grid_.values()) {
      if (!std::isfinite(v) || v < -tol || v > 1.0 + tol)
        throw std::invalid_argument("probability value " + std::to_string(v) +
                                    " outside [0,1]");
      v = std::clamp(v, 0.0f, 1.0f);
    }
  }

  static ProbMap from_mask(const BinaryMask& m) {
    return ProbMap(m.grid().map<float>([](std::uint8_t v) { return float(v); }));
  }

  const VoxelGrid<float>& grid() const { return grid_; }
  const Geometry& geometry() const { return grid_.geometry(); }
  const Dims& dims() const { return grid_.dims(); }
  std::size_t size() const { return grid_.size(); }
  std::span<const float> values() const { return grid_.values(); }
  float operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return grid_(x, y, z);
  }

  /// Strict superlevel set {p > t}.
  BinaryMask threshold(double t) const {
    return BinaryMask::from(grid_, [t](float v) { return double(v) > t; });
  }

 private:
  VoxelGrid<float> grid_;
};

inline void require_same_geometry(const Geometry& a, const Geometry& b,
                                  const char* what = "grids") {
  if (!a.matches(b))
    throw GeometryError(std::string("geometry mismatch between ") + what);
}

/// Inclusive voxel box.
struct BoundingBox {
  Dims lo{0, 0, 0};
  Dims hi{0, 0, 0};

  bool contains(std::size_t x, std::size_t y, std::size_t z) const {
    return x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] &&
           z >= lo[2] && z <= hi[2];
  }
  std::size_t voxel_count() const {
    return (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
  }

  BoundingBox padded(std::size_t pad, const Dims& dims) const {
    BoundingBox b;
    for (int k = 0; k < 3; ++k) {
      b.lo[k] = lo[k] >= pad ? lo[k] - pad : 0;
      b.hi[k] = std::min(hi[k] + pad, dims[k] - 1);
    }
    return b;
  }
};

/// Bounding box of the union of foreground voxels; empty result if no mask
/// has foreground.
inline std::pair<bool, BoundingBox> union_bounding_box(
    std::span<const BinaryMask> masks) {
  bool any = false;
  BoundingBox box;
  for (const auto& m : masks) {
    const auto& d = m.dims();
    for (std::size_t z = 0; z < d[2]; ++z)
      for (std::size_t y = 0; y < d[1]; ++y)
        for (std::size_t x = 0; x < d[0]; ++x) {
          if (!m(x, y, z)) continue;
          if (!any) {
            box.lo = box.hi = Dims{x, y, z};
            any = true;
            continue;
          }
          const Dims p{x, y, z};
          for (int k = 0; k < 3; ++k) {
            box.lo[k] = std::min(box.lo[k], p[k]);
            box.hi[k] = std::max(box.hi[k], p[k]);
          }
        }
  }
  return {any, box};
}

template <typename F>
void for_each_voxel(const BoundingBox& b, const Dims& dims, F&& f) {
  for (std::size_t z = b.lo[2]; z <= b.hi[2]; ++z)
    for (std::size_t y = b.lo[1]; y <= b.hi[1]; ++y)
      for (std::size_t x = b.lo[0]; x <= b.hi[0]; ++x)
        f(x + dims[0] * (y + dims[1] * z));
}

}  // namespace curvas

#endif  // CURVAS_GRID_HPP
