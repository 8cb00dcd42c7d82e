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

// Shared fixtures for the test binaries.

#ifndef CURVAS_TESTS_SUPPORT_HPP
#define CURVAS_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "curvas/curvas.hpp"

namespace curvas::testing {

inline Geometry geometry(std::size_t nx, std::size_t ny, std::size_t nz,
                         Vec3 spacing = {1.0, 1.0, 1.0}) {
  Geometry g;
  g.dims = {nx, ny, nz};
  g.spacing = spacing;
  return g;
}

inline BinaryMask mask(const Geometry& g, std::vector<std::uint8_t> v) {
  return BinaryMask(VoxelGrid<std::uint8_t>(g, std::move(v)));
}

/// Masks over a 1-D line of voxels given as "0110"-style strings.
inline BinaryMask line(const std::string& bits) {
  std::vector<std::uint8_t> v;
  for (char c : bits) v.push_back(c == '1');
  return mask(geometry(bits.size(), 1, 1), std::move(v));
}

inline ProbMap prob(const Geometry& g, std::vector<float> v) {
  return ProbMap(VoxelGrid<float>(g, std::move(v)));
}

inline BinaryMask random_mask(const Geometry& g, std::mt19937_64& rng, double density) {
  std::bernoulli_distribution b(density);
  std::vector<std::uint8_t> v(g.voxel_count());
  for (auto& x : v) x = b(rng);
  return mask(g, std::move(v));
}

/// Axis-aligned box [lo, hi) set to 1.
inline BinaryMask box(const Geometry& g, Dims lo, Dims hi) {
  VoxelGrid<std::uint8_t> m(g);
  for (std::size_t z = lo[2]; z < hi[2]; ++z)
    for (std::size_t y = lo[1]; y < hi[1]; ++y)
      for (std::size_t x = lo[0]; x < hi[0]; ++x) m(x, y, z) = 1;
  return BinaryMask(std::move(m));
}

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("curvas_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace curvas::testing

#endif  // CURVAS_TESTS_SUPPORT_HPP
