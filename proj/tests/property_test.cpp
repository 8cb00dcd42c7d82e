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

#include <random>

#include <gtest/gtest.h>

#include "property_checks.hpp"

namespace curvas {
namespace {

using namespace testing;

constexpr int kTrials = 200;

TEST(Property, DiceSymmetricAndBounded) { EXPECT_EQ(dice_violations(kTrials, 1), 0u); }
TEST(Property, ThrDiceBounded) { EXPECT_EQ(thr_dice_violations(kTrials, 2), 0u); }
TEST(Property, EceIgnoresVoxelsOutsidePaddedBox) {
  EXPECT_EQ(ece_locality_violations(kTrials, 3), 0u);
}
TEST(Property, RanksFollowTeamPermutation) {
  EXPECT_EQ(rank_permutation_violations(kTrials, 4), 0u);
}
TEST(Property, RanksInvariantUnderMonotoneMaps) {
  EXPECT_EQ(rank_monotone_violations(kTrials, 5), 0u);
}
TEST(Property, StapleUnanimity) { EXPECT_EQ(staple_unanimity_violations(kTrials, 6), 0u); }
TEST(Property, StapleRaterPermutationInvariant) {
  EXPECT_EQ(staple_permutation_violations(kTrials, 7), 0u);
}

// A check that can fail must fail on a broken input.
TEST(Property, EceLocalityCheckIsSensitive) {
  const Geometry g = geometry(24, 24, 24, {1, 1, 1});
  std::array<BinaryMask, kRaterCount> raters;
  for (auto& r : raters) r = box(g, {8, 8, 8}, {16, 16, 16});
  VoxelGrid<float> p(g);
  const double base = mr_ece(ProbMap(p), raters);
  p(4, 4, 4) = 0.9f;  // inside the padded box
  EXPECT_NE(mr_ece(ProbMap(p), raters), base);
}

TEST(Property, ContactAngleBounded) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < kTrials; ++i) {
    Slice2D ves(20, 20), tum(20, 20);
    for (std::size_t k = 0; k < ves.px.size(); ++k) {
      ves.px[k] = u(rng) < 0.2;
      tum.px[k] = !ves.px[k] && u(rng) < 0.2;
    }
    const double a = contact_angle_slice(tum, ves, {1.0, 1.0});
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 360.0);
  }
}

}  // namespace
}  // namespace curvas
