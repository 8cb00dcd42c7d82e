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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace curvas {
namespace {

PhantomSpec base_spec() {
  PhantomSpec s;
  s.case_id = "ph";
  s.dims = {48, 48, 20};
  s.spacing = {0.8, 0.8, 2.0};
  s.vessels = {{1, 2, {14.3, 24.7}, 10.0}, {3, 2, {40.0, 8.0}, 3.0}};
  s.tumor = BlobSpec{{34.0, 32.0, 10.0}, {5.0, 5.0, 4.0}, 1.0, 4};
  s.seed = 5;
  return s;
}

bool same(const BinaryMask& a, const BinaryMask& b) {
  return std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

TEST(Phantom, DeterministicPerSeed) {
  const auto a = generate_case(base_spec());
  const auto b = generate_case(base_spec());
  for (int k = 0; k < kRaterCount; ++k) EXPECT_TRUE(same(a.reference->raters[k], b.reference->raters[k]));
  EXPECT_TRUE(std::equal(a.prediction.prob.values().begin(), a.prediction.prob.values().end(),
                         b.prediction.prob.values().begin()));
  auto other = base_spec();
  other.seed = 6;
  const auto c = generate_case(other);
  bool differs = false;
  for (int k = 0; k < kRaterCount; ++k) differs = differs || !same(a.reference->raters[k], c.reference->raters[k]);
  EXPECT_TRUE(differs);
}

TEST(Phantom, OracleVolumesMatchMetric) {
  const auto p = generate_case(base_spec());
  const auto v = volume_stats(p.reference->raters, p.prediction.prob);
  EXPECT_DOUBLE_EQ(p.oracle.voxel_volume, 0.8 * 0.8 * 2.0 / 1000.0);
  for (int k = 0; k < kRaterCount; ++k) {
    EXPECT_EQ(p.oracle.rater_voxels[k], p.reference->raters[k].count());
    EXPECT_NEAR(p.oracle.rater_volumes[k], v.expert_volumes[k], 1e-12);
  }
  EXPECT_NEAR(p.oracle.mean_interrater_dsc, mean_interrater_dsc(p.reference->raters), 1e-12);
}

TEST(Phantom, NoJitterMeansFullAgreement) {
  auto s = base_spec();
  s.tumor->jitter = 0.0;
  const auto p = generate_case(s);
  EXPECT_NEAR(p.oracle.mean_interrater_dsc, 1.0, 1e-6);
  EXPECT_NEAR(dsc(p.prediction.binary, p.reference->staple), 1.0, 1e-6);
}

TEST(Phantom, JitterLowersAgreement) {
  auto s = base_spec();
  s.tumor->jitter = 1.5;
  s.tumor->sectors = 2;
  const auto p = generate_case(s);
  EXPECT_LT(p.oracle.mean_interrater_dsc, 1.0);
  EXPECT_GT(p.oracle.mean_interrater_dsc, 0.3);
}

TEST(Phantom, NoWrapMeansNoContact) {
  const auto p = generate_case(base_spec());
  const auto v = vi_score(p.bundle(), VesselId::kPorta);
  for (const auto& pl : v.planes) EXPECT_TRUE(pl.gt.no_contact());
  EXPECT_EQ(v.score, 0.0);
}

TEST(Phantom, WrapAngleRecovered) {
  auto s = base_spec();
  s.wraps = {{1, 90.0, 30.0, 6, 14, 3.0}};
  const auto p = generate_case(s);
  const auto gt = gt_angle_distribution(p.reference->raters, p.reference->vessels.select(1),
                                        Plane::kAxial);
  for (double a : gt.samples) EXPECT_NEAR(a, 90.0, 5.0);
  EXPECT_EQ(p.oracle.wraps.size(), 1u);
}

TEST(Phantom, BodyStaysClearOfVessels) {
  const auto p = generate_case(base_spec());
  const auto ves = p.reference->vessels.grid().values();
  for (const auto& r : p.reference->raters) {
    const auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_FALSE(v[i] && ves[i]);
  }
}

TEST(Phantom, PredictionModes) {
  auto s = base_spec();
  s.prediction.mode = PredictionMode::kEmpty;
  EXPECT_TRUE(generate_case(s).prediction.binary.empty());
  s.prediction.mode = PredictionMode::kStaple;
  const auto st = generate_case(s);
  EXPECT_TRUE(same(st.prediction.binary, st.reference->staple));
  s.prediction = {PredictionMode::kShift, 0, 3};
  const auto sh = generate_case(s);
  EXPECT_LT(dsc(sh.prediction.binary, sh.reference->staple), 0.9);
  s.prediction = {PredictionMode::kAverage, 1, 0};
  const auto bl = generate_case(s);
  for (float v : bl.prediction.prob.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Phantom, SpecErrors) {
  auto s = base_spec();
  s.wraps = {{7, 90.0, 0.0, 2, 4, 3.0}};
  EXPECT_THROW(generate_case(s), PhantomError);
  s.wraps = {{1, 400.0, 0.0, 2, 4, 3.0}};
  EXPECT_THROW(generate_case(s), PhantomError);
  s.wraps = {{1, 90.0, 0.0, 4, 4, 3.0}};
  EXPECT_THROW(generate_case(s), PhantomError);
  s.wraps = {{1, 90.0, 0.0, 2, 99, 3.0}};
  EXPECT_THROW(generate_case(s), PhantomError);
  s = base_spec();
  s.tumor->center = {14.0, 24.0, 10.0};
  EXPECT_THROW(generate_case(s), PhantomError);
  s = base_spec();
  s.tumor->radii = {30.0, 5.0, 4.0};
  EXPECT_THROW(generate_case(s), PhantomError);
}

TEST(Phantom, SpecJsonRoundTrip) {
  auto s = base_spec();
  s.wraps = {{1, 45.0, 10.0, 2, 8, 2.5}};
  s.prediction = {PredictionMode::kShift, 1, 2};
  const nlohmann::json j = s;
  const auto back = j.get<PhantomSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(Phantom, WrittenCaseLoadsBack) {
  testing::TempDir tmp;
  auto s = base_spec();
  s.wraps = {{1, 120.0, 0.0, 6, 14, 3.0}};
  const auto p = generate_case(s);
  write_reference(*p.reference, tmp.path() / "data");
  write_prediction(s.case_id, p.prediction, tmp.path() / "sub");
  const auto disc = discover_cases(tmp.path() / "data");
  ASSERT_EQ(disc.complete.size(), 1u);
  const auto ref = load_reference(disc.complete[0]);
  for (int k = 0; k < kRaterCount; ++k) EXPECT_TRUE(same(ref->raters[k], p.reference->raters[k]));
  EXPECT_TRUE(same(ref->staple, p.reference->staple));
  EXPECT_TRUE(std::equal(ref->vessels.grid().values().begin(), ref->vessels.grid().values().end(),
                         p.reference->vessels.grid().values().begin()));
}

}  // namespace
}  // namespace curvas
