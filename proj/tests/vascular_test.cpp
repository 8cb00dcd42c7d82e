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

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace curvas {
namespace {

using testing::geometry;

constexpr std::size_t kSide = 48;

Slice2D disk_ring(double cx, double cy, double lo, double hi) {
  Slice2D s(kSide, kSide);
  for (std::size_t v = 0; v < kSide; ++v)
    for (std::size_t u = 0; u < kSide; ++u) {
      const double d = std::hypot(double(u) - cx, double(v) - cy);
      s.at(u, v) = d > lo && d <= hi;
    }
  return s;
}

Slice2D disk(double cx, double cy, double r) { return disk_ring(cx, cy, -1.0, r); }

double phantom_arc(double r, std::array<double, 2> c, double arc, double start) {
  Geometry g;
  g.dims = {kSide, kSide, 1};
  const std::vector<TubeSpec> tubes{{1, 2, c, r}};
  const LabelMap v = rasterize_vessels(g, tubes);
  const BinaryMask t(rasterize_wraps(g, tubes, {{1, arc, start, 0, 1, 3.0}}, v));
  return max_contact_angle(t, v.select(1), Plane::kAxial);
}

TEST(ContactAngle, NoTumorIsZero) {
  const Slice2D ves = disk(23.4, 24.3, 10.0);
  EXPECT_EQ(contact_angle_slice(Slice2D(kSide, kSide), ves, {1.0, 1.0}), 0.0);
}

TEST(ContactAngle, FullEncasementIs360) {
  const Slice2D ves = disk(23.4, 24.3, 10.0);
  const Slice2D ring = disk_ring(23.4, 24.3, 10.0, 13.0);
  EXPECT_EQ(contact_angle_slice(ring, ves, {1.0, 1.0}), 360.0);
}

TEST(ContactAngle, RingBeyondProbeDepthIsZero) {
  const Slice2D ves = disk(23.4, 24.3, 10.0);
  const Slice2D ring = disk_ring(23.4, 24.3, 12.0, 15.0);
  EXPECT_EQ(contact_angle_slice(ring, ves, {1.0, 1.0}), 0.0);
}

TEST(ContactAngle, QuarterArc) {
  EXPECT_NEAR(phantom_arc(12.0, {23.3, 24.7}, 90.0, 20.0), 90.0, 5.0);
}

TEST(ContactAngle, ArcsWithinFiveDegrees) {
  const std::array<std::array<double, 2>, 3> centres{{{23.3, 24.7}, {23.71, 24.18}, {24.0, 24.0}}};
  for (double r : {10.0, 12.0, 16.0})
    for (const auto& c : centres)
      for (double arc : {45.0, 90.0, 180.0, 270.0})
        for (double start = 0.0; start < 360.0; start += 30.0)
          EXPECT_NEAR(phantom_arc(r, c, arc, start), arc, 5.0)
              << "r=" << r << " arc=" << arc << " start=" << start;
}

TEST(ContactAngle, ZeroAndFullArcsExact) {
  for (double start : {0.0, 17.0, 200.0}) {
    EXPECT_EQ(phantom_arc(10.0, {23.3, 24.7}, 0.0, start), 0.0);
    EXPECT_EQ(phantom_arc(10.0, {23.3, 24.7}, 360.0, start), 360.0);
  }
}

TEST(ContactAngle, MonotoneInTumor) {
  std::mt19937_64 rng(7);
  const Slice2D ves = disk(23.4, 24.3, 9.0);
  std::uniform_int_distribution<std::size_t> pick(0, kSide * kSide - 1);
  for (int trial = 0; trial < 20; ++trial) {
    Slice2D t(kSide, kSide);
    double prev = 0.0;
    for (int step = 0; step < 40; ++step) {
      for (int k = 0; k < 10; ++k) {
        const std::size_t i = pick(rng);
        if (!ves.px[i]) t.px[i] = 1;
      }
      const double a = contact_angle_slice(t, ves, {1.0, 1.0});
      EXPECT_GE(a, prev);
      prev = a;
    }
  }
}

TEST(ContactAngle, LargestComponentDefinesCentre) {
  Slice2D ves = disk(23.4, 24.3, 10.0);
  ves.at(2, 2) = 1;
  const Slice2D ring = disk_ring(23.4, 24.3, 10.0, 13.0);
  EXPECT_EQ(contact_angle_slice(ring, ves, {1.0, 1.0}), 360.0);
}

TEST(ContactAngle, HelicalMaximumOverSlices) {
  Geometry g;
  g.dims = {kSide, kSide, 12};
  const std::vector<TubeSpec> tubes{{1, 2, {23.3, 24.7}, 12.0}};
  const LabelMap v = rasterize_vessels(g, tubes);
  const std::vector<WrapSpec> wraps{
      {1, 30.0, 0.0, 1, 4, 3.0}, {1, 120.0, 60.0, 4, 8, 3.0}, {1, 60.0, 200.0, 8, 11, 3.0}};
  const BinaryMask t(rasterize_wraps(g, tubes, wraps, v));
  EXPECT_NEAR(max_contact_angle(t, v.select(1), Plane::kAxial), 120.0, 5.0);
}

TEST(AngleDistribution, PopulationMoments) {
  const auto d = AngleDistribution::from_samples({90, 90, 180, 90, 90});
  EXPECT_DOUBLE_EQ(d.mean, 108.0);
  EXPECT_DOUBLE_EQ(d.std, 36.0);
  EXPECT_THROW(AngleDistribution::from_samples({}), std::invalid_argument);
}

TEST(AngleDistribution, BinaryPredictionHasZeroSpread) {
  Geometry g;
  g.dims = {kSide, kSide, 4};
  const std::vector<TubeSpec> tubes{{1, 2, {23.3, 24.7}, 12.0}};
  const LabelMap v = rasterize_vessels(g, tubes);
  const BinaryMask t(rasterize_wraps(g, tubes, {{1, 90.0, 0.0, 1, 3, 3.0}}, v));
  const auto d = pred_angle_distribution(ProbMap::from_mask(t), v.select(1), Plane::kAxial);
  EXPECT_EQ(d.sample_count(), ThresholdSet().size());
  EXPECT_DOUBLE_EQ(d.std, 0.0);
  EXPECT_NEAR(d.mean, 90.0, 5.0);
}

TEST(AngleSampling, UnitMassPeakAtMean) {
  const auto s = sample_gaussian_on_grid(AngleDistribution::from_samples({180.0}));
  ASSERT_EQ(s.weights.size(), 1000u);
  double total = 0.0;
  for (double w : s.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto peak = std::max_element(s.weights.begin(), s.weights.end()) - s.weights.begin();
  EXPECT_NEAR(double(peak), 180.0 / angle_grid_step(1000), 1.0);
}

TEST(AngleSampling, NoContactIsEmpty) {
  const auto s = sample_gaussian_on_grid(AngleDistribution::from_samples({0, 0, 0}));
  EXPECT_TRUE(s.empty);
}

TEST(AngleSampling, SanitizeDropsBadWeights) {
  const auto s = sanitize_weights({1.0, -2.0, std::nan(""), 3.0}, 0.0);
  EXPECT_FALSE(s.empty);
  EXPECT_DOUBLE_EQ(s.weights[0], 0.25);
  EXPECT_DOUBLE_EQ(s.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(s.weights[2], 0.0);
  EXPECT_DOUBLE_EQ(s.weights[3], 0.75);
  EXPECT_TRUE(sanitize_weights({0.0, -1.0}, 0.0).empty);
}

// Samples {m-14, m+14} have std 14; smoothing 1 widens it to 15.
SampledAngles normal15(double m, std::size_t n = 1000) {
  return sample_gaussian_on_grid(AngleDistribution::from_samples({m - 14.0, m + 14.0}), n);
}

TEST(Wasserstein, ShiftedNormalsMatchMeanGap) {
  const auto r = w1_discrete(normal15(100), normal15(160), angle_grid_step(1000));
  EXPECT_EQ(r.fallback, Fallback::kNone);
  EXPECT_NEAR(r.value, 60.0, 1.0);
  const auto fine = w1_discrete(normal15(100, 10000), normal15(160, 10000), angle_grid_step(10000));
  EXPECT_LT(std::abs(fine.value - r.value), 0.5);
}

TEST(Wasserstein, MetricAxioms) {
  const double dz = angle_grid_step(1000);
  const auto a = normal15(60), b = normal15(150), c = normal15(250);
  EXPECT_NEAR(w1_discrete(a, a, dz).value, 0.0, 1e-12);
  EXPECT_NEAR(w1_discrete(a, b, dz).value, w1_discrete(b, a, dz).value, 1e-9);
  EXPECT_LE(w1_discrete(a, c, dz).value,
            w1_discrete(a, b, dz).value + w1_discrete(b, c, dz).value + 1e-9);
}

TEST(Wasserstein, Fallbacks) {
  const std::size_t n = 1001;  // step 0.36: 90 degrees is grid point 250
  const double dz = angle_grid_step(n);
  const auto none = sample_gaussian_on_grid(AngleDistribution::from_samples({0, 0}), n);
  const auto spike = sample_gaussian_on_grid(AngleDistribution::from_samples({90, 90}), n, 0.01);
  const auto wide = sample_gaussian_on_grid(AngleDistribution::from_samples({90, 90}), n);

  auto r = w1_discrete(none, none, dz);
  EXPECT_EQ(r.fallback, Fallback::kBothEmpty);
  EXPECT_EQ(r.value, 0.0);

  ASSERT_TRUE(is_degenerate(spike));
  r = w1_discrete(none, spike, dz);
  EXPECT_EQ(r.fallback, Fallback::kOneEmptyDegenerate);
  EXPECT_DOUBLE_EQ(r.value, 90.0);
  EXPECT_EQ(w1_discrete(spike, none, dz).value, r.value);

  EXPECT_FALSE(is_degenerate(wide));
  r = w1_discrete(wide, none, dz);
  EXPECT_EQ(r.fallback, Fallback::kOneEmptyPenalty);
  EXPECT_EQ(r.value, 360.0);

  r = w1_discrete(wide, spike, dz);
  EXPECT_EQ(r.fallback, Fallback::kNone);
}

TEST(Wasserstein, DefaultSmoothingNeverDegenerate) {
  const auto s = sample_gaussian_on_grid(AngleDistribution::from_samples({180.0}));
  EXPECT_LT(*std::max_element(s.weights.begin(), s.weights.end()), 0.2);
}

TEST(Wasserstein, LengthMismatchThrows) {
  EXPECT_THROW(w1_discrete(normal15(90, 100), normal15(90, 200), 1.0), std::invalid_argument);
}

struct VesselScene {
  Geometry g;
  std::vector<TubeSpec> tubes;
  LabelMap vessels;

  explicit VesselScene(std::vector<TubeSpec> t) : tubes(std::move(t)) {
    g.dims = {kSide, kSide, 16};
    vessels = rasterize_vessels(g, tubes);
  }
  BinaryMask wrap(double arc, double start) const {
    return BinaryMask(rasterize_wraps(g, tubes, {{1, arc, start, 4, 12, 3.0}}, vessels));
  }
};

TEST(ViScore, PerfectPredictionScoresZero) {
  const VesselScene s({{1, 2, {23.3, 24.7}, 10.0}});
  const BinaryMask t = s.wrap(150.0, 30.0);
  const std::array<BinaryMask, 5> raters{t, t, t, t, t};
  const auto v = vi_score(raters, ProbMap::from_mask(t), s.vessels, VesselId::kPorta);
  for (const auto& p : v.planes) EXPECT_EQ(p.w1.fallback, Fallback::kNone);
  EXPECT_NEAR(v.score, 0.0, 1e-9);
}

TEST(ViScore, NoContactAnywhereScoresZero) {
  const VesselScene s({{1, 2, {23.3, 24.7}, 10.0}});
  const BinaryMask none = BinaryMask::zeros(s.g);
  const std::array<BinaryMask, 5> raters{none, none, none, none, none};
  const auto v = vi_score(raters, ProbMap::from_mask(none), s.vessels, VesselId::kPorta);
  EXPECT_EQ(v.score, 0.0);
  for (const auto& p : v.planes) EXPECT_EQ(p.w1.fallback, Fallback::kBothEmpty);
}

TEST(ViScore, SpuriousEncasementIsPenalized) {
  const VesselScene s({{1, 2, {23.3, 24.7}, 10.0}});
  const BinaryMask none = BinaryMask::zeros(s.g);
  const std::array<BinaryMask, 5> raters{none, none, none, none, none};
  const auto v = vi_score(raters, ProbMap::from_mask(s.wrap(360.0, 0.0)), s.vessels,
                          VesselId::kPorta);
  EXPECT_EQ(v.planes[2].w1.fallback, Fallback::kOneEmptyPenalty);
  EXPECT_EQ(v.planes[2].w1.value, 360.0);
  EXPECT_EQ(v.score, 360.0);
}

TEST(ViScore, WrongArcScoresRoughlyTheGap) {
  const VesselScene s({{1, 2, {23.3, 24.7}, 12.0}});
  const BinaryMask gt = s.wrap(90.0, 0.0);
  const std::array<BinaryMask, 5> raters{gt, gt, gt, gt, gt};
  const auto v = vi_score(raters, ProbMap::from_mask(s.wrap(180.0, 0.0)), s.vessels,
                          VesselId::kPorta);
  EXPECT_NEAR(v.planes[2].w1.value, 90.0, 6.0);
}

TEST(ViScore, OtherVesselsDoNotMatter) {
  const VesselScene one({{1, 2, {23.3, 24.7}, 10.0}});
  const VesselScene two({{1, 2, {23.3, 24.7}, 10.0}, {3, 2, {6.0, 6.0}, 3.0}});
  const BinaryMask gt = one.wrap(120.0, 10.0);
  const BinaryMask pred = one.wrap(200.0, 40.0);
  const std::array<BinaryMask, 5> raters{gt, gt, gt, gt, pred};
  const auto a = vi_score(raters, ProbMap::from_mask(pred), one.vessels, VesselId::kPorta);
  const auto b = vi_score(raters, ProbMap::from_mask(pred), two.vessels, VesselId::kPorta);
  EXPECT_DOUBLE_EQ(a.score, b.score);
  const auto absent = vi_score(raters, ProbMap::from_mask(pred), two.vessels, VesselId::kSMA);
  EXPECT_EQ(absent.score, 0.0);
}

}  // namespace
}  // namespace curvas
