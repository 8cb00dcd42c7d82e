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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

namespace curvas {
namespace {

using testing::line;

// Voxel-by-voxel binary STAPLE over an explicit index set, written directly
// from the EM update equations.
struct OracleStaple {
  std::vector<double> w;
  std::vector<double> sens, spec;
};

OracleStaple brute_force_staple(const std::vector<std::vector<int>>& d, int iters) {
  const std::size_t r = d.size(), n = d[0].size();
  double labels = 0.0;
  for (const auto& row : d)
    for (int v : row) labels += v;
  const double g = std::clamp(labels / double(r * n), 1e-6, 1.0 - 1e-6);
  OracleStaple o{std::vector<double>(n), std::vector<double>(r, 0.99), std::vector<double>(r, 0.99)};
  auto e_step = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double a = g, b = 1.0 - g;
      for (std::size_t j = 0; j < r; ++j) {
        a *= d[j][i] ? o.sens[j] : 1.0 - o.sens[j];
        b *= d[j][i] ? 1.0 - o.spec[j] : o.spec[j];
      }
      o.w[i] = a / (a + b);
    }
  };
  for (int it = 0; it < iters; ++it) {
    e_step();
    for (std::size_t j = 0; j < r; ++j) {
      double tp = 0, fg = 0, tn = 0, bg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        fg += o.w[i];
        bg += 1.0 - o.w[i];
        tp += o.w[i] * d[j][i];
        tn += (1.0 - o.w[i]) * (1 - d[j][i]);
      }
      o.sens[j] = std::clamp(tp / fg, 1e-12, 1.0 - 1e-12);
      o.spec[j] = std::clamp(tn / bg, 1e-12, 1.0 - 1e-12);
    }
  }
  e_step();
  return o;
}

std::vector<std::vector<int>> decisions(const std::vector<BinaryMask>& m) {
  std::vector<std::vector<int>> d;
  for (const auto& x : m) d.emplace_back(x.values().begin(), x.values().end());
  return d;
}

TEST(Staple, UnanimityReproducesTheMask) {
  const auto g = testing::geometry(12, 12, 6);
  const auto blob = testing::box(g, {3, 4, 1}, {9, 8, 5});
  std::vector<BinaryMask> m(5, blob);
  const StapleResult r = staple(m);
  EXPECT_EQ(r.consensus_bin, blob);
  EXPECT_TRUE(r.converged);
  for (int j = 0; j < 5; ++j) {
    EXPECT_GE(r.sensitivities[j], 1.0 - 1e-6);
    EXPECT_GE(r.specificities[j], 1.0 - 1e-6);
  }
}

TEST(Staple, FourIdenticalAndOneEmptyMatchesBruteForceEm) {
  std::vector<BinaryMask> m = {line("0111"), line("0111"), line("0111"), line("0111"),
                               line("0000")};
  const StapleResult r = staple(m);
  EXPECT_EQ(r.consensus_bin, line("0111"));
  // The whole line lies inside the union box plus margin.
  const OracleStaple o = brute_force_staple(decisions(m), 10);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(r.consensus_prob.values()[i], o.w[i], 1e-6) << i;
}

TEST(Staple, MatchesBruteForceEmOnMixedRaters) {
  std::vector<BinaryMask> m = {line("0111110"), line("0011111"), line("1111100"),
                               line("0011100"), line("0111000")};
  const StapleResult r = staple(m);
  const OracleStaple o = brute_force_staple(decisions(m), r.iterations);
  for (std::size_t i = 0; i < 7; ++i)
    EXPECT_NEAR(r.consensus_prob.values()[i], o.w[i], 1e-6) << i;
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(r.sensitivities[j], o.sens[j], 1e-9);
    EXPECT_NEAR(r.specificities[j], o.spec[j], 1e-9);
  }
}

TEST(Staple, ThreeToTwoBoundaryVoxelLeansForeground) {
  // Voxel 1 is marked by raters 1, 3 and 5 only.
  std::vector<BinaryMask> m = {line("0111110"), line("0011111"), line("1111100"),
                               line("0011100"), line("0111000")};
  const StapleResult r = staple(m);
  const double p = r.consensus_prob.values()[1];
  EXPECT_GT(p, 0.5);
  EXPECT_LT(p, 1.0);
  EXPECT_EQ(r.consensus_bin.values()[1], 1);
  // Fixed point: the posterior is Bayes' rule with the returned parameters.
  const int pattern[5] = {1, 0, 1, 0, 1};
  double a = r.prior, b = 1.0 - r.prior;
  for (int j = 0; j < 5; ++j) {
    a *= pattern[j] ? r.sensitivities[j] : 1.0 - r.sensitivities[j];
    b *= pattern[j] ? 1.0 - r.specificities[j] : r.specificities[j];
  }
  EXPECT_NEAR(p, a / (a + b), 1e-7);
}

TEST(Staple, AllEmptyHasNothingToFuse) {
  std::vector<BinaryMask> m(5, line("000"));
  EXPECT_THROW(staple(m), std::invalid_argument);
}

TEST(Staple, WorkIsConfinedToTheUnionBoxPlusMargin) {
  const auto g = testing::geometry(40, 40, 40);
  std::vector<BinaryMask> m(5, testing::box(g, {10, 10, 10}, {13, 13, 13}));
  m[4] = testing::box(g, {10, 10, 10}, {12, 12, 12});
  const StapleResult r = staple(m);
  // Far-away voxels stay exactly zero.
  EXPECT_EQ(r.consensus_prob.grid()(0, 0, 0), 0.0f);
  EXPECT_EQ(r.consensus_prob.grid()(30, 30, 30), 0.0f);
  EXPECT_EQ(r.consensus_bin, m[0]);
}

TEST(Staple, RaterOrderDoesNotMatter) {
  std::mt19937_64 rng(7);
  const auto g = testing::geometry(9, 9, 3);
  std::vector<BinaryMask> m;
  for (int k = 0; k < 5; ++k) m.push_back(testing::random_mask(g, rng, 0.3 + 0.1 * k));
  const StapleResult a = staple(m);
  std::vector<BinaryMask> shuffled = {m[3], m[0], m[4], m[2], m[1]};
  const StapleResult b = staple(shuffled);
  for (std::size_t i = 0; i < g.voxel_count(); ++i)
    EXPECT_NEAR(a.consensus_prob.values()[i], b.consensus_prob.values()[i], 1e-9);
}

TEST(Agreement, HandEnumeratedLine) {
  std::vector<BinaryMask> m = {line("111"), line("110"), line("011"), line("110"), line("011")};
  auto d = [](double inter, double a, double b) { return 2.0 * inter / (a + b + kDiceEpsilon); };
  // rater 1 vs each of the others: 4 x d(2,3,2); pairs among 2..5:
  // (110,011) x4 = d(1,2,2); identical pairs x2 = d(2,2,2).
  const double want = (4.0 * d(2, 3, 2) + 4.0 * d(1, 2, 2) + 2.0 * d(2, 2, 2)) / 10.0;
  EXPECT_NEAR(mean_interrater_dsc(m), want, 1e-15);
  EXPECT_NEAR(mean_interrater_dsc(m), 0.72, 1e-5);
}

TEST(Agreement, IdenticalAndDisjointRaters) {
  const auto g = testing::geometry(5, 1, 1);
  std::vector<BinaryMask> same(5, line("01110"));
  EXPECT_NEAR(mean_interrater_dsc(same), 1.0, 1e-5);
  std::vector<BinaryMask> disjoint;
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<std::uint8_t> v(5, 0);
    v[k] = 1;
    disjoint.push_back(testing::mask(g, v));
  }
  EXPECT_EQ(mean_interrater_dsc(disjoint), 0.0);
}

TEST(Agreement, AverageAnnotationLattice) {
  std::vector<BinaryMask> m = {line("11000"), line("11000"), line("10000"), line("10100"),
                               line("10000")};
  const ProbMap a = average_annotation(m);
  EXPECT_FLOAT_EQ(a.values()[0], 1.0f);
  EXPECT_FLOAT_EQ(a.values()[1], 0.4f);
  EXPECT_FLOAT_EQ(a.values()[2], 0.2f);
  EXPECT_FLOAT_EQ(a.values()[3], 0.0f);
}

ReferenceCase reference_from(std::vector<BinaryMask> raters, BinaryMask consensus) {
  ReferenceCase c;
  for (int k = 0; k < 5; ++k) c.raters[k] = raters[k];
  c.staple = std::move(consensus);
  c.vessels = LabelMap(VoxelGrid<std::uint8_t>(c.staple.geometry()));
  return c;
}

TEST(Agreement, PooledMatrixIsSymmetricWithMeanAndStd) {
  const ReferenceCase a = reference_from(std::vector<BinaryMask>(5, line("0110")), line("0110"));
  const ReferenceCase b = reference_from(
      {line("1100"), line("0011"), line("1100"), line("0011"), line("1100")}, line("1100"));
  const ReferenceCase* cases[] = {&a, &b};
  const AgreementMatrix m = pairwise_agreement(cases);
  ASSERT_EQ(m.labels.size(), 6u);
  EXPECT_EQ(m.labels[5], "STAPLE");
  EXPECT_EQ(m.cases, 2u);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(m.cells[i][j].mean, m.cells[j][i].mean);
      EXPECT_EQ(m.cells[i][j].std, m.cells[j][i].std);
    }
  // Raters 1 and 2: Dice ~1 in case a, 0 in case b.
  EXPECT_NEAR(m.cells[0][1].mean, 0.5, 1e-5);
  EXPECT_NEAR(m.cells[0][1].std, 0.5, 1e-5);
  // Raters 1 and 3 agree in both cases.
  EXPECT_NEAR(m.cells[0][2].mean, 1.0, 1e-5);
  EXPECT_NEAR(m.cells[0][2].std, 0.0, 1e-12);
}

}  // namespace
}  // namespace curvas
