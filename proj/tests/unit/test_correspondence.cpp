// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "viewalign/correspondence.hpp"

using namespace viewalign;
using namespace viewalign::testing;

namespace {

const std::filesystem::path kData = VIEWALIGN_DATA_DIR;

std::vector<std::vector<double>> basis(int d) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  return out;
}

std::vector<int> iota(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

CorrelationTensor random_tensor(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(h * w * h * w));
  for (auto& x : v) x = u(rng);
  return CorrelationTensor(h, w, std::move(v));
}

}  // namespace

TEST(FeatureMap, NormalizesAndValidates) {
  const FeatureMap f = FeatureMap::normalized(1, 2, 2, {3, 4, 0, -2});
  EXPECT_DOUBLE_EQ(f.cell(0, 0)[0], 0.6);
  EXPECT_DOUBLE_EQ(f.cell(0, 0)[1], 0.8);
  EXPECT_DOUBLE_EQ(f.cell(0, 1)[1], -1.0);
  EXPECT_THROW(FeatureMap::normalized(1, 2, 2, {1, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(FeatureMap::normalized(1, 2, 2, {1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(FeatureMap::normalized(0, 2, 2, {}), std::invalid_argument);
}

TEST(Correlate, OrthogonalDescriptorsGiveIdentity) {
  const FeatureMap f = map_from_descriptors(3, 3, basis(9), iota(9));
  const CorrelationTensor s = correlate(f, f);
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t src = 0; src < 9; ++src) EXPECT_EQ(s(t, src), t == src ? 1.0 : 0.0);
}

TEST(Correlate, SharedDescriptorScoresOneOverSqrtTwo) {
  // Source cells 0 and 3 share descriptor e0; target cell 0 holds e0.
  const auto e = basis(4);
  const FeatureMap source = map_from_descriptors(2, 2, e, {0, 1, 2, 0});
  const FeatureMap target = map_from_descriptors(2, 2, e, {0, 1, 2, 3});
  const CorrelationTensor s = correlate(source, target);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(s(0, 3), 1.0 / std::sqrt(2.0));
  EXPECT_EQ(s(0, 1), 0.0);
  // Nothing in the source matches e3: the slice is all zero.
  for (std::size_t src = 0; src < 4; ++src) EXPECT_EQ(s(3, src), 0.0);
}

TEST(Correlate, AmbiguityPenaltyIsOneOverSqrtK) {
  for (int k : {1, 2, 4, 7}) {
    const auto e = basis(2);
    std::vector<int> src(9, 1);
    for (int i = 0; i < k; ++i) src[static_cast<std::size_t>(i)] = 0;
    const FeatureMap source = map_from_descriptors(3, 3, e, src);
    const FeatureMap target = map_from_descriptors(3, 3, e, std::vector<int>(9, 0));
    const CorrelationTensor s = correlate(source, target);
    const double expected = 1.0 / std::sqrt(static_cast<double>(k));
    for (std::size_t t = 0; t < 9; ++t)
      for (int i = 0; i < 9; ++i) ASSERT_EQ(s(t, static_cast<std::size_t>(i)), i < k ? expected : 0.0) << k;
  }
}

TEST(Correlate, MatchesBruteForceOracle) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> side(1, 6), dim(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = trial == 0 ? 4 : side(rng), w = trial == 0 ? 4 : side(rng), d = trial == 0 ? 8 : dim(rng);
    const FeatureMap a = random_feature_map(rng, h, w, d), b = random_feature_map(rng, h, w, d);
    ASSERT_LE(max_abs_difference(correlate(a, b), brute_correlate(a, b)), 1e-9) << h << "x" << w << "x" << d;
  }
}

TEST(Correlate, RangeAndUnitSlices) {
  std::mt19937_64 rng(32);
  const FeatureMap a = random_feature_map(rng, 5, 4, 3), b = random_feature_map(rng, 5, 4, 3);
  const CorrelationTensor s = correlate(a, b);
  for (std::size_t t = 0; t < s.locations(); ++t) {
    double sq = 0.0;
    for (double x : s.slice(t)) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0 + 1e-12);
      sq += x * x;
    }
    ASSERT_TRUE(std::abs(sq - 1.0) < 1e-12 || sq == 0.0);
  }
}

TEST(Correlate, IndependentOfWorkerCount) {
  std::mt19937_64 rng(33);
  const FeatureMap a = random_feature_map(rng, 16, 16, 11), b = random_feature_map(rng, 16, 16, 11);
  const CorrelationTensor one = correlate(a, b, 1);
  EXPECT_EQ(one, correlate(a, b, 3));
  EXPECT_EQ(one, correlate(a, b, 8));
}

TEST(Correlate, RejectsShapeMismatch) {
  std::mt19937_64 rng(34);
  EXPECT_THROW(correlate(random_feature_map(rng, 3, 3, 4), random_feature_map(rng, 3, 2, 4)), std::invalid_argument);
  EXPECT_THROW(correlate(random_feature_map(rng, 3, 3, 4), random_feature_map(rng, 3, 3, 5)), std::invalid_argument);
  const FeatureMap a = random_feature_map(rng, 3, 3, 4);
  EXPECT_THROW(correlate(a, a, Mask(2, 3, 1)), std::invalid_argument);
}

TEST(Correlate, MaskedOverloadEqualsApplyAlpha) {
  std::mt19937_64 rng(35);
  const FeatureMap a = random_feature_map(rng, 6, 5, 4), b = random_feature_map(rng, 6, 5, 4);
  Mask m(6, 5);
  std::bernoulli_distribution coin(0.4);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 5; ++c) m.set(r, c, coin(rng));
  EXPECT_EQ(correlate(a, b, m), apply_alpha(correlate(a, b), m));
}

TEST(ApplyAlpha, Examples) {
  std::mt19937_64 rng(36);
  const CorrelationTensor s = random_tensor(rng, 3, 4);
  EXPECT_EQ(apply_alpha(s, Mask(3, 4, 1)), s);
  const CorrelationTensor zero = apply_alpha(s, Mask(3, 4, 0));
  EXPECT_TRUE(std::all_of(zero.values().begin(), zero.values().end(), [](double x) { return x == 0.0; }));
  Mask single(3, 4);
  single.set(1, 2, true);
  const CorrelationTensor one = apply_alpha(s, single);
  for (std::size_t t = 0; t < 12; ++t) {
    const bool kept = t == one.flat({1, 2});
    for (std::size_t src = 0; src < 12; ++src) ASSERT_EQ(one(t, src), kept ? s(t, src) : 0.0);
  }
  EXPECT_THROW(apply_alpha(s, Mask(4, 3, 1)), std::invalid_argument);
}

TEST(Pool, AveragesBlocks) {
  std::mt19937_64 rng(37);
  const CorrelationTensor s = random_tensor(rng, 4, 6);
  EXPECT_EQ(pool(s, 1), s);
  const CorrelationTensor p = pool(s, 2);
  ASSERT_EQ(p.height(), 2);
  ASSERT_EQ(p.width(), 3);
  for (int tr = 0; tr < 2; ++tr)
    for (int tc = 0; tc < 3; ++tc)
      for (int sr = 0; sr < 2; ++sr)
        for (int sc = 0; sc < 3; ++sc) {
          double sum = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) sum += s.at({2 * tr + a, 2 * tc + b}, {2 * sr + c, 2 * sc + d});
          ASSERT_NEAR(p.at({tr, tc}, {sr, sc}), sum / 16.0, 1e-12);
        }
  EXPECT_THROW(pool(s, 4), std::invalid_argument);
}

TEST(CorrelationIo, BinaryRoundTrip) {
  std::mt19937_64 rng(38);
  const CorrelationTensor s = random_tensor(rng, 2, 3);
  std::stringstream ss;
  write_correlation(ss, s);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16u + 4u * 36u);
  EXPECT_EQ(bytes.substr(0, 4), "VCOR");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 16, 4);  // host is little-endian
  EXPECT_EQ(first, static_cast<float>(s.values()[0]));
  const CorrelationTensor back = read_correlation(ss);
  ASSERT_EQ(back.height(), 2);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(back.values()[i], static_cast<double>(static_cast<float>(s.values()[i])));
  std::istringstream bad("VCXX");
  EXPECT_THROW(read_correlation(bad), std::runtime_error);
  std::istringstream truncated(bytes.substr(0, 30));
  EXPECT_THROW(read_correlation(truncated), std::runtime_error);
}

TEST(ContrastiveLoss, Examples) {
  const std::vector<double> a{1, 0, 0, 1}, b{1, 0, 0, -1};
  const DescriptorView va{1, 2, 2, a}, vb{1, 2, 2, b};
  const CorrespondencePair same{{0.5, 0.5}, {0.5, 0.5}, 1};
  EXPECT_EQ(contrastive_loss(va, vb, std::vector{same}, 1.0), 0.0);
  // Cells 1 have squared distance 4 >= margin 2: the negative saturates.
  const CorrespondencePair far{{1.5, 0.5}, {1.5, 0.5}, 0};
  EXPECT_EQ(contrastive_loss(va, vb, std::vector{far}, 2.0), 0.0);
  // Same pair as a positive: (1/2) * 4.
  EXPECT_DOUBLE_EQ(contrastive_loss(va, vb, std::vector{CorrespondencePair{{1.5, 0.5}, {1.5, 0.5}, 1}}, 2.0), 2.0);
  // Negative inside the margin: (1/2) * (5 - 4).
  EXPECT_DOUBLE_EQ(contrastive_loss(va, vb, std::vector{far}, 5.0), 0.5);
}

TEST(ContrastiveLoss, StrideSamplesContainingCell) {
  const std::vector<double> a{1, 0, 0, 1}, b{0, 1, 0, 1};
  const DescriptorView va{1, 2, 2, a}, vb{1, 2, 2, b};
  // Pixel (3.9, 1.2) with stride 2 reads cell (0, 1).
  const CorrespondencePair p{{3.9, 1.2}, {2.0, 0.0}, 1};
  EXPECT_EQ(contrastive_loss(va, vb, std::vector{p}, 1.0, 2), 0.0);
  const CorrespondencePair q{{0.0, 0.0}, {3.0, 1.0}, 1};
  EXPECT_DOUBLE_EQ(contrastive_loss(va, vb, std::vector{q}, 1.0, 2), 1.0);
}

TEST(ContrastiveLoss, RejectsBadInput) {
  const std::vector<double> a{1, 0, 0, 1};
  const DescriptorView v{1, 2, 2, a};
  const std::vector<CorrespondencePair> ok{{{0.5, 0.5}, {0.5, 0.5}, 1}};
  EXPECT_THROW(contrastive_loss(v, v, {}, 1.0), std::invalid_argument);
  EXPECT_THROW(contrastive_loss(v, v, ok, 0.0), std::invalid_argument);
  EXPECT_THROW(contrastive_loss(v, v, std::vector<CorrespondencePair>{{{2.5, 0.5}, {0.5, 0.5}, 1}}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(contrastive_loss(v, v, std::vector<CorrespondencePair>{{{0.5, -0.1}, {0.5, 0.5}, 1}}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(contrastive_loss(v, v, std::vector<CorrespondencePair>{{{0.5, 0.5}, {0.5, 0.5}, 2}}, 1.0),
               std::invalid_argument);
}

TEST(ContrastiveLoss, PermutationAndDuplicationInvariant) {
  std::mt19937_64 rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    GradientInstance g = random_gradient_instance(rng);
    const double base = contrastive_loss(g.view_a(), g.view_b(), g.pairs, g.margin);
    auto shuffled = g.pairs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(contrastive_loss(g.view_a(), g.view_b(), shuffled, g.margin), base, 1e-12);
    auto doubled = g.pairs;
    doubled.insert(doubled.end(), g.pairs.begin(), g.pairs.end());
    EXPECT_NEAR(contrastive_loss(g.view_a(), g.view_b(), doubled, g.margin), base, 1e-12);
  }
}

TEST(ContrastiveLoss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const GradientInstance g = random_gradient_instance(rng);
    ASSERT_LE(gradient_relative_error(g), 1e-4) << "trial " << trial;
  }
}

TEST(ContrastiveLoss, GradientLossAgreesWithPlainLoss) {
  std::mt19937_64 rng(41);
  const GradientInstance g = random_gradient_instance(rng);
  EXPECT_EQ(contrastive_loss_with_gradient(g.view_a(), g.view_b(), g.pairs, g.margin).loss,
            contrastive_loss(g.view_a(), g.view_b(), g.pairs, g.margin));
}

TEST(BestMatches, IdentityAndZero) {
  const FeatureMap f = map_from_descriptors(2, 3, basis(6), iota(6));
  const MatchMap m = best_matches(correlate(f, f));
  ASSERT_EQ(m.size(), 6u);
  for (const auto& [t, s] : m) EXPECT_EQ(t, s);
  EXPECT_TRUE(best_matches(CorrelationTensor(2, 2, std::vector<double>(16, 0.0))).empty());
}

TEST(BestMatches, AgreesWithBruteForceArgmax) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    CorrelationTensor s = random_tensor(rng, 3, 4);
    const MatchMap m = best_matches(s);
    for (std::size_t t = 0; t < 12; ++t) {
      std::size_t arg = 0;
      for (std::size_t k = 0; k < 12; ++k)
        if (s(t, k) > s(t, arg)) arg = k;
      ASSERT_EQ(m.at(s.location(t)), s.location(arg));
    }
  }
}

TEST(BestMatches, TiesGoToFirstRowMajor) {
  std::vector<double> v(16, 0.0);
  v[0 * 4 + 1] = 0.5;
  v[0 * 4 + 3] = 0.5;
  const MatchMap m = best_matches(CorrelationTensor(2, 2, v));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.at({0, 0}), (GridLocation{0, 1}));
}

TEST(TransferLabels, CopiesThroughMatches) {
  const FeatureMap f = map_from_descriptors(2, 2, basis(4), iota(4));
  const LabelMap source{{{0, 0}, 3}, {{0, 1}, 3}, {{1, 1}, 7}};
  const LabelMap out = transfer_labels(best_matches(correlate(f, f)), source);
  EXPECT_EQ(out, source);
  const MatchMap partial{{{1, 0}, {1, 1}}, {{0, 0}, {1, 0}}};
  const LabelMap moved = transfer_labels(partial, source);
  ASSERT_EQ(moved.size(), 1u);
  EXPECT_EQ(moved.at({1, 0}), 7);
}

TEST(TransferLabels, TwoPartTemplateTwentyDegreesApart) {
  const TemplateModel model = load_template(kData / "templates/table.json");
  const CameraModel cam;
  int checked = 0, correct = 0;
  for (int a = 0; a < 360; a += 30) {
    const Viewpoint vs(a, 20, 0), vt(a + 20, 20, 0);
    const Render rs = render(model, vs, cam), rt = render(model, vt, cam);
    const CorrelationTensor s = correlate(descriptor_map(rs, model, cam), descriptor_map(rt, model, cam),
                                          rt.alpha.downsample(cam.feature_stride));
    const LabelMap labels = transfer_labels(best_matches(s), part_label_map(rs, model, cam));
    const auto truth = dominant_keypoints(rt, cam, {}, 0.5);
    for (const auto& [cell, part] : labels) {
      const auto kp = truth[static_cast<std::size_t>(cell.row * cam.grid_width() + cell.col)];
      if (!kp || !rs.visible(*kp)) continue;
      ++checked;
      correct += model.part_of(*kp) == part;
    }
  }
  EXPECT_GT(checked, 100);
  EXPECT_EQ(correct, checked);
}

TEST(PartLabelMap, LabelsCellsNearKeypoints) {
  const TemplateModel model = load_template(kData / "templates/table.json");
  const CameraModel cam;
  const Render r = render(model, Viewpoint(30, 20, 0), cam);
  const LabelMap labels = part_label_map(r, model, cam);
  EXPECT_FALSE(labels.empty());
  for (const int id : r.visible_ids()) {
    const Point2 c = pixel_to_cell(r.keypoints_2d.at(id), cam.feature_stride);
    const GridLocation nearest{static_cast<int>(std::lround(c.v)), static_cast<int>(std::lround(c.u))};
    ASSERT_TRUE(labels.contains(nearest));
  }
  EXPECT_FALSE(labels.contains({0, 0}));
}
