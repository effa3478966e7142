#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "csi_sentry/classify/tree.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace csi_sentry;
using namespace csi_sentry::classify;

std::vector<Example> four_points() {
  return {{{0.0}, Activity::Sit}, {{1.0}, Activity::Sit}, {{10.0}, Activity::Walk}, {{11.0}, Activity::Walk}};
}

// Six Gaussian blobs in 4 dimensions, one per class.
std::vector<Example> blobs(std::size_t per_class, std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  std::vector<Example> out;
  for (std::size_t i = 0; i < per_class * kNumClasses; ++i) {
    const std::size_t c = i % kNumClasses;
    FeatureVector x(4);
    for (std::size_t d = 0; d < 4; ++d) x[d] = static_cast<double>((c >> (d % 3)) & 1) * 5.0 + c + g(rng);
    out.push_back({x, activity_at(c)});
  }
  return out;
}

double train_accuracy(const TreeModel& m, const std::vector<Example>& data) {
  std::size_t ok = 0;
  for (const auto& e : data) ok += predict_tree(m, e.x).label == e.label;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

TEST(Tree, SingleClassIsLeaf) {
  const std::vector<Example> data{{{1.0, 2.0}, Activity::Run}, {{3.0, 4.0}, Activity::Run}};
  const auto m = train_tree(data);
  ASSERT_EQ(m.nodes.size(), 1u);
  EXPECT_EQ(m.depth(), 0u);
  const auto p = predict_tree(m, {100.0, -100.0});
  EXPECT_EQ(p.label, Activity::Run);
  EXPECT_TRUE(p.path.empty());
}

TEST(Tree, ForcedMidpoint) {
  const auto m = train_tree(four_points());
  EXPECT_EQ(m.depth(), 1u);
  EXPECT_EQ(m.nodes[0].threshold, 5.5);
  EXPECT_EQ(train_accuracy(m, four_points()), 1.0);
  const auto p = predict_tree(m, {0.0});
  EXPECT_EQ(p.label, Activity::Sit);
  EXPECT_EQ(p.path, (std::vector<Decision>{{0, 5.5, true}}));
  EXPECT_EQ(predict_tree(m, {7.0}).path, (std::vector<Decision>{{0, 5.5, false}}));
}

TEST(Tree, SeparableBlobsMemorized) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = blobs(30, seed, 2.0);
    EXPECT_EQ(train_accuracy(train_tree(data), data), 1.0) << seed;
  }
}

TEST(Tree, TiesGoToLowestFeature) {
  std::vector<Example> data;
  for (double v : {0.0, 1.0, 2.0, 3.0}) data.push_back({{v, v, v}, v < 2.0 ? Activity::Sit : Activity::Run});
  EXPECT_EQ(train_tree(data).nodes[0].feature, 0u);
}

TEST(Tree, TiesGoToLowestThreshold) {
  // Splits at 0.5 and 1.5 both leave one impure pair.
  const std::vector<Example> data{{{0.0}, Activity::Sit}, {{1.0}, Activity::Walk}, {{2.0}, Activity::Sit}};
  EXPECT_EQ(train_tree(data).nodes[0].threshold, 0.5);
}

TEST(Tree, IdenticalVectorsMajorityTieToLowestClass) {
  const std::vector<Example> data{{{1.0}, Activity::Walk}, {{1.0}, Activity::Sit}};
  const auto m = train_tree(data);
  EXPECT_EQ(m.nodes.size(), 1u);
  EXPECT_EQ(predict_tree(m, {1.0}).label, Activity::Sit);
}

TEST(Tree, DepthLimitHonoured) {
  const auto data = blobs(30, 4, 4.0);
  for (std::size_t d : {1u, 2u, 3u}) {
    TreeParams p;
    p.max_depth = d;
    EXPECT_LE(train_tree(data, p).depth(), d);
  }
}

TEST(Tree, MinSamplesSplitHonoured) {
  TreeParams p;
  p.min_samples_split = 5;
  EXPECT_EQ(train_tree(four_points(), p).nodes.size(), 1u);
}

TEST(Tree, GiniDecreaseMatchesHandCount) {
  // Weighted child impurity per candidate:
  //   t=0.5: 3/4 * 2/3 = 1/2
  //   t=1.5: 2/4 * 1/2 = 1/4
  //   t=2.5: 3/4 * 4/9 = 1/3
  const std::vector<Example> data{
      {{0.0}, Activity::Sit}, {{1.0}, Activity::Sit}, {{2.0}, Activity::Walk}, {{3.0}, Activity::Run}};
  const auto m = train_tree(data);
  EXPECT_EQ(m.nodes[0].threshold, 1.5);
}

TEST(Tree, MonotoneTransformKeepsPredictions) {
  const auto data = blobs(20, 5, 3.0);
  const auto m = train_tree(data);
  for (std::size_t f = 0; f < 4; ++f) {
    auto warped = data;
    for (auto& e : warped) e.x[f] = std::exp(0.3 * e.x[f]) + 7.0;
    const auto mw = train_tree(warped);
    for (std::size_t i = 0; i < data.size(); ++i) {
      ASSERT_EQ(predict_tree(m, data[i].x).label, predict_tree(mw, warped[i].x).label);
    }
  }
}

TEST(Tree, Deterministic) {
  const auto data = blobs(20, 6, 3.0);
  const auto a = train_tree(data);
  const auto b = train_tree(data);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
  }
}

TEST(Tree, Errors) {
  EXPECT_ERRC(train_tree({}), Errc::EmptyDataset);
  const std::vector<Example> ragged{{{1.0}, Activity::Sit}, {{1.0, 2.0}, Activity::Run}};
  EXPECT_ERRC(train_tree(ragged), Errc::DimMismatch);
  const auto m = train_tree(four_points());
  EXPECT_ERRC(predict_tree(m, {1.0, 2.0}), Errc::DimMismatch);
}

TEST(Tree, SaveLoadRoundTrip) {
  oracle::TempDir dir;
  const auto data = blobs(20, 7, 3.0);
  TreeParams p;
  p.max_depth = 6;
  const auto m = train_tree(data, p);
  save_tree(m, dir.file("t.bin"));
  EXPECT_EQ(binary_io::file_magic(dir.file("t.bin")), "CSDT");
  const auto back = load_tree(dir.file("t.bin"));
  EXPECT_EQ(back.n_features, m.n_features);
  EXPECT_EQ(back.params.max_depth, 6u);
  ASSERT_EQ(back.nodes.size(), m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    EXPECT_EQ(back.nodes[i].feature, m.nodes[i].feature);
    EXPECT_EQ(back.nodes[i].threshold, m.nodes[i].threshold);
    EXPECT_EQ(back.nodes[i].left, m.nodes[i].left);
    EXPECT_EQ(back.nodes[i].right, m.nodes[i].right);
    EXPECT_EQ(back.nodes[i].counts, m.nodes[i].counts);
  }
  for (const auto& e : data) EXPECT_EQ(predict_tree(back, e.x).path, predict_tree(m, e.x).path);
}

TEST(Tree, ToySetPerfect) {
  const auto train = feature_examples(fixtures::toy_two_class(20, 1));
  const auto test = feature_examples(fixtures::toy_two_class(20, 2));
  const auto m = train_tree(train);
  EXPECT_EQ(train_accuracy(m, test), 1.0);
}

}  // namespace
