#include <gtest/gtest.h>

#include <random>

#include "mcufit/error.hpp"
#include "mcufit/estimators.hpp"
#include "oracles.hpp"

using namespace mcufit;

namespace {

using Sizes = std::vector<std::size_t>;

TrainedModel stump_model() {
  TrainedModel m;
  m.task = Task::regression;
  m.features = 2;
  m.feature_names = {"a", "b"};
  Tree t;
  TreeNode root;
  root.feature = 1;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  TreeNode lo, hi;
  lo.value = -1.0;
  hi.value = 1.0;
  t.nodes = {root, lo, hi};
  m.body = ForestModel{{t}, Aggregation::mean};
  return m;
}

// Closed-form tree count: 2 per internal node, 1 per non-root node, and the
// leaf payload.
std::size_t tree_oracle(std::size_t internal, std::size_t leaves, std::size_t leaf_scalars) {
  return 2 * internal + (internal + leaves - 1) + leaves * leaf_scalars;
}

}  // namespace

TEST(AnnEstimate, Examples) {
  const auto e = estimate_ann(Sizes{9, 12, 12, 12, 1});
  EXPECT_EQ(e.parameter_count, 445u);
  EXPECT_EQ(e.bytes(), 1780u);
  EXPECT_EQ(e.kind, EstimateKind::analytical);
  EXPECT_EQ(estimate_ann(Sizes{7, 1}).parameter_count, 8u);
  EXPECT_EQ(estimate_ann(Sizes{1, 1}).parameter_count, 2u);
  EXPECT_EQ(estimate_ann(Sizes{9, 12, 12, 12, 1}, 8).bytes(), 3560u);
  EXPECT_THROW(estimate_ann(Sizes{3}), ConfigError);
  EXPECT_THROW(estimate_ann(Sizes{3, 0, 1}), ConfigError);
}

TEST(AnnEstimate, MatchesDirectSummationAndIsMonotone) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 500; ++t) {
    Sizes layers(2 + gen() % 5);
    for (auto& l : layers) l = 1 + gen() % 30;
    const auto count = estimate_ann(layers).parameter_count;
    EXPECT_EQ(count, oracle::ann_parameters(layers));
    const std::size_t i = 1 + gen() % (layers.size() - 1);
    auto bigger = layers;
    ++bigger[i];
    EXPECT_GT(estimate_ann(bigger).parameter_count, count);
  }
}

TEST(SvmEstimate, Examples) {
  const auto e = estimate_svm(7, 9);
  EXPECT_EQ(e.weights.parameter_count, 189u);
  EXPECT_EQ(e.biases, 21u);
  EXPECT_EQ(e.with_biases().parameter_count, 210u);
  EXPECT_EQ(estimate_svm(2, 5).weights.parameter_count, 5u);
  EXPECT_EQ(estimate_svm(2, 1).weights.parameter_count, 1u);
  EXPECT_THROW(estimate_svm(1, 4), ConfigError);
  EXPECT_THROW(estimate_svm(3, 0), ConfigError);
}

TEST(SvmEstimate, Monotone) {
  for (int n = 2; n < 12; ++n) {
    for (std::size_t d = 1; d < 12; ++d) {
      const auto c = estimate_svm(n, d).weights.parameter_count;
      EXPECT_EQ(c, static_cast<std::size_t>(n * (n - 1) / 2) * d);
      EXPECT_GT(estimate_svm(n + 1, d).weights.parameter_count, c);
      EXPECT_GT(estimate_svm(n, d + 1).weights.parameter_count, c);
    }
  }
}

TEST(TreeEstimate, Stump) {
  const auto e = estimate_tree_exact(stump_model());
  EXPECT_EQ(e.parameter_count, 6u);
  EXPECT_EQ(e.kind, EstimateKind::exact_ir);
}

TEST(TreeEstimate, EmptyForestRejected) {
  auto m = stump_model();
  std::get<ForestModel>(m.body).trees.clear();
  EXPECT_THROW(estimate_tree_exact(m), ConfigError);
}

TEST(TreeEstimate, DoublingTreesDoublesEstimate) {
  const auto ds = synth_dataset({SyntheticKind::lte_regression, 300, 1.0}, 2);
  RfParams p;
  p.trees = 3;
  p.max_depth = 5;
  auto m = train_rf(ds, all_rows(ds), p);
  const auto single = estimate_tree_exact(m).parameter_count;
  auto& trees = std::get<ForestModel>(m.body).trees;
  const auto copy = trees;
  trees.insert(trees.end(), copy.begin(), copy.end());
  EXPECT_EQ(estimate_tree_exact(m).parameter_count, 2 * single);
}

TEST(TreeEstimate, MatchesNodeWalk) {
  const auto lte = synth_dataset({SyntheticKind::lte_regression, 400, 1.0}, 3);
  const auto m5 = train_m5(lte, all_rows(lte), M5Params{});
  const auto& tree = std::get<M5Model>(m5.body).tree;
  EXPECT_EQ(estimate_tree_exact(m5).parameter_count,
            tree_oracle(tree.internal_count(), tree.leaf_count(), lte.features() + 1));

  RfParams p;
  p.trees = 4;
  const auto rf = train_rf(lte, all_rows(lte), p);
  std::size_t want = 0;
  for (const auto& t : std::get<ForestModel>(rf.body).trees) want += tree_oracle(t.internal_count(), t.leaf_count(), 1);
  EXPECT_EQ(estimate_tree_exact(rf).parameter_count, want);
}

TEST(WorstCase, ClosedForm) {
  RfParams p;
  p.trees = 1;
  p.max_depth = 1;
  EXPECT_EQ(estimate_tree_worst_case(p).parameter_count, tree_oracle(1, 2, 1));
  p.trees = 5;
  p.max_depth = 6;
  EXPECT_EQ(estimate_tree_worst_case(p).parameter_count, 5 * tree_oracle(63, 64, 1));
  EXPECT_EQ(estimate_tree_worst_case(p).kind, EstimateKind::worst_case);
}

TEST(WorstCase, BoundsEveryTrainedForest) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 25; ++t) {
    const bool classify = t % 2 == 0;
    const auto ds = synth_dataset({classify ? SyntheticKind::vehicle_classification : SyntheticKind::lte_regression,
                                   100 + gen() % 300, 1.0},
                                  gen());
    RfParams p;
    p.trees = 1 + static_cast<int>(gen() % 6);
    p.max_depth = 1 + static_cast<int>(gen() % 10);
    p.seed = gen();
    const auto m = train_rf(ds, all_rows(ds), p);
    EXPECT_GE(estimate_tree_worst_case(p).parameter_count, estimate_tree_exact(m).parameter_count);
  }
}
