#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mcufit/metrics.hpp"
#include "oracles.hpp"

using namespace mcufit;

namespace {
constexpr double kTol = 1e-12;
using V = std::vector<double>;
using I = std::vector<int>;
}  // namespace

TEST(RSquared, HandExamples) {
  EXPECT_NEAR(r_squared(V{1, 2, 4}, V{1, 2, 3}), 0.5, kTol);
  EXPECT_NEAR(r_squared(V{1, 2, 3}, V{1, 2, 3}), 1.0, kTol);
  EXPECT_NEAR(r_squared(V{2, 2, 2}, V{1, 2, 3}), 0.0, kTol);
  EXPECT_LT(r_squared(V{3, 2, 1}, V{1, 2, 3}), 0.0);
}

TEST(RSquared, MatchesOracleOnRandomVectors) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    V truth(2 + gen() % 50), pred(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = n(gen);
      pred[i] = truth[i] + n(gen);
    }
    EXPECT_NEAR(r_squared(pred, truth), oracle::r2(pred, truth), kTol);
    double mean = 0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    EXPECT_NEAR(r_squared(V(truth.size(), mean), truth), 0.0, kTol);
  }
}

TEST(Errors, HandExamples) {
  EXPECT_NEAR(mae(V{3, -3}, V{0, 0}), 3.0, kTol);
  EXPECT_NEAR(rmse(V{3, -3}, V{0, 0}), 3.0, kTol);
  EXPECT_NEAR(mae(V{1, 5}, V{1, 1}), 2.0, kTol);
  EXPECT_NEAR(rmse(V{1, 5}, V{1, 1}), std::sqrt(8.0), kTol);
  EXPECT_EQ(mae(V{1, 2}, V{1, 2}), 0.0);
  EXPECT_EQ(rmse(V{1, 2}, V{1, 2}), 0.0);
}

TEST(Errors, RmseDominatesMaeAndMatchesOracle) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int t = 0; t < 1000; ++t) {
    V pred(1 + gen() % 40), truth(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = u(gen);
      truth[i] = u(gen);
    }
    const double a = mae(pred, truth), r = rmse(pred, truth);
    EXPECT_GE(r, a * (1 - kTol));
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(a, oracle::mae(pred, truth), kTol * std::max(1.0, a));
    EXPECT_NEAR(r, oracle::rmse(pred, truth), kTol * std::max(1.0, r));
  }
}

TEST(Accuracy, HandExamples) {
  EXPECT_NEAR(accuracy(I{0, 1, 0}, I{0, 1, 1}), 2.0 / 3.0, kTol);
  EXPECT_EQ(accuracy(I{1, 0}, I{0, 1}), 0.0);
  EXPECT_EQ(accuracy(I{2, 0}, I{2, 0}), 1.0);
}

TEST(PrecisionRecallF1, HandExamples) {
  const auto perfect = precision_recall_f1(I{0, 1, 1, 0}, I{0, 1, 1, 0}, 2);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);

  const auto majority = precision_recall_f1(I{0, 0, 0, 0}, I{0, 0, 1, 1}, 2);
  EXPECT_NEAR(majority.recall, 0.5, kTol);
  EXPECT_NEAR(majority.precision, 0.25, kTol);

  const auto single = precision_recall_f1(I{2, 2}, I{2, 2}, 3);
  EXPECT_EQ(single.precision, 1.0);
  EXPECT_EQ(single.recall, 1.0);
  EXPECT_EQ(single.f1, 1.0);
}

TEST(PrecisionRecallF1, MatchesConfusionMatrixOracle) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 500; ++t) {
    const int classes = 2 + static_cast<int>(gen() % 6);
    I pred(1 + gen() % 60), truth(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      truth[i] = static_cast<int>(gen() % classes);
      pred[i] = gen() % 3 == 0 ? truth[i] : static_cast<int>(gen() % classes);
    }
    const auto got = precision_recall_f1(pred, truth, classes);
    const auto want = oracle::macro_prf(pred, truth, classes);
    EXPECT_NEAR(got.precision, want.precision, kTol);
    EXPECT_NEAR(got.recall, want.recall, kTol);
    EXPECT_NEAR(got.f1, want.f1, kTol);
    EXPECT_NEAR(accuracy(pred, truth), oracle::accuracy(pred, truth), kTol);
    for (double v : {got.precision, got.recall, got.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(PrecisionRecallF1, InvariantUnderClassPermutation) {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 200; ++t) {
    const int classes = 2 + static_cast<int>(gen() % 5);
    I pred(5 + gen() % 40), truth(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      truth[i] = static_cast<int>(gen() % classes);
      pred[i] = static_cast<int>(gen() % classes);
    }
    std::vector<int> perm(classes);
    for (int c = 0; c < classes; ++c) perm[c] = c;
    std::shuffle(perm.begin(), perm.end(), gen);
    I pp(pred.size()), pt(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pp[i] = perm[pred[i]];
      pt[i] = perm[truth[i]];
    }
    EXPECT_NEAR(precision_recall_f1(pred, truth, classes).f1, precision_recall_f1(pp, pt, classes).f1, kTol);
  }
}

TEST(Summary, SampleDeviation) {
  const auto s = MetricSummary::of({1.0, 2.0, 3.0});
  EXPECT_NEAR(s.mean, 2.0, kTol);
  EXPECT_NEAR(s.stddev, 1.0, kTol);
  EXPECT_EQ(MetricSummary::of({0.5, 0.5}).stddev, 0.0);
}

TEST(Summary, PlusMinusFormat) {
  EXPECT_EQ(format_mean_std(MetricSummary::of({0.77, 0.79})), "0.78+/-0.01");
  EXPECT_EQ(format_mean_std(MetricSummary::of({2.95, 2.95})), "2.95+/-0.00");
}

TEST(CrossValidate, MajorityPredictorMatchesClassPrior) {
  // 3:1 class ratio, stratified folds, predictor returns the training majority.
  std::vector<double> values, target;
  for (int i = 0; i < 80; ++i) {
    values.push_back(i);
    target.push_back(i % 4 == 0 ? 1 : 0);
  }
  const Dataset ds({"x"}, values, target, Task::classification, {"a", "b"});
  const auto plan = make_folds(ds, 10, 3);
  const auto report = cross_validate(ds, plan, [&](auto train, auto test) {
    std::size_t ones = 0;
    for (auto r : train) ones += ds.label(r);
    const double majority = ones * 2 > train.size() ? 1.0 : 0.0;
    return std::vector<double>(test.size(), majority);
  });
  EXPECT_EQ(report.folds(), 10u);
  EXPECT_NEAR(report.at(Metric::accuracy).mean, 0.75, kTol);
  EXPECT_NEAR(report.at(Metric::accuracy).stddev, 0.0, kTol);
}

TEST(RenderTable, HeaderAndRows) {
  MetricReport a;
  a.task = Task::regression;
  a.metrics[Metric::r2] = MetricSummary::of({0.77, 0.79});
  a.metrics[Metric::mae] = MetricSummary::of({2.95, 2.95});
  a.metrics[Metric::rmse] = MetricSummary::of({4.0, 4.02});
  const std::vector<MetricReport> reports{a, a};
  const auto table = render_table(Task::regression, reports);
  EXPECT_EQ(table,
            "r2               mae              rmse\n"
            "0.78+/-0.01      2.95+/-0.00      4.01+/-0.01\n"
            "0.78+/-0.01      2.95+/-0.00      4.01+/-0.01\n");
}
