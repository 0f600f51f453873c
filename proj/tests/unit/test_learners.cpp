#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mcufit/error.hpp"
#include "mcufit/estimators.hpp"
#include "mcufit/model.hpp"
#include "oracles.hpp"

using namespace mcufit;

namespace {

double training_accuracy(const TrainedModel& m, const Dataset& ds) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) hits += predict_class(m, ds.row(i)) == ds.label(i);
  return static_cast<double>(hits) / static_cast<double>(ds.rows());
}

int max_path(const Tree& t, int node) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return 0;
  return 1 + std::max(max_path(t, n.left), max_path(t, n.right));
}

void check_binary(const Tree& t, std::size_t d) {
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    ASSERT_GE(n.left, 0);
    ASSERT_GE(n.right, 0);
    ASSERT_LT(static_cast<std::size_t>(n.feature), d);
  }
}

TrainedModel ann_model(std::vector<DenseLayer> layers, std::size_t d, Task task, int classes) {
  TrainedModel m;
  m.task = task;
  m.features = d;
  m.classes = classes;
  for (std::size_t j = 0; j < d; ++j) m.feature_names.push_back("f" + std::to_string(j));
  for (int c = 0; c < classes; ++c) m.class_labels.push_back("c" + std::to_string(c));
  AnnModel ann;
  ann.layers = std::move(layers);
  ann.input = Normalization::identity(d);
  m.body = ann;
  return m;
}

}  // namespace

TEST(Config, RejectsNonPositiveCounts) {
  auto rf = ModelConfig::rf(3, 0);
  EXPECT_THROW(rf.validate(), ConfigError);
  EXPECT_THROW(ModelConfig::ann(0, 4).validate(), ConfigError);
  AnnParams p;
  p.learning_rate = 1.5;
  EXPECT_THROW(ModelConfig{p}.validate(), ConfigError);
  EXPECT_NO_THROW(ModelConfig::defaults(Family::svm).validate());
  EXPECT_THROW(parse_family("knn"), ConfigError);
}

TEST(Config, Labels) {
  EXPECT_EQ(ModelConfig::ann(3, 12).label(), "ann{3,12}");
  EXPECT_EQ(ModelConfig::rf(5, 6).label(), "rf{5,6}");
}

TEST(Ann, LayerShapesGiveLayerFormulaCount) {
  const auto ds = oracle::linear_regression(60, std::vector<double>(9, 0.5), 1.0, 2);
  AnnParams p;
  p.hidden_layers = 3;
  p.neurons = 12;
  p.epochs = 2;
  const auto m = train_ann(ds, all_rows(ds), p);
  const auto sizes = std::get<AnnModel>(m.body).layer_sizes();
  EXPECT_EQ(sizes, (std::vector<std::size_t>{9, 12, 12, 12, 1}));
  std::size_t params = 0;
  for (const auto& l : std::get<AnnModel>(m.body).layers) params += l.weights.size() + l.bias.size();
  EXPECT_EQ(params, oracle::ann_parameters(sizes));
  EXPECT_EQ(params, 445u);
  EXPECT_NO_THROW(m.validate());
}

TEST(Ann, LinearUnitRecoversLine) {
  const auto ds = oracle::linear_regression(200, {2.5}, -1.0, 3);
  AnnParams p;
  p.hidden_layers = 1;
  p.neurons = 1;
  p.hidden_activation = Activation::linear;
  p.epochs = 400;
  p.learning_rate = 0.05;
  const auto m = train_ann(ds, all_rows(ds), p);
  const double at0 = predict(m, std::vector<double>{0.0});
  const double at1 = predict(m, std::vector<double>{1.0});
  EXPECT_NEAR(at0, -1.0, 1e-3);
  EXPECT_NEAR(at1 - at0, 2.5, 1e-3);
}

TEST(Ann, Deterministic) {
  const auto ds = synth_dataset({SyntheticKind::vehicle_classification, 140, 1.0}, 2);
  AnnParams p;
  p.epochs = 5;
  const auto a = train_ann(ds, all_rows(ds), p);
  const auto b = train_ann(ds, all_rows(ds), p);
  EXPECT_EQ(to_json(a), to_json(b));
  p.seed = 2;
  EXPECT_NE(to_json(a), to_json(train_ann(ds, all_rows(ds), p)));
}

TEST(Ann, ZeroNetworkPredictsZero) {
  DenseLayer hidden{3, 2, std::vector<double>(6, 0.0), {0.0, 0.0}, Activation::sigmoid};
  DenseLayer out{2, 1, {0.0, 0.0}, {0.0}, Activation::linear};
  // Sigmoid(0) = 0.5 feeds zero output weights.
  const auto m = ann_model({hidden, out}, 3, Task::regression, 0);
  EXPECT_EQ(predict(m, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(predict(m, std::vector<double>{1, 2, 3}, Precision::f32), 0.0);
}

// Analytic gradients against central finite differences (h = 1e-5) on a
// 5-sample batch, for every parameter of every layer.
TEST(Ann, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0.0, 0.7);
  for (Task task : {Task::regression, Task::classification}) {
    const std::vector<std::size_t> sizes{4, 5, 3, task == Task::classification ? 3u : 1u};
    std::vector<DenseLayer> layers;
    for (std::size_t i = 1; i < sizes.size(); ++i) {
      DenseLayer l{sizes[i - 1], sizes[i], {}, {},
                   i + 1 == sizes.size() ? Activation::linear : Activation::sigmoid};
      for (std::size_t k = 0; k < l.inputs * l.outputs; ++k) l.weights.push_back(n(gen));
      for (std::size_t k = 0; k < l.outputs; ++k) l.bias.push_back(n(gen));
      layers.push_back(l);
    }
    std::vector<double> inputs, targets;
    for (int s = 0; s < 5; ++s) {
      for (std::size_t j = 0; j < sizes[0]; ++j) inputs.push_back(n(gen));
      targets.push_back(task == Task::classification ? static_cast<double>(s % 3) : n(gen));
    }

    std::vector<double> flat;
    for (const auto& l : layers) {
      flat.insert(flat.end(), l.weights.begin(), l.weights.end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    const auto unflatten = [&](const std::vector<double>& w) {
      auto copy = layers;
      std::size_t k = 0;
      for (auto& l : copy) {
        for (auto& v : l.weights) v = w[k++];
        for (auto& v : l.bias) v = w[k++];
      }
      return copy;
    };
    const auto numeric = oracle::numeric_gradient(flat, 1e-5, [&](const std::vector<double>& w) {
      return ann::batch_loss(unflatten(w), task, inputs, targets);
    });
    const auto analytic = ann::batch_gradient(layers, task, inputs, targets);
    std::size_t k = 0;
    for (const auto& g : analytic) {
      std::vector<double> all(g.weights);
      all.insert(all.end(), g.bias.begin(), g.bias.end());
      for (double a : all) {
        const double num = numeric[k++];
        const double rel = std::fabs(a - num) / std::max(1e-8, std::max(std::fabs(a), std::fabs(num)));
        EXPECT_LE(rel, 1e-4) << "parameter " << k - 1 << " analytic " << a << " numeric " << num;
      }
    }
    EXPECT_EQ(k, flat.size());
  }
}

TEST(Forest, StumpSeparatesSeparableData) {
  const auto ds = oracle::separable_classes(20, 2, 1, 5);
  RfParams p;
  p.trees = 1;
  p.max_depth = 1;
  const auto m = train_rf(ds, all_rows(ds), p);
  const auto& forest = std::get<ForestModel>(m.body);
  ASSERT_EQ(forest.trees.size(), 1u);
  EXPECT_EQ(forest.trees[0].nodes.size(), 3u);
  EXPECT_EQ(training_accuracy(m, ds), 1.0);
}

TEST(Forest, PureNodeNeverSplits) {
  const Dataset ds({"x"}, {1, 2, 3, 4}, {7, 7, 7, 7}, Task::regression);
  const auto m = train_rf(ds, all_rows(ds), RfParams{});
  for (const auto& t : std::get<ForestModel>(m.body).trees) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(Forest, DepthBoundAndStructure) {
  const auto ds = synth_dataset({SyntheticKind::vehicle_classification, 700, 1.0}, 1);
  RfParams p;
  p.trees = 9;
  p.max_depth = 7;
  const auto m = train_rf(ds, all_rows(ds), p);
  const auto& forest = std::get<ForestModel>(m.body);
  ASSERT_EQ(forest.trees.size(), 9u);
  for (const auto& t : forest.trees) {
    EXPECT_LE(max_path(t, 0), 7);
    EXPECT_EQ(t.depth(), max_path(t, 0));
    check_binary(t, ds.features());
    EXPECT_EQ(t.leaf_count(), t.internal_count() + 1);
  }
  EXPECT_NO_THROW(m.validate(7));
}

TEST(Forest, IdenticalTreesAverageToOneTree) {
  const auto ds = oracle::linear_regression(80, {1.0, -3.0}, 2.0, 4);
  RfParams p;
  p.trees = 1;
  const auto single = train_rf(ds, all_rows(ds), p);
  auto many = single;
  auto& forest = std::get<ForestModel>(many.body);
  const Tree t = forest.trees[0];
  forest.trees = {t, t, t, t, t};
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    EXPECT_DOUBLE_EQ(predict(many, ds.row(i)), predict(single, ds.row(i)));
  }
}

TEST(Forest, ScaleInvariance) {
  const auto ds = synth_dataset({SyntheticKind::lte_regression, 300, 1.0}, 6);
  auto values = ds.values();
  for (std::size_t i = 0; i < ds.rows(); ++i) values[i * ds.features() + 3] *= 4.0;
  const Dataset scaled(ds.feature_names(), values, ds.targets(), Task::regression);
  RfParams p;
  p.trees = 3;
  p.max_depth = 6;
  const auto a = train_rf(ds, all_rows(ds), p);
  const auto b = train_rf(scaled, all_rows(scaled), p);
  const auto ma = train_m5(ds, all_rows(ds), M5Params{});
  const auto mb = train_m5(scaled, all_rows(scaled), M5Params{});
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    EXPECT_EQ(predict(a, ds.row(i)), predict(b, scaled.row(i)));
    // Linear leaves are re-solved in the rescaled basis, so only rounding differs.
    EXPECT_NEAR(predict(ma, ds.row(i)), predict(mb, scaled.row(i)),
                1e-7 * std::max(1.0, std::fabs(predict(ma, ds.row(i)))));
  }
  const auto& ta = std::get<M5Model>(ma.body).tree;
  const auto& tb = std::get<M5Model>(mb.body).tree;
  ASSERT_EQ(ta.nodes.size(), tb.nodes.size());
  for (std::size_t k = 0; k < ta.nodes.size(); ++k) {
    EXPECT_EQ(ta.nodes[k].feature, tb.nodes[k].feature);
    EXPECT_EQ(ta.nodes[k].threshold * (ta.nodes[k].feature == 3 ? 4.0 : 1.0), tb.nodes[k].threshold);
  }
}

TEST(Forest, Deterministic) {
  const auto ds = synth_dataset({SyntheticKind::vehicle_classification, 140, 1.0}, 2);
  RfParams p;
  p.trees = 4;
  EXPECT_EQ(to_json(train_rf(ds, all_rows(ds), p)), to_json(train_rf(ds, all_rows(ds), p)));
}

TEST(M5, RegressionOnly) {
  const auto ds = oracle::separable_classes(10, 2, 2, 1);
  try {
    train_m5(ds, all_rows(ds), M5Params{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "M5 is regression-only");
  }
  EXPECT_THROW(check_supports(ModelConfig::defaults(Family::m5), Task::classification), ConfigError);
}

TEST(M5, PlaneIsSingleLeaf) {
  const std::vector<double> coef{1.5, -2.0, 0.25};
  const auto ds = oracle::linear_regression(100, coef, 3.0, 9);
  const auto m = train_m5(ds, all_rows(ds), M5Params{});
  const auto& tree = std::get<M5Model>(m.body).tree;
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_NEAR(tree.nodes[0].value, 3.0, 1e-9);
  for (std::size_t j = 0; j < coef.size(); ++j) EXPECT_NEAR(tree.nodes[0].coefficients[j], coef[j], 1e-9);
}

TEST(M5, FirstSplitAtBreakpoint) {
  // y = x0 below 5 and x0 + 20 above; x1 is noise.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> values, target;
  for (int i = 0; i < 200; ++i) {
    const double x0 = u(gen), x1 = u(gen);
    values.insert(values.end(), {x0, x1});
    target.push_back(x0 < 5.0 ? x0 : x0 + 20.0);
  }
  const Dataset ds({"x0", "x1"}, values, target, Task::regression);

  // Brute-force variance-reduction scan over all midpoints.
  int best_f = -1;
  long double best_gain = -1, best_t = 0;
  for (int f = 0; f < 2; ++f) {
    std::vector<std::pair<double, double>> col;
    for (std::size_t i = 0; i < ds.rows(); ++i) col.emplace_back(ds.at(i, f), ds.target(i));
    std::sort(col.begin(), col.end());
    for (std::size_t s = 4; s + 4 <= col.size(); ++s) {
      if (!(col[s - 1].first < col[s].first)) continue;
      auto var = [&](std::size_t lo, std::size_t hi) {
        long double m = 0, v = 0;
        for (std::size_t k = lo; k < hi; ++k) m += col[k].second;
        m /= (hi - lo);
        for (std::size_t k = lo; k < hi; ++k) v += (col[k].second - m) * (col[k].second - m);
        return v;
      };
      const long double gain = -(var(0, s) + var(s, col.size()));
      if (best_f < 0 || gain > best_gain) {
        best_f = f;
        best_gain = gain;
        best_t = 0.5L * (col[s - 1].first + col[s].first);
      }
    }
  }
  const auto m = train_m5(ds, all_rows(ds), M5Params{});
  const auto& root = std::get<M5Model>(m.body).tree.nodes[0];
  ASSERT_FALSE(root.is_leaf());
  EXPECT_EQ(root.feature, best_f);
  EXPECT_EQ(root.feature, 0);
  EXPECT_NEAR(root.threshold, static_cast<double>(best_t), 1e-12);
  EXPECT_NEAR(root.threshold, 5.0, 0.2);
}

TEST(Svm, PlaneCounts) {
  const auto two = oracle::separable_classes(20, 2, 3, 1);
  EXPECT_EQ(std::get<SvmModel>(train_svm(two, all_rows(two), SvmParams{}).body).planes.size(), 1u);
  const auto seven = synth_dataset({SyntheticKind::vehicle_classification, 350, 1.0}, 1);
  const auto m = train_svm(seven, all_rows(seven), SvmParams{});
  const auto& planes = std::get<SvmModel>(m.body).planes;
  ASSERT_EQ(planes.size(), 21u);
  std::size_t p = 0;
  for (int a = 0; a < 7; ++a) {
    for (int b = a + 1; b < 7; ++b, ++p) {
      EXPECT_EQ(planes[p].positive, a);
      EXPECT_EQ(planes[p].negative, b);
    }
  }
  EXPECT_NO_THROW(m.validate());
}

TEST(Svm, SeparableDataIsLearnedExactly) {
  const auto ds = oracle::separable_classes(30, 2, 2, 7);
  EXPECT_EQ(training_accuracy(train_svm(ds, all_rows(ds), SvmParams{}), ds), 1.0);
  const auto three = oracle::separable_classes(30, 3, 2, 7);
  EXPECT_EQ(training_accuracy(train_svm(three, all_rows(three), SvmParams{}), three), 1.0);
}

TEST(Svm, VoteFavoursPairwiseWinner) {
  TrainedModel m;
  m.task = Task::classification;
  m.features = 1;
  m.classes = 3;
  m.feature_names = {"x"};
  m.class_labels = {"a", "b", "c"};
  SvmModel svm;
  svm.input = Normalization::identity(1);
  // Every plane scores -1, so each pair votes for its second class.
  svm.planes = {{0, 1, {0.0}, -1.0}, {0, 2, {0.0}, -1.0}, {1, 2, {0.0}, -1.0}};
  m.body = svm;
  EXPECT_EQ(predict_class(m, std::vector<double>{0.3}), 2);
  EXPECT_EQ(predict_class(m, std::vector<double>{0.3}, Precision::f32), 2);
}

TEST(Predict, RejectsBadInput) {
  const auto ds = oracle::linear_regression(30, {1.0, 2.0}, 0.0, 1);
  const auto m = train_m5(ds, all_rows(ds), M5Params{});
  EXPECT_THROW(predict(m, std::vector<double>{1.0}), ConfigError);
  EXPECT_THROW(predict(m, std::vector<double>{1.0, NAN}), ConfigError);
}

TEST(Serialization, JsonRoundTrip) {
  const auto veh = synth_dataset({SyntheticKind::vehicle_classification, 140, 1.0}, 3);
  const auto lte = synth_dataset({SyntheticKind::lte_regression, 150, 1.0}, 3);
  AnnParams ap;
  ap.epochs = 3;
  const std::vector<TrainedModel> models{
      train_ann(veh, all_rows(veh), ap), train_rf(veh, all_rows(veh), RfParams{}),
      train_svm(veh, all_rows(veh), SvmParams{}), train_m5(lte, all_rows(lte), M5Params{}),
      train_ann(lte, all_rows(lte), ap)};
  for (const auto& m : models) {
    const auto back = model_from_json(to_json(m));
    EXPECT_EQ(to_json(back), to_json(m));
    const auto& ds = m.task == Task::classification ? veh : lte;
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(predict(back, ds.row(i)), predict(m, ds.row(i)));
  }
}

TEST(Validate, DetectsBrokenStructure) {
  const auto ds = oracle::separable_classes(10, 3, 2, 1);
  auto m = train_svm(ds, all_rows(ds), SvmParams{});
  std::get<SvmModel>(m.body).planes.pop_back();
  EXPECT_THROW(m.validate(), CodegenError);
  auto f = train_rf(ds, all_rows(ds), RfParams{});
  std::get<ForestModel>(f.body).trees[0].nodes[0].feature = 99;
  EXPECT_THROW(f.validate(), CodegenError);
}
