#include <algorithm>
#include <cmath>
#include <functional>

#include "mcufit/error.hpp"
#include "mcufit/model.hpp"

namespace mcufit {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::ann: return "ann";
    case Family::rf: return "rf";
    case Family::m5: return "m5";
    case Family::svm: return "svm";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "ann") return Family::ann;
  if (name == "rf") return Family::rf;
  if (name == "m5") return Family::m5;
  if (name == "svm") return Family::svm;
  throw ConfigError("unknown model family '" + std::string(name) + "' (known: ann, rf, m5, svm)");
}

std::string_view to_string(Activation activation) {
  return activation == Activation::sigmoid ? "sigmoid" : "linear";
}

Family ModelConfig::family() const { return static_cast<Family>(params.index()); }

namespace {

void require_positive(long value, const char* what) {
  if (value <= 0) throw ConfigError(std::string(what) + " must be positive");
}

void require_unit_interval(double value, const char* what) {
  if (!(value > 0.0 && value <= 1.0)) throw ConfigError(std::string(what) + " must lie in (0, 1]");
}

}  // namespace

void ModelConfig::validate() const {
  switch (family()) {
    case Family::ann: {
      const auto& p = as_ann();
      require_positive(p.hidden_layers, "hidden layer count");
      require_positive(p.neurons, "neurons per layer");
      require_positive(p.epochs, "epoch count");
      require_positive(p.batch_size, "batch size");
      require_unit_interval(p.learning_rate, "learning rate");
      break;
    }
    case Family::rf: {
      const auto& p = as_rf();
      require_positive(p.trees, "tree count");
      require_positive(p.max_depth, "max depth");
      if (p.feature_subsample) require_unit_interval(*p.feature_subsample, "feature subsample");
      require_unit_interval(p.bootstrap_fraction, "bootstrap fraction");
      break;
    }
    case Family::m5:
      require_positive(as_m5().min_leaf_size, "minimum leaf size");
      break;
    case Family::svm: {
      const auto& p = as_svm();
      if (!(p.regularization > 0.0)) throw ConfigError("regularization must be positive");
      if (!(p.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
      require_positive(p.max_passes, "max passes");
      break;
    }
  }
}

std::string ModelConfig::label() const {
  switch (family()) {
    case Family::ann:
      return "ann{" + std::to_string(as_ann().hidden_layers) + "," +
             std::to_string(as_ann().neurons) + "}";
    case Family::rf:
      return "rf{" + std::to_string(as_rf().trees) + "," + std::to_string(as_rf().max_depth) + "}";
    case Family::m5:
      return "m5";
    case Family::svm:
      return "svm";
  }
  return "?";
}

ModelConfig ModelConfig::defaults(Family family) {
  switch (family) {
    case Family::ann: return {AnnParams{}};
    case Family::rf: return {RfParams{}};
    case Family::m5: return {M5Params{}};
    case Family::svm: return {SvmParams{}};
  }
  throw ConfigError("unknown family");
}

ModelConfig ModelConfig::ann(int hidden_layers, int neurons) {
  AnnParams p;
  p.hidden_layers = hidden_layers;
  p.neurons = neurons;
  return {p};
}

ModelConfig ModelConfig::rf(int trees, int max_depth) {
  RfParams p;
  p.trees = trees;
  p.max_depth = max_depth;
  return {p};
}

std::vector<std::size_t> AnnModel::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().inputs);
  for (const auto& layer : layers) sizes.push_back(layer.outputs);
  return sizes;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    const auto& node = nodes[static_cast<std::size_t>(idx)];
    if (node.is_leaf()) {
      best = std::max(best, d);
    } else {
      stack.push_back({node.left, d + 1});
      stack.push_back({node.right, d + 1});
    }
  }
  return best;
}

std::size_t Tree::internal_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

std::size_t Tree::leaf_count() const { return nodes.size() - internal_count(); }

Family TrainedModel::family() const {
  switch (body.index()) {
    case 0: return Family::ann;
    case 1: return Family::rf;
    case 2: return Family::m5;
    default: return Family::svm;
  }
}

namespace {

void fail(const std::string& what) { throw CodegenError("IR invariant violation: " + what); }

void validate_tree(const Tree& tree, std::size_t d, int classes, int max_depth) {
  if (tree.nodes.empty()) fail("empty tree");
  std::vector<int> parents(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.is_leaf()) {
      if (!std::isfinite(n.value)) fail("non-finite leaf value");
      if (tree.leaf_kind == LeafKind::linear && n.coefficients.size() != d) {
        fail("linear leaf coefficient count differs from feature count");
      }
      if (tree.leaf_kind == LeafKind::class_vote &&
          (n.value < 0 || n.value >= classes || n.value != std::floor(n.value))) {
        fail("leaf class index out of range");
      }
      continue;
    }
    if (static_cast<std::size_t>(n.feature) >= d) fail("split feature index out of range");
    if (!std::isfinite(n.threshold)) fail("non-finite threshold");
    for (int child : {n.left, n.right}) {
      if (child <= 0 || static_cast<std::size_t>(child) >= tree.nodes.size()) {
        fail("internal node with missing child");
      }
      ++parents[static_cast<std::size_t>(child)];
    }
  }
  for (std::size_t i = 1; i < parents.size(); ++i) {
    if (parents[i] != 1) fail("tree node not reachable exactly once");
  }
  if (max_depth > 0 && tree.depth() > max_depth) fail("tree deeper than configured max depth");
}

}  // namespace

void TrainedModel::validate(int max_depth) const {
  if (features == 0) fail("feature count 0");
  if (task == Task::classification && classes < 2) fail("classifier with fewer than two classes");
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AnnModel>) {
          if (m.layers.empty()) fail("network without layers");
          if (m.input.size() != features) fail("input normalization width differs from d");
          std::size_t prev = features;
          for (const auto& layer : m.layers) {
            if (layer.inputs != prev) fail("layer shapes do not chain");
            if (layer.outputs == 0) fail("empty layer");
            if (layer.weights.size() != layer.inputs * layer.outputs ||
                layer.bias.size() != layer.outputs) {
              fail("weight matrix shape mismatch");
            }
            prev = layer.outputs;
          }
          const std::size_t expected =
              task == Task::regression ? 1u : static_cast<std::size_t>(classes);
          if (prev != expected) fail("output layer width mismatch");
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          if (m.trees.empty()) fail("empty forest");
          for (const auto& t : m.trees) validate_tree(t, features, classes, max_depth);
        } else if constexpr (std::is_same_v<T, M5Model>) {
          if (task != Task::regression) fail("M5 model for a classification task");
          validate_tree(m.tree, features, classes, max_depth);
        } else {
          if (m.input.size() != features) fail("input normalization width differs from d");
          const std::size_t expected =
              task == Task::regression
                  ? 1u
                  : static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes - 1) / 2;
          if (m.planes.size() != expected) fail("hyperplane count differs from n(n-1)/2");
          for (const auto& p : m.planes) {
            if (p.weights.size() != features) fail("hyperplane width differs from d");
          }
        }
      },
      body);
}

// ---------------------------------------------------------------------------
// Reference evaluation, generic over the arithmetic type.

namespace {

template <typename T>
T cast(double v) {
  return static_cast<T>(v);
}

template <typename T>
T activate(Activation a, T x) {
  if (a == Activation::linear) return x;
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
std::vector<T> standardize(const Normalization& norm, std::span<const double> x) {
  std::vector<T> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    z[j] = (cast<T>(x[j]) - cast<T>(norm.mean[j])) / cast<T>(norm.scale[j]);
  }
  return z;
}

template <typename T>
int argmax(std::span<const T> scores) {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

template <typename T>
T eval_ann(const TrainedModel& model, const AnnModel& net, std::span<const double> x) {
  std::vector<T> a = standardize<T>(net.input, x);
  std::vector<T> next;
  for (const auto& layer : net.layers) {
    next.assign(layer.outputs, T(0));
    for (std::size_t i = 0; i < layer.outputs; ++i) {
      T acc = cast<T>(layer.bias[i]);
      for (std::size_t j = 0; j < layer.inputs; ++j) acc += cast<T>(layer.w(i, j)) * a[j];
      next[i] = activate(layer.activation, acc);
    }
    a.swap(next);
  }
  if (model.task == Task::classification) return static_cast<T>(argmax<T>(a));
  return a[0] * cast<T>(net.target_scale) + cast<T>(net.target_mean);
}

template <typename T>
const TreeNode& find_leaf(const Tree& tree, std::span<const double> x) {
  const TreeNode* node = &tree.nodes[0];
  while (!node->is_leaf()) {
    const bool left = cast<T>(x[static_cast<std::size_t>(node->feature)]) <= cast<T>(node->threshold);
    node = &tree.nodes[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  return *node;
}

template <typename T>
T eval_leaf(const Tree& tree, const TreeNode& leaf, std::span<const double> x) {
  if (tree.leaf_kind != LeafKind::linear) return cast<T>(leaf.value);
  T acc = cast<T>(leaf.value);
  for (std::size_t j = 0; j < leaf.coefficients.size(); ++j) {
    acc += cast<T>(leaf.coefficients[j]) * cast<T>(x[j]);
  }
  return acc;
}

template <typename T>
T eval_forest(const TrainedModel& model, const ForestModel& forest, std::span<const double> x) {
  if (forest.aggregation == Aggregation::majority_vote) {
    std::vector<int> votes(static_cast<std::size_t>(model.classes), 0);
    for (const auto& tree : forest.trees) {
      ++votes[static_cast<std::size_t>(find_leaf<T>(tree, x).value)];
    }
    return static_cast<T>(argmax<int>(votes));
  }
  T sum = T(0);
  for (const auto& tree : forest.trees) sum += eval_leaf<T>(tree, find_leaf<T>(tree, x), x);
  return sum / static_cast<T>(forest.trees.size());
}

template <typename T>
T eval_svm(const TrainedModel& model, const SvmModel& svm, std::span<const double> x) {
  const std::vector<T> z = standardize<T>(svm.input, x);
  auto score = [&](const Hyperplane& p) {
    T acc = cast<T>(p.bias);
    for (std::size_t j = 0; j < z.size(); ++j) acc += cast<T>(p.weights[j]) * z[j];
    return acc;
  };
  if (model.task == Task::regression) return score(svm.planes.front());
  std::vector<int> votes(static_cast<std::size_t>(model.classes), 0);
  for (const auto& p : svm.planes) {
    ++votes[static_cast<std::size_t>(score(p) > T(0) ? p.positive : p.negative)];
  }
  return static_cast<T>(argmax<int>(votes));
}

template <typename T>
T evaluate(const TrainedModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> T {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, AnnModel>) {
          return eval_ann<T>(model, m, x);
        } else if constexpr (std::is_same_v<M, ForestModel>) {
          return eval_forest<T>(model, m, x);
        } else if constexpr (std::is_same_v<M, M5Model>) {
          return eval_leaf<T>(m.tree, find_leaf<T>(m.tree, x), x);
        } else {
          return eval_svm<T>(model, m, x);
        }
      },
      model.body);
}

}  // namespace

double predict(const TrainedModel& model, std::span<const double> x, Precision precision) {
  if (x.size() != model.features) {
    throw ConfigError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                      std::to_string(model.features));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw ConfigError("non-finite feature value");
  }
  if (precision == Precision::f32) return static_cast<double>(evaluate<float>(model, x));
  return evaluate<double>(model, x);
}

int predict_class(const TrainedModel& model, std::span<const double> x, Precision precision) {
  return static_cast<int>(predict(model, x, precision));
}

TrainedModel fold_normalization(const TrainedModel& model) {
  TrainedModel out = model;
  auto fold_into = [](const Normalization& norm, std::span<double> weights, double& bias) {
    // w.((x - m) / s) + b  ==  (w / s).x + (b - sum(w m / s))
    for (std::size_t j = 0; j < weights.size(); ++j) {
      bias -= weights[j] * norm.mean[j] / norm.scale[j];
      weights[j] /= norm.scale[j];
    }
  };
  if (auto* net = std::get_if<AnnModel>(&out.body)) {
    auto& first = net->layers.front();
    for (std::size_t i = 0; i < first.outputs; ++i) {
      fold_into(net->input, std::span(first.weights).subspan(i * first.inputs, first.inputs),
                first.bias[i]);
    }
    net->input = Normalization::identity(out.features);
    if (out.task == Task::regression) {
      auto& last = net->layers.back();
      for (double& w : last.weights) w *= net->target_scale;
      last.bias[0] = last.bias[0] * net->target_scale + net->target_mean;
      net->target_mean = 0.0;
      net->target_scale = 1.0;
    }
  } else if (auto* svm = std::get_if<SvmModel>(&out.body)) {
    for (auto& p : svm->planes) fold_into(svm->input, p.weights, p.bias);
    svm->input = Normalization::identity(out.features);
  }
  return out;
}

void check_supports(const ModelConfig& cfg, Task task) {
  if (cfg.family() == Family::m5 && task != Task::regression) {
    throw ConfigError("M5 is regression-only");
  }
}

TrainedModel train(const Dataset& ds, std::span<const std::size_t> rows, const ModelConfig& cfg) {
  cfg.validate();
  check_supports(cfg, ds.task());
  switch (cfg.family()) {
    case Family::ann: return train_ann(ds, rows, cfg.as_ann());
    case Family::rf: return train_rf(ds, rows, cfg.as_rf());
    case Family::m5: return train_m5(ds, rows, cfg.as_m5());
    case Family::svm: return train_svm(ds, rows, cfg.as_svm());
  }
  throw ConfigError("unknown family");
}

}  // namespace mcufit
