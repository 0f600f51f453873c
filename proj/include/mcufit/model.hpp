#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcufit/dataset.hpp"

namespace mcufit {

enum class Family { ann, rf, m5, svm };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

enum class Activation { sigmoid, linear };

std::string_view to_string(Activation activation);

// Hyperparameter blocks, one per learner family. Counts are positive and
// rates/fractions lie in (0, 1].

struct AnnParams {
  int hidden_layers = 1;
  int neurons = 8;
  int epochs = 150;
  double learning_rate = 0.1;
  int batch_size = 16;
  Activation hidden_activation = Activation::sigmoid;
  std::uint64_t seed = 1;
};

struct RfParams {
  int trees = 10;
  int max_depth = 8;
  // Fraction of features considered per split; unset selects ceil(sqrt(d))
  // for classification and ceil(d/3) for regression.
  std::optional<double> feature_subsample;
  double bootstrap_fraction = 1.0;
  std::uint64_t seed = 1;
};

struct M5Params {
  int min_leaf_size = 4;
  bool prune = true;
};

struct SvmParams {
  double regularization = 1.0;
  double tolerance = 0.1;
  int max_passes = 200;
  std::uint64_t seed = 1;
};

/// Abstract description of one learner configuration.
struct ModelConfig {
  std::variant<AnnParams, RfParams, M5Params, SvmParams> params;

  Family family() const;
  /// Throws ConfigError when a count is not positive or a rate is out of range.
  void validate() const;
  /// Short display form, e.g. "ann{3,12}" or "rf{5,6}".
  std::string label() const;

  static ModelConfig defaults(Family family);
  static ModelConfig ann(int hidden_layers, int neurons);
  static ModelConfig rf(int trees, int max_depth);

  const AnnParams& as_ann() const { return std::get<AnnParams>(params); }
  const RfParams& as_rf() const { return std::get<RfParams>(params); }
  const M5Params& as_m5() const { return std::get<M5Params>(params); }
  const SvmParams& as_svm() const { return std::get<SvmParams>(params); }
};

// ---------------------------------------------------------------------------
// Trained model intermediate representation. Parameters are stored in 64-bit
// reals; narrowing happens only in code generation and in the f32 reference
// evaluator.

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // row-major, outputs x inputs
  std::vector<double> bias;     // outputs
  Activation activation = Activation::linear;

  double& w(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
  double w(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }
};

struct AnnModel {
  std::vector<DenseLayer> layers;
  Normalization input;
  // Regression outputs are produced in standardized units and mapped back
  // with y * target_scale + target_mean.
  double target_mean = 0.0;
  double target_scale = 1.0;

  /// L_1..L_N: input width followed by every layer's output width.
  std::vector<std::size_t> layer_sizes() const;
};

struct TreeNode {
  int feature = -1;  // < 0 marks a leaf
  double threshold = 0.0;
  int left = -1;   // taken when x[feature] <= threshold
  int right = -1;
  // Leaf payload: constant prediction, class index, or linear-model intercept.
  double value = 0.0;
  std::vector<double> coefficients;  // linear leaves only, length d
  // Training statistics used by impurity-based importance.
  std::size_t samples = 0;
  double impurity = 0.0;

  bool is_leaf() const { return feature < 0; }
};

enum class LeafKind { constant, class_vote, linear };

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  LeafKind leaf_kind = LeafKind::constant;

  /// Longest root-to-leaf path in edges.
  int depth() const;
  std::size_t internal_count() const;
  std::size_t leaf_count() const;
};

enum class Aggregation { mean, majority_vote };

struct ForestModel {
  std::vector<Tree> trees;
  Aggregation aggregation = Aggregation::mean;
};

struct M5Model {
  Tree tree;
};

/// One linear separator. For classification, w.z + b > 0 votes for
/// `positive`, otherwise for `negative`. Regression models carry a single
/// plane whose value is the prediction.
struct Hyperplane {
  int positive = 0;
  int negative = 0;
  std::vector<double> weights;
  double bias = 0.0;
};

struct SvmModel {
  Normalization input;
  std::vector<Hyperplane> planes;  // class pairs (0,1), (0,2), ..., (n-2,n-1)
};

struct TrainedModel {
  Task task = Task::regression;
  std::size_t features = 0;
  int classes = 0;  // 0 for regression
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  std::variant<AnnModel, ForestModel, M5Model, SvmModel> body;
  // Non-fatal conditions raised during training (fallbacks, substitutions).
  std::vector<std::string> notes;

  Family family() const;

  /// Checks the structural invariants (layer shape chaining, tree child links
  /// and feature indices, one-vs-one plane count) and throws CodegenError on
  /// violation. A positive `max_depth` also bounds every tree.
  void validate(int max_depth = 0) const;
};

enum class Precision { f64, f32 };

/// Reference evaluator. Regression models return the prediction; classifiers
/// return the class index as an exact double. Precision::f32 narrows every
/// parameter and input to 32-bit floats and evaluates in the same operation
/// order as the generated C code.
double predict(const TrainedModel& model, std::span<const double> x,
               Precision precision = Precision::f64);

int predict_class(const TrainedModel& model, std::span<const double> x,
                  Precision precision = Precision::f64);

/// Equivalent model whose input standardization (and regression output
/// scaling) is folded into the first and last affine maps. Used when code is
/// generated without inline normalization constants.
TrainedModel fold_normalization(const TrainedModel& model);

/// Throws ConfigError when the family cannot learn the task (M5 is
/// regression-only).
void check_supports(const ModelConfig& cfg, Task task);

// ---------------------------------------------------------------------------
// Training backends. `rows` selects the training subset of `ds`.

TrainedModel train(const Dataset& ds, std::span<const std::size_t> rows, const ModelConfig& cfg);
TrainedModel train_ann(const Dataset& ds, std::span<const std::size_t> rows, const AnnParams& p);
TrainedModel train_rf(const Dataset& ds, std::span<const std::size_t> rows, const RfParams& p);
TrainedModel train_m5(const Dataset& ds, std::span<const std::size_t> rows, const M5Params& p);
TrainedModel train_svm(const Dataset& ds, std::span<const std::size_t> rows, const SvmParams& p);

namespace ann {

/// Mean batch loss of a layer stack on already-standardized inputs
/// (row-major, batch x inputs). Regression: 0.5 * mean squared error against
/// standardized targets. Classification: mean softmax cross-entropy of the
/// raw output scores against class indices.
double batch_loss(std::span<const DenseLayer> layers, Task task,
                  std::span<const double> inputs, std::span<const double> targets);

/// Analytic gradient of batch_loss, shaped like `layers`.
std::vector<DenseLayer> batch_gradient(std::span<const DenseLayer> layers, Task task,
                                       std::span<const double> inputs,
                                       std::span<const double> targets);

}  // namespace ann

// JSON text form of the IR: family tag, shapes, row-major weights, and the
// recursive tree structure.
std::string to_json(const TrainedModel& model);
TrainedModel model_from_json(std::string_view text);

}  // namespace mcufit
