#include <cmath>
#include <limits>
#include <numeric>

#include "cart.hpp"
#include "linear.hpp"
#include "mcufit/error.hpp"
#include "mcufit/model.hpp"

namespace mcufit {
namespace {

// M5-style error adjustment: training RMSE inflated by (n + v) / (n - v) for
// v fitted parameters, so larger models must earn their extra parameters.
double adjusted_error(double sse, std::size_t n, std::size_t params) {
  const double rmse = std::sqrt(sse / static_cast<double>(n));
  if (n <= params) return rmse * 10.0;
  return rmse * static_cast<double>(n + params) / static_cast<double>(n - params);
}

class M5Builder {
 public:
  M5Builder(const Dataset& ds, const M5Params& p) : ds_(ds), params_(p) {
    tree_.leaf_kind = LeafKind::linear;
  }

  Tree build(std::span<const std::size_t> rows) {
    root_sd_ = std::sqrt(cart::impurity(ds_, rows, cart::Criterion::variance));
    std::vector<std::size_t> all(rows.begin(), rows.end());
    grow(all);
    return std::move(tree_);
  }

  std::size_t constant_fallbacks() const { return constant_fallbacks_; }
  std::size_t ridge_fallbacks() const { return ridge_fallbacks_; }

 private:
  struct Result {
    int index;
    double adjusted;  // adjusted error of the (possibly pruned) subtree
  };

  // Linear model over all features, or the constant mean when the node holds
  // too few rows to determine d + 1 parameters.
  linear::Fit leaf_model(std::span<const std::size_t> rows, std::size_t& params) {
    const std::size_t d = ds_.features();
    if (rows.size() >= d + 1) {
      auto fit = linear::least_squares(ds_, rows);
      if (fit.ridge) ++ridge_fallbacks_;
      params = d + 1;
      return fit;
    }
    ++constant_fallbacks_;
    linear::Fit fit;
    fit.coefficients.assign(d, 0.0);
    double sum = 0.0;
    for (std::size_t r : rows) sum += ds_.target(r);
    fit.intercept = sum / static_cast<double>(rows.size());
    for (std::size_t r : rows) fit.sse += (ds_.target(r) - fit.intercept) * (ds_.target(r) - fit.intercept);
    params = 1;
    return fit;
  }

  void make_leaf(int index, const linear::Fit& fit) {
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = -1;
    node.left = node.right = -1;
    node.value = fit.intercept;
    node.coefficients = fit.coefficients;
  }

  // Drops the nodes appended after `keep` (a pruned subtree is always the
  // tail of the node array because children are grown depth-first).
  void truncate(std::size_t keep) { tree_.nodes.resize(keep); }

  Result grow(const std::vector<std::size_t>& rows) {
    const int index = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.samples = rows.size();
    node.impurity = cart::impurity(ds_, rows, cart::Criterion::variance);
    tree_.nodes.push_back(node);

    const std::size_t before_fallbacks = constant_fallbacks_;
    std::size_t params = 0;
    const linear::Fit fit = leaf_model(rows, params);
    const double own = adjusted_error(fit.sse, rows.size(), params);
    make_leaf(index, fit);

    const double sd = std::sqrt(node.impurity);
    const double fit_rmse = std::sqrt(fit.sse / static_cast<double>(rows.size()));
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf_size);
    if (rows.size() < 2 * min_leaf || sd <= 0.05 * root_sd_ ||
        fit_rmse <= 1e-10 * std::max(root_sd_, std::numeric_limits<double>::min())) {
      return {index, own};
    }

    std::vector<int> features(ds_.features());
    std::iota(features.begin(), features.end(), 0);
    const cart::Split split = cart::best_split(ds_, rows, features, cart::Criterion::variance, min_leaf);
    if (!split.valid()) return {index, own};

    std::vector<std::size_t> left, right;
    cart::partition(ds_, rows, split, left, right);
    const Result l = grow(left);
    const Result r = grow(right);
    const double subtree = (static_cast<double>(left.size()) * l.adjusted +
                            static_cast<double>(right.size()) * r.adjusted) /
                           static_cast<double>(rows.size());
    if (params_.prune && own <= subtree) {
      truncate(static_cast<std::size_t>(index) + 1);
      // Fallbacks counted inside the discarded subtree no longer exist.
      constant_fallbacks_ = before_fallbacks;
      if (params == 1) ++constant_fallbacks_;
      return {index, own};
    }
    auto& n = tree_.nodes[static_cast<std::size_t>(index)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l.index;
    n.right = r.index;
    n.value = 0.0;
    n.coefficients.clear();
    if (params == 1) --constant_fallbacks_;
    return {index, subtree};
  }

  const Dataset& ds_;
  const M5Params& params_;
  Tree tree_;
  double root_sd_ = 0.0;
  std::size_t constant_fallbacks_ = 0;
  std::size_t ridge_fallbacks_ = 0;
};

}  // namespace

TrainedModel train_m5(const Dataset& ds, std::span<const std::size_t> rows, const M5Params& p) {
  if (ds.task() != Task::regression) throw ConfigError("M5 is regression-only");
  ModelConfig{p}.validate();
  if (rows.empty()) throw TrainingError("m5: empty training set");

  M5Builder builder(ds, p);
  TrainedModel model;
  model.task = Task::regression;
  model.features = ds.features();
  model.feature_names = ds.feature_names();
  model.body = M5Model{builder.build(rows)};
  if (builder.constant_fallbacks() > 0) {
    model.notes.push_back("m5: " + std::to_string(builder.constant_fallbacks()) +
                          " leaves hold fewer than d+1 rows and use constant models");
  }
  if (builder.ridge_fallbacks() > 0) {
    model.notes.push_back("m5: ridge fallback used for rank-deficient leaf systems");
  }
  return model;
}

}  // namespace mcufit
