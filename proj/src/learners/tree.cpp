#include <algorithm>
#include <cmath>
#include <numeric>

#include "cart.hpp"
#include "mcufit/error.hpp"
#include "mcufit/model.hpp"
#include "mcufit/random.hpp"

namespace mcufit {
namespace cart {
namespace {

double node_mean(const Dataset& ds, std::span<const std::size_t> rows) {
  double sum = 0.0;
  for (std::size_t r : rows) sum += ds.target(r);
  return sum / static_cast<double>(rows.size());
}

double gini(std::span<const std::size_t> counts, std::size_t n) {
  double g = 1.0;
  const double total = static_cast<double>(n);
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / total;
    g -= p * p;
  }
  return g;
}

// Population variance from sums of centered values.
double variance(double sum, double sumsq, std::size_t n) {
  const double m = sum / static_cast<double>(n);
  return std::max(0.0, sumsq / static_cast<double>(n) - m * m);
}

}  // namespace

double impurity(const Dataset& ds, std::span<const std::size_t> rows, Criterion criterion) {
  if (rows.empty()) return 0.0;
  if (criterion == Criterion::gini) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.classes()), 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(ds.label(r))];
    return gini(counts, rows.size());
  }
  const double center = node_mean(ds, rows);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r : rows) {
    const double y = ds.target(r) - center;
    sum += y;
    sumsq += y * y;
  }
  return variance(sum, sumsq, rows.size());
}

Split best_split(const Dataset& ds, std::span<const std::size_t> rows,
                 std::span<const int> features, Criterion criterion, std::size_t min_leaf) {
  Split best;
  const std::size_t n = rows.size();
  min_leaf = std::max<std::size_t>(min_leaf, 1);
  if (n < 2 * min_leaf) return best;
  const double parent = impurity(ds, rows, criterion);
  if (parent <= 0.0) return best;

  const std::size_t classes =
      criterion == Criterion::gini ? static_cast<std::size_t>(ds.classes()) : 0;
  std::vector<std::size_t> total(classes, 0), left(classes, 0), right(classes, 0);
  const double center = criterion == Criterion::variance ? node_mean(ds, rows) : 0.0;
  double total_sum = 0.0, total_sq = 0.0;
  for (std::size_t r : rows) {
    if (criterion == Criterion::gini) {
      ++total[static_cast<std::size_t>(ds.label(r))];
    } else {
      const double y = ds.target(r) - center;
      total_sum += y;
      total_sq += y * y;
    }
  }

  std::vector<std::pair<double, std::size_t>> column(n);
  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = {ds.at(rows[i], static_cast<std::size_t>(f)), rows[i]};
    }
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0);
    double lsum = 0.0, lsq = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const std::size_t moved = column[i - 1].second;
      if (criterion == Criterion::gini) {
        ++left[static_cast<std::size_t>(ds.label(moved))];
      } else {
        const double y = ds.target(moved) - center;
        lsum += y;
        lsq += y * y;
      }
      const std::size_t nl = i;
      const std::size_t nr = n - i;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double a = column[i - 1].first;
      const double b = column[i].first;
      if (!(a < b)) continue;

      double il, ir;
      if (criterion == Criterion::gini) {
        for (std::size_t c = 0; c < classes; ++c) right[c] = total[c] - left[c];
        il = gini(left, nl);
        ir = gini(right, nr);
      } else {
        il = variance(lsum, lsq, nl);
        ir = variance(total_sum - lsum, total_sq - lsq, nr);
      }
      const double gain =
          parent - (static_cast<double>(nl) * il + static_cast<double>(nr) * ir) /
                       static_cast<double>(n);
      if (gain > best.gain && gain > 1e-12 * parent) {
        double t = 0.5 * (a + b);
        if (!(t < b)) t = a;
        best = {f, t, gain};
      }
    }
  }
  return best;
}

void partition(const Dataset& ds, std::span<const std::size_t> rows, const Split& split,
               std::vector<std::size_t>& left, std::vector<std::size_t>& right) {
  left.clear();
  right.clear();
  for (std::size_t r : rows) {
    if (ds.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold) {
      left.push_back(r);
    } else {
      right.push_back(r);
    }
  }
}

}  // namespace cart

namespace {

class ForestTreeBuilder {
 public:
  ForestTreeBuilder(const Dataset& ds, const RfParams& p, std::size_t mtry, Rng& rng)
      : ds_(ds), params_(p), mtry_(mtry), rng_(rng) {
    criterion_ = ds.task() == Task::classification ? cart::Criterion::gini : cart::Criterion::variance;
    tree_.leaf_kind = ds.task() == Task::classification ? LeafKind::class_vote : LeafKind::constant;
  }

  Tree build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  double leaf_value(std::span<const std::size_t> rows) const {
    if (ds_.task() == Task::regression) {
      double sum = 0.0;
      for (std::size_t r : rows) sum += ds_.target(r);
      return sum / static_cast<double>(rows.size());
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds_.classes()), 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(ds_.label(r))];
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  std::vector<int> sample_features() {
    std::vector<int> all(ds_.features());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(all.size() - i));
      std::swap(all[i], all[j]);
    }
    all.resize(mtry_);
    std::sort(all.begin(), all.end());
    return all;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.samples = rows.size();
    node.impurity = cart::impurity(ds_, rows, criterion_);
    node.value = leaf_value(rows);
    tree_.nodes.push_back(node);
    if (depth >= params_.max_depth || node.impurity <= 0.0 || rows.size() < 2) return index;

    const auto features = sample_features();
    const cart::Split split = cart::best_split(ds_, rows, features, criterion_, 1);
    if (!split.valid()) return index;

    std::vector<std::size_t> left, right;
    cart::partition(ds_, rows, split, left, right);
    tree_.nodes[static_cast<std::size_t>(index)].feature = split.feature;
    tree_.nodes[static_cast<std::size_t>(index)].threshold = split.threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[static_cast<std::size_t>(index)].left = l;
    tree_.nodes[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  const Dataset& ds_;
  const RfParams& params_;
  std::size_t mtry_;
  Rng& rng_;
  cart::Criterion criterion_;
  Tree tree_;
};

}  // namespace

TrainedModel train_rf(const Dataset& ds, std::span<const std::size_t> rows, const RfParams& p) {
  if (p.max_depth <= 0) throw ConfigError("rf: max depth must be positive");
  ModelConfig{p}.validate();
  if (rows.empty()) throw TrainingError("rf: empty training set");

  const std::size_t d = ds.features();
  std::size_t mtry;
  if (p.feature_subsample) {
    mtry = static_cast<std::size_t>(std::ceil(*p.feature_subsample * static_cast<double>(d)));
  } else if (ds.task() == Task::classification) {
    mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  } else {
    mtry = static_cast<std::size_t>(std::ceil(static_cast<double>(d) / 3.0));
  }
  mtry = std::clamp<std::size_t>(mtry, 1, d);

  const std::size_t draws = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(p.bootstrap_fraction * static_cast<double>(rows.size()))));

  ForestModel forest;
  forest.aggregation =
      ds.task() == Task::classification ? Aggregation::majority_vote : Aggregation::mean;
  for (int t = 0; t < p.trees; ++t) {
    Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample(draws);
    for (auto& s : sample) s = rows[static_cast<std::size_t>(rng.below(rows.size()))];
    forest.trees.push_back(ForestTreeBuilder(ds, p, mtry, rng).build(std::move(sample)));
  }

  TrainedModel model;
  model.task = ds.task();
  model.features = d;
  model.classes = ds.task() == Task::classification ? ds.classes() : 0;
  model.feature_names = ds.feature_names();
  model.class_labels = ds.class_labels();
  model.body = std::move(forest);
  return model;
}

}  // namespace mcufit
