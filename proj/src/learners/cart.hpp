#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcufit/dataset.hpp"

namespace mcufit::cart {

enum class Criterion { gini, variance };

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // impurity decrease, unweighted by node size

  bool valid() const { return feature >= 0; }
};

/// Node impurity: Gini index (classification) or population variance.
double impurity(const Dataset& ds, std::span<const std::size_t> rows, Criterion criterion);

/// Exhaustive threshold scan over the listed features (ascending order).
/// Thresholds are midpoints between consecutive distinct values; rows with
/// x <= threshold go left. Ties in gain keep the lowest feature index and the
/// lowest threshold. Only splits with positive gain and at least `min_leaf`
/// rows per side qualify.
Split best_split(const Dataset& ds, std::span<const std::size_t> rows,
                 std::span<const int> features, Criterion criterion, std::size_t min_leaf);

/// Rows partitioned by a split, order preserved.
void partition(const Dataset& ds, std::span<const std::size_t> rows, const Split& split,
               std::vector<std::size_t>& left, std::vector<std::size_t>& right);

}  // namespace mcufit::cart
