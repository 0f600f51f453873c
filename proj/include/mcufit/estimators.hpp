#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "mcufit/model.hpp"

namespace mcufit {

enum class EstimateKind { analytical, worst_case, exact_ir };

std::string_view to_string(EstimateKind kind);

/// Parameter count of a model and its storage size at a given scalar width.
struct MemoryEstimate {
  std::size_t parameter_count = 0;
  std::size_t scalar_width = 4;
  EstimateKind kind = EstimateKind::analytical;

  std::size_t bytes() const { return parameter_count * scalar_width; }
};

/// Fully connected network with layer sizes L_1..L_N (L_1 = inputs):
/// sum over i >= 2 of L_i * (1 + L_{i-1}). Includes the output layer.
MemoryEstimate estimate_ann(std::span<const std::size_t> layers, std::size_t scalar_width = 4);

struct SvmEstimate {
  MemoryEstimate weights;    // n(n-1)/2 * d, the strict one-vs-one weight count
  std::size_t biases = 0;    // n(n-1)/2 offsets stored alongside

  MemoryEstimate with_biases() const {
    return {weights.parameter_count + biases, weights.scalar_width, weights.kind};
  }
};

SvmEstimate estimate_svm(int n_classes, std::size_t d, std::size_t scalar_width = 4);

/// Exact count from a realized tree model: 2 scalars per internal node
/// (feature id, threshold), 1 structure-overhead parameter per non-root node
/// (the branch that reaches it), and 1 scalar per forest leaf or d + 1 per M5
/// linear leaf. A stump therefore counts 2 + 2 + 2.
MemoryEstimate estimate_tree_exact(const TrainedModel& model, std::size_t scalar_width = 4);

/// Full-binary-tree bound for a forest configuration: T (2^D - 1) internal
/// nodes and T 2^D leaves, counted as in estimate_tree_exact.
MemoryEstimate estimate_tree_worst_case(const RfParams& cfg, std::size_t scalar_width = 4);

}  // namespace mcufit
