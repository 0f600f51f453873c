#include "mcufit/estimators.hpp"

#include "mcufit/error.hpp"

namespace mcufit {

std::string_view to_string(EstimateKind kind) {
  switch (kind) {
    case EstimateKind::analytical: return "analytical";
    case EstimateKind::worst_case: return "worst_case";
    case EstimateKind::exact_ir: return "exact_ir";
  }
  return "?";
}

MemoryEstimate estimate_ann(std::span<const std::size_t> layers, std::size_t scalar_width) {
  if (layers.size() < 2) throw ConfigError("ann estimate needs at least two layers");
  std::size_t count = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] == 0) throw ConfigError("ann layer sizes must be positive");
    if (i > 0) count += layers[i] * (1 + layers[i - 1]);
  }
  return {count, scalar_width, EstimateKind::analytical};
}

SvmEstimate estimate_svm(int n_classes, std::size_t d, std::size_t scalar_width) {
  if (n_classes < 2) throw ConfigError("svm estimate needs at least two classes");
  if (d < 1) throw ConfigError("svm estimate needs at least one feature");
  const auto n = static_cast<std::size_t>(n_classes);
  const std::size_t pairs = n * (n - 1) / 2;
  return {{pairs * d, scalar_width, EstimateKind::analytical}, pairs};
}

namespace {

std::size_t tree_parameters(const Tree& tree, std::size_t d) {
  const std::size_t leaf_scalars = tree.leaf_kind == LeafKind::linear ? d + 1 : 1;
  const std::size_t links = tree.nodes.size() - 1;
  return 2 * tree.internal_count() + links + leaf_scalars * tree.leaf_count();
}

}  // namespace

MemoryEstimate estimate_tree_exact(const TrainedModel& model, std::size_t scalar_width) {
  std::size_t count = 0;
  if (const auto* forest = std::get_if<ForestModel>(&model.body)) {
    if (forest->trees.empty()) throw ConfigError("tree estimate of an empty forest");
    for (const auto& tree : forest->trees) count += tree_parameters(tree, model.features);
  } else if (const auto* m5 = std::get_if<M5Model>(&model.body)) {
    count = tree_parameters(m5->tree, model.features);
  } else {
    throw ConfigError("tree estimate needs a forest or M5 model");
  }
  return {count, scalar_width, EstimateKind::exact_ir};
}

MemoryEstimate estimate_tree_worst_case(const RfParams& cfg, std::size_t scalar_width) {
  if (cfg.trees <= 0 || cfg.max_depth <= 0) throw ConfigError("tree count and depth must be positive");
  if (cfg.max_depth > 40) throw ConfigError("max depth too large for a worst-case bound");
  const std::size_t leaves = std::size_t{1} << cfg.max_depth;
  const std::size_t internal = leaves - 1;
  const std::size_t links = internal + leaves - 1;
  const auto trees = static_cast<std::size_t>(cfg.trees);
  return {trees * (2 * internal + links + leaves), scalar_width, EstimateKind::worst_case};
}

}  // namespace mcufit
