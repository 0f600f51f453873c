#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcufit/dataset.hpp"
#include "mcufit/metrics.hpp"
#include "mcufit/model.hpp"

namespace mcufit {

/// Pearson correlations over every feature column plus the target column
/// (last row/column).
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // row-major, size x size
  std::vector<bool> constant;  // columns with zero variance (0 off-diagonal)

  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  std::string to_csv() const;
};

CorrelationMatrix correlation_matrix(const Dataset& ds);

/// Pearson coefficient of two columns. Both columns are shifted by their first
/// element before the two-pass computation, so columns that differ by an exact
/// constant offset yield bit-identical centered values and a coefficient of
/// exactly 1. Returns 0 when either column is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct ExperimentEntry {
  ModelConfig config;
  std::optional<MetricReport> report;
  std::string error;  // set when the configuration failed
};

struct ExperimentResult {
  std::string dataset_id;
  std::uint64_t seed = 0;
  FoldPlan plan;
  std::vector<ExperimentEntry> entries;

  /// Full-precision record: one line per config with every metric's mean,
  /// deviation and per-fold values.
  std::string to_csv() const;
};

/// Cross-validates every configuration on one shared fold plan. A failing
/// configuration records its error and the others still run.
ExperimentResult run_experiment(const Dataset& ds, std::span<const ModelConfig> configs,
                                std::size_t k, std::uint64_t seed, std::string dataset_id = "");

/// Entry (i, j): model trained on dataset i, evaluated on dataset j. The
/// diagonal holds cross-validated self-evaluation.
struct MultiExperimentResult {
  std::vector<std::string> dataset_ids;
  std::map<Metric, std::vector<double>> matrices;  // row-major N x N

  std::size_t size() const { return dataset_ids.size(); }
  double at(Metric m, std::size_t i, std::size_t j) const {
    return matrices.at(m)[i * size() + j];
  }
  std::string to_csv(Metric m) const;
};

MultiExperimentResult run_multi_experiment(std::span<const Dataset> datasets,
                                           const ModelConfig& cfg, std::uint64_t seed,
                                           std::size_t k = 10,
                                           std::vector<std::string> dataset_ids = {});

/// Mean Decrease Impurity of a random forest: per feature, the sum over all
/// splits on it of (node share * impurity - child shares * child impurities),
/// where shares are fractions of the tree's training rows, summed over trees
/// and normalized to 1. A forest without any split yields all zeros.
std::vector<double> feature_importance(const TrainedModel& model);

}  // namespace mcufit
