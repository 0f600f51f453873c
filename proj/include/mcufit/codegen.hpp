#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcufit/dataset.hpp"
#include "mcufit/metrics.hpp"
#include "mcufit/model.hpp"

namespace mcufit {

struct CodegenOptions {
  int scalar_width = 4;  // 4 emits float, 8 emits double
  bool inline_normalization = true;
};

/// Summary of what a generated model contains. Constant counts refer to
/// scalar literals inside the emitted `static const` tables.
struct Manifest {
  Family family = Family::ann;
  Task task = Task::regression;
  std::size_t features = 0;
  int classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  int scalar_width = 4;
  bool normalization_inline = true;

  std::size_t weight_constants = 0;         // ANN weights, SVM plane weights
  std::size_t bias_constants = 0;           // ANN biases, SVM plane offsets
  std::size_t normalization_constants = 0;  // input mean/scale, output scale/mean
  std::size_t split_constants = 0;          // tree thresholds
  std::size_t leaf_constants = 0;           // tree leaf values and leaf-model terms
  std::size_t scalar_constants = 0;         // sum of the above

  std::string to_text() const;
};

struct GeneratedSource {
  std::string source;  // model.c
  std::string header;  // model.h
  Manifest manifest;
};

/// Lowers a trained model to standalone C99. The single entry point is
/// `model_real_t predict(const model_real_t features[D])` for regression and
/// `int predict(...)` returning the class index for classification.
GeneratedSource generate(const TrainedModel& model, const CodegenOptions& opts = {});

/// The model whose reference evaluation the generated code reproduces
/// bit-for-bit: `model` itself with inline normalization, otherwise the
/// folded equivalent.
TrainedModel deployed_model(const TrainedModel& model, const CodegenOptions& opts);

Precision precision_for(const CodegenOptions& opts);

/// Formats a scalar as a C literal with the shortest decimal text that
/// round-trips at the given width ("0.5f", "3.0f", "1e-05f"; no suffix at 8).
std::string c_literal(double value, int scalar_width);

enum class HarnessMode { replay, timing };

/// Number of predictions performed by the timing harness.
inline constexpr int kTimingPredictions = 1000;
/// Longest accepted replay input line, including the newline.
inline constexpr std::size_t kReplayMaxLine = 8192;

/// C `main` driving the generated model. Replay mode reads CSV feature rows
/// from stdin and prints one prediction per line; timing mode runs 1000
/// predictions over `samples` (or a zero row) and prints
/// "ns_per_pred=<int>", "predictions=1000" and "checksum=<value>".
std::string generate_harness(const GeneratedSource& gs, HarnessMode mode,
                             std::span<const std::vector<double>> samples = {});

/// Feeds CSV feature rows to a compiled replay binary and returns one parsed
/// prediction per row.
using ReplayRunner = std::function<std::vector<double>(const std::string& csv, std::size_t rows)>;

struct ValidationReport {
  Task task = Task::regression;
  std::size_t rows = 0;
  // Against the reference evaluator at the generated width.
  double agreement = 0.0;  // fraction of rows with identical predictions
  double max_abs_deviation = 0.0;
  double max_rel_deviation = 0.0;
  // Against the 64-bit reference evaluator.
  double agreement_f64 = 0.0;
  double max_abs_deviation_f64 = 0.0;
  double max_rel_deviation_f64 = 0.0;
  std::map<Metric, double> reference_metrics;  // 64-bit reference vs truth
  std::map<Metric, double> generated_metrics;  // generated code vs truth

  double max_metric_delta() const;
  std::string render() const;
};

/// Replays the selected rows of `ds` through the reference evaluators and
/// `runner`. Throws CodegenError "nothing to replay" for an empty selection.
ValidationReport validate_generated(const TrainedModel& model, const Dataset& ds,
                                    std::span<const std::size_t> rows, const ReplayRunner& runner,
                                    const CodegenOptions& opts = {});

/// Replays every row of `ds`.
ValidationReport validate_generated(const TrainedModel& model, const Dataset& ds,
                                    const ReplayRunner& runner,
                                    const CodegenOptions& opts = {});

struct CrossValidationComparison {
  MetricReport reference;
  MetricReport generated;
  std::vector<ValidationReport> folds;  // per-fold replay of the test rows

  double max_mean_delta() const;
};

/// Builds a replay runner for one generated model (compiles it).
using RunnerFactory = std::function<ReplayRunner(const GeneratedSource&)>;

/// Cross-validation where each fold's model is also generated, compiled and
/// replayed on the held-out rows, giving reference and generated metrics side
/// by side.
CrossValidationComparison cross_validate_generated(const Dataset& ds, const FoldPlan& plan,
                                                   const ModelConfig& cfg,
                                                   const RunnerFactory& make_runner,
                                                   const CodegenOptions& opts = {});

}  // namespace mcufit
