#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcufit/dataset.hpp"
#include "mcufit/model.hpp"

namespace mcufit {

enum class Metric { r2, mae, rmse, accuracy, precision, recall, f1 };

std::string_view to_string(Metric metric);
/// Column name used in the CLI table ("r2", "mae", "rmse", "acc", "prec", "rec", "f1").
std::string_view short_name(Metric metric);
/// Reported metrics per task, in table order.
std::vector<Metric> metrics_for(Task task);

/// Coefficient of determination against the mean of `truth`. May be negative.
double r_squared(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);
double accuracy(std::span<const int> pred, std::span<const int> truth);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Macro averages over the classes that occur in `pred` or `truth`. Per-class
/// F1 is the harmonic mean of that class's precision and recall; a zero
/// denominator contributes 0.
PrfScores precision_recall_f1(std::span<const int> pred, std::span<const int> truth,
                              int n_classes);

/// All metrics of the task for one prediction vector. Classification inputs
/// hold class indices as exact doubles.
std::map<Metric, double> evaluate(Task task, std::span<const double> pred,
                                  std::span<const double> truth, int n_classes);

struct MetricSummary {
  std::vector<double> per_fold;
  double mean = 0.0;
  double stddev = 0.0;  // sample deviation, divisor k - 1

  static MetricSummary of(std::vector<double> values);
};

struct MetricReport {
  Task task = Task::regression;
  std::map<Metric, MetricSummary> metrics;

  std::size_t folds() const { return metrics.empty() ? 0 : metrics.begin()->second.per_fold.size(); }
  const MetricSummary& at(Metric m) const;
};

/// Aggregates per-fold metric maps (fold-index order).
MetricReport summarize(Task task, std::span<const std::map<Metric, double>> folds);

/// Callback producing predictions for `test` from a model fitted on `train`.
using FitPredict = std::function<std::vector<double>(std::span<const std::size_t> train,
                                                     std::span<const std::size_t> test)>;

MetricReport cross_validate(const Dataset& ds, const FoldPlan& plan, const FitPredict& fit_predict);

/// Trains `cfg` on every fold's complement (learners standardize on their own
/// training rows) and evaluates on the fold.
MetricReport cross_validate(const Dataset& ds, const FoldPlan& plan, const ModelConfig& cfg);

/// "0.78+/-0.01"
std::string format_mean_std(const MetricSummary& s, int decimals = 2);

/// Fixed-width table: one header line of metric names, one row per report.
std::string render_table(Task task, std::span<const MetricReport> reports);

}  // namespace mcufit
