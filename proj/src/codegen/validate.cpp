#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mcufit/codegen.hpp"
#include "mcufit/error.hpp"

namespace mcufit {
namespace {

struct Deviation {
  std::size_t equal = 0;
  double max_abs = 0.0;
  double max_rel = 0.0;

  void add(double generated, double reference) {
    if (generated == reference) ++equal;
    const double abs = std::abs(generated - reference);
    max_abs = std::max(max_abs, abs);
    const double rel = reference != 0.0 ? abs / std::abs(reference) : abs;
    max_rel = std::max(max_rel, rel);
  }
};

}  // namespace

double ValidationReport::max_metric_delta() const {
  double delta = 0.0;
  for (const auto& [metric, value] : reference_metrics) {
    delta = std::max(delta, std::abs(value - generated_metrics.at(metric)));
  }
  return delta;
}

std::string ValidationReport::render() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-14s %-14s %s\n", "metric", "reference", "generated", "delta");
  out += buf;
  for (const auto& [metric, ref] : reference_metrics) {
    const double gen = generated_metrics.at(metric);
    std::snprintf(buf, sizeof buf, "%-10s %-14.6f %-14.6f %.3g\n", std::string(short_name(metric)).c_str(),
                  ref, gen, std::abs(ref - gen));
    out += buf;
  }
  const auto matched = static_cast<std::size_t>(std::llround(agreement * static_cast<double>(rows)));
  std::snprintf(buf, sizeof buf, "agreement: %.2f%% (%zu/%zu rows)\n", 100.0 * agreement, matched, rows);
  out += buf;
  if (task == Task::regression) {
    std::snprintf(buf, sizeof buf, "max deviation: abs %.3g, rel %.3g\n", max_abs_deviation,
                  max_rel_deviation);
    out += buf;
  }
  return out;
}

ValidationReport validate_generated(const TrainedModel& model, const Dataset& ds,
                                    std::span<const std::size_t> rows, const ReplayRunner& runner,
                                    const CodegenOptions& opts) {
  if (rows.empty()) throw CodegenError("nothing to replay");
  const TrainedModel deployed = deployed_model(model, opts);
  const Precision precision = precision_for(opts);

  std::vector<double> generated = runner(features_csv(ds, rows, true), rows.size());
  if (generated.size() != rows.size()) {
    throw ToolchainError("replay returned " + std::to_string(generated.size()) + " predictions for " +
                         std::to_string(rows.size()) + " rows");
  }

  ValidationReport report;
  report.task = ds.task();
  report.rows = rows.size();
  std::vector<double> reference(rows.size()), truth(rows.size());
  Deviation narrow, wide;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x = ds.row(rows[i]);
    if (precision == Precision::f32 && ds.task() == Task::regression) {
      // Printed values carry 9 significant digits; narrowing recovers the exact float.
      generated[i] = static_cast<double>(static_cast<float>(generated[i]));
    }
    reference[i] = predict(model, x, Precision::f64);
    truth[i] = ds.target(rows[i]);
    narrow.add(generated[i], predict(deployed, x, precision));
    wide.add(generated[i], reference[i]);
  }
  const auto n = static_cast<double>(rows.size());
  report.agreement = static_cast<double>(narrow.equal) / n;
  report.max_abs_deviation = narrow.max_abs;
  report.max_rel_deviation = narrow.max_rel;
  report.agreement_f64 = static_cast<double>(wide.equal) / n;
  report.max_abs_deviation_f64 = wide.max_abs;
  report.max_rel_deviation_f64 = wide.max_rel;
  report.reference_metrics = evaluate(ds.task(), reference, truth, ds.classes());
  report.generated_metrics = evaluate(ds.task(), generated, truth, ds.classes());
  return report;
}

ValidationReport validate_generated(const TrainedModel& model, const Dataset& ds,
                                    const ReplayRunner& runner, const CodegenOptions& opts) {
  const auto rows = all_rows(ds);
  return validate_generated(model, ds, rows, runner, opts);
}

double CrossValidationComparison::max_mean_delta() const {
  double delta = 0.0;
  for (const auto& [metric, summary] : reference.metrics) {
    delta = std::max(delta, std::abs(summary.mean - generated.at(metric).mean));
  }
  return delta;
}

CrossValidationComparison cross_validate_generated(const Dataset& ds, const FoldPlan& plan,
                                                   const ModelConfig& cfg,
                                                   const RunnerFactory& make_runner,
                                                   const CodegenOptions& opts) {
  cfg.validate();
  check_supports(cfg, ds.task());
  if (plan.assignments.size() != ds.rows()) throw ConfigError("fold plan does not match dataset");
  CrossValidationComparison out;
  std::vector<std::map<Metric, double>> reference, generated;
  for (std::size_t f = 0; f < plan.k; ++f) {
    try {
      const auto train_rows = plan.train_rows(f);
      const auto test_rows = plan.test_rows(f);
      const TrainedModel model = train(ds, train_rows, cfg);
      const GeneratedSource gs = generate(model, opts);
      const ReplayRunner runner = make_runner(gs);
      auto report = validate_generated(model, ds, test_rows, runner, opts);
      reference.push_back(report.reference_metrics);
      generated.push_back(report.generated_metrics);
      out.folds.push_back(std::move(report));
    } catch (const Error& e) {
      throw CodegenError("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  out.reference = summarize(ds.task(), reference);
  out.generated = summarize(ds.task(), generated);
  return out;
}

}  // namespace mcufit
