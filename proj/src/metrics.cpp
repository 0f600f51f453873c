#include "mcufit/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "mcufit/error.hpp"

namespace mcufit {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::r2: return "r2";
    case Metric::mae: return "mae";
    case Metric::rmse: return "rmse";
    case Metric::accuracy: return "accuracy";
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::f1: return "f1";
  }
  return "?";
}

std::string_view short_name(Metric metric) {
  switch (metric) {
    case Metric::accuracy: return "acc";
    case Metric::precision: return "prec";
    case Metric::recall: return "rec";
    default: return to_string(metric);
  }
}

std::vector<Metric> metrics_for(Task task) {
  if (task == Task::regression) return {Metric::r2, Metric::mae, Metric::rmse};
  return {Metric::accuracy, Metric::precision, Metric::recall, Metric::f1};
}

namespace {

template <typename A, typename B>
void check_lengths(std::span<A> a, std::span<B> b) {
  if (a.size() != b.size()) {
    throw ConfigError("length mismatch: " + std::to_string(a.size()) + " predictions vs " +
                      std::to_string(b.size()) + " truths");
  }
  if (a.empty()) throw ConfigError("metric of an empty vector");
}

}  // namespace

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double mean = 0.0;
  for (double y : truth) mean += y;
  mean /= static_cast<double>(truth.size());
  double residual = 0.0, total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    residual += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    total += (mean - truth[i]) * (mean - truth[i]);
  }
  if (total == 0.0) throw ConfigError("r2 undefined: truth has zero variance");
  return 1.0 - residual / total;
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(truth.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

PrfScores precision_recall_f1(std::span<const int> pred, std::span<const int> truth,
                              int n_classes) {
  check_lengths(pred, truth);
  const auto n = static_cast<std::size_t>(n_classes);
  std::vector<std::size_t> tp(n, 0), predicted(n, 0), actual(n, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= n_classes || truth[i] < 0 || truth[i] >= n_classes) {
      throw ConfigError("class index out of range");
    }
    ++predicted[static_cast<std::size_t>(pred[i])];
    ++actual[static_cast<std::size_t>(truth[i])];
    if (pred[i] == truth[i]) ++tp[static_cast<std::size_t>(pred[i])];
  }
  PrfScores out;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (predicted[c] == 0 && actual[c] == 0) continue;
    ++present;
    const double p = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    const double r = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
    out.precision += p;
    out.recall += r;
    out.f1 += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  const auto k = static_cast<double>(present);
  out.precision /= k;
  out.recall /= k;
  out.f1 /= k;
  return out;
}

std::map<Metric, double> evaluate(Task task, std::span<const double> pred,
                                  std::span<const double> truth, int n_classes) {
  if (task == Task::regression) {
    return {{Metric::r2, r_squared(pred, truth)},
            {Metric::mae, mae(pred, truth)},
            {Metric::rmse, rmse(pred, truth)}};
  }
  std::vector<int> p(pred.begin(), pred.end()), t(truth.begin(), truth.end());
  const auto prf = precision_recall_f1(p, t, n_classes);
  return {{Metric::accuracy, accuracy(p, t)},
          {Metric::precision, prf.precision},
          {Metric::recall, prf.recall},
          {Metric::f1, prf.f1}};
}

MetricSummary MetricSummary::of(std::vector<double> values) {
  MetricSummary s;
  s.per_fold = std::move(values);
  double sum = 0.0;
  for (double v : s.per_fold) sum += v;
  s.mean = sum / static_cast<double>(s.per_fold.size());
  if (s.per_fold.size() > 1) {
    double ss = 0.0;
    for (double v : s.per_fold) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.per_fold.size() - 1));
  }
  return s;
}

const MetricSummary& MetricReport::at(Metric m) const {
  auto it = metrics.find(m);
  if (it == metrics.end()) throw ConfigError("metric '" + std::string(to_string(m)) + "' not reported");
  return it->second;
}

MetricReport summarize(Task task, std::span<const std::map<Metric, double>> folds) {
  MetricReport report;
  report.task = task;
  for (Metric m : metrics_for(task)) {
    std::vector<double> values;
    for (const auto& fold : folds) values.push_back(fold.at(m));
    report.metrics.emplace(m, MetricSummary::of(std::move(values)));
  }
  return report;
}

MetricReport cross_validate(const Dataset& ds, const FoldPlan& plan, const FitPredict& fit_predict) {
  if (plan.assignments.size() != ds.rows()) throw ConfigError("fold plan does not match dataset");
  std::vector<std::map<Metric, double>> folds;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto train = plan.train_rows(f);
    const auto test = plan.test_rows(f);
    std::vector<double> truth;
    for (std::size_t r : test) truth.push_back(ds.target(r));
    try {
      const auto pred = fit_predict(train, test);
      folds.push_back(evaluate(ds.task(), pred, truth, ds.classes()));
    } catch (const Error& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  return summarize(ds.task(), folds);
}

MetricReport cross_validate(const Dataset& ds, const FoldPlan& plan, const ModelConfig& cfg) {
  cfg.validate();
  check_supports(cfg, ds.task());
  return cross_validate(ds, plan, [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
    const TrainedModel model = mcufit::train(ds, train, cfg);
    std::vector<double> pred;
    pred.reserve(test.size());
    for (std::size_t r : test) pred.push_back(predict(model, ds.row(r)));
    return pred;
  });
}

std::string format_mean_std(const MetricSummary& s, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f+/-%.*f", decimals, s.mean, decimals, s.stddev);
  return buf;
}

std::string render_table(Task task, std::span<const MetricReport> reports) {
  constexpr std::size_t width = 17;
  const auto columns = metrics_for(task);
  auto pad = [&](std::string cell, bool last) {
    if (!last && cell.size() < width) cell.resize(width, ' ');
    else if (!last) cell += ' ';
    return cell;
  };
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out += pad(std::string(short_name(columns[c])), c + 1 == columns.size());
  }
  out += '\n';
  for (const auto& report : reports) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out += pad(format_mean_std(report.at(columns[c])), c + 1 == columns.size());
    }
    out += '\n';
  }
  return out;
}

}  // namespace mcufit
