#include "mcufit/analysis.hpp"

#include <cmath>

#include "mcufit/error.hpp"

namespace mcufit {

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw ConfigError("correlation needs two equal-length columns of N >= 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i] - x[0];
    my += y[i] - y[0];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = (x[i] - x[0]) - mx;
    const double dy = (y[i] - y[0]) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const Dataset& ds) {
  if (ds.rows() < 2) throw ConfigError("correlation needs at least two rows");
  const std::size_t d = ds.features();
  std::vector<std::vector<double>> columns(d + 1, std::vector<double>(ds.rows()));
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) columns[j][r] = ds.at(r, j);
    columns[d][r] = ds.target(r);
  }
  CorrelationMatrix m;
  m.names = ds.feature_names();
  m.names.push_back(ds.target_name());
  const std::size_t size = d + 1;
  m.values.assign(size * size, 0.0);
  for (const auto& col : columns) {
    bool flat = true;
    for (double v : col) flat = flat && v == col[0];
    m.constant.push_back(flat);
  }
  for (std::size_t i = 0; i < size; ++i) {
    m.values[i * size + i] = 1.0;
    for (std::size_t j = i + 1; j < size; ++j) {
      const double c = pearson(columns[i], columns[j]);
      m.values[i * size + j] = c;
      m.values[j * size + i] = c;
    }
  }
  return m;
}

std::string CorrelationMatrix::to_csv() const {
  std::string out = "# pearson correlation; last column is the target label\n";
  out += "feature";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out += names[i];
    for (std::size_t j = 0; j < size(); ++j) out += "," + format_double(at(i, j));
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const Dataset& ds, std::span<const ModelConfig> configs,
                                std::size_t k, std::uint64_t seed, std::string dataset_id) {
  ExperimentResult result;
  result.dataset_id = std::move(dataset_id);
  result.seed = seed;
  result.plan = make_folds(ds, k, seed);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentEntry entry{configs[i], std::nullopt, {}};
    try {
      entry.report = cross_validate(ds, result.plan, configs[i]);
    } catch (const Error& e) {
      entry.error = "config " + std::to_string(i) + " (" + configs[i].label() + "): " + e.what();
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

std::string ExperimentResult::to_csv() const {
  std::string out = "config,metric,mean,std,folds\n";
  for (const auto& e : entries) {
    if (!e.report) {
      out += e.config.label() + ",error,,," + e.error + "\n";
      continue;
    }
    for (const auto& [metric, s] : e.report->metrics) {
      out += e.config.label() + "," + std::string(to_string(metric)) + "," + format_double(s.mean) +
             "," + format_double(s.stddev) + ",";
      for (std::size_t f = 0; f < s.per_fold.size(); ++f) {
        out += (f ? ";" : "") + format_double(s.per_fold[f]);
      }
      out += '\n';
    }
  }
  return out;
}

MultiExperimentResult run_multi_experiment(std::span<const Dataset> datasets,
                                           const ModelConfig& cfg, std::uint64_t seed,
                                           std::size_t k, std::vector<std::string> dataset_ids) {
  if (datasets.size() < 2) throw ConfigError("multi experiment needs at least two datasets");
  const Dataset& first = datasets.front();
  for (const auto& ds : datasets) {
    if (ds.feature_names() != first.feature_names() || ds.task() != first.task() ||
        ds.class_labels() != first.class_labels()) {
      throw DatasetError("multi experiment datasets have mismatching schemas");
    }
  }
  check_supports(cfg, first.task());
  const std::size_t n = datasets.size();
  MultiExperimentResult result;
  if (dataset_ids.size() != n) {
    dataset_ids.clear();
    for (std::size_t i = 0; i < n; ++i) dataset_ids.push_back("dataset" + std::to_string(i));
  }
  result.dataset_ids = std::move(dataset_ids);
  const auto metrics = metrics_for(first.task());
  for (Metric m : metrics) result.matrices[m].assign(n * n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Dataset& train_ds = datasets[i];
    const auto self = cross_validate(train_ds, make_folds(train_ds, k, seed), cfg);
    for (Metric m : metrics) result.matrices[m][i * n + i] = self.at(m).mean;

    const TrainedModel model = train(train_ds, all_rows(train_ds), cfg);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Dataset& test_ds = datasets[j];
      std::vector<double> pred;
      for (std::size_t r = 0; r < test_ds.rows(); ++r) pred.push_back(predict(model, test_ds.row(r)));
      const auto scores = evaluate(test_ds.task(), pred, test_ds.targets(), test_ds.classes());
      for (Metric m : metrics) result.matrices[m][i * n + j] = scores.at(m);
    }
  }
  return result;
}

std::string MultiExperimentResult::to_csv(Metric m) const {
  std::string out = "# " + std::string(to_string(m)) + ": row = training dataset, column = evaluation dataset\n";
  out += "train\\test";
  for (const auto& id : dataset_ids) out += "," + id;
  out += '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out += dataset_ids[i];
    for (std::size_t j = 0; j < size(); ++j) out += "," + format_double(at(m, i, j));
    out += '\n';
  }
  return out;
}

std::vector<double> feature_importance(const TrainedModel& model) {
  const auto* forest = std::get_if<ForestModel>(&model.body);
  if (!forest) throw ConfigError("feature importance (MDI) needs a random forest model");
  std::vector<double> importance(model.features, 0.0);
  for (const auto& tree : forest->trees) {
    const double root = static_cast<double>(tree.nodes.front().samples);
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double decrease = static_cast<double>(node.samples) / root * node.impurity -
                              static_cast<double>(l.samples) / root * l.impurity -
                              static_cast<double>(r.samples) / root * r.impurity;
      importance[static_cast<std::size_t>(node.feature)] += std::max(0.0, decrease);
    }
  }
  double total = 0.0;
  for (double v : importance) total += v;
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  }
  return importance;
}

}  // namespace mcufit
