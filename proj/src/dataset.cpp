#include "mcufit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mcufit/error.hpp"
#include "mcufit/random.hpp"

namespace mcufit {

std::string_view to_string(Task task) {
  return task == Task::regression ? "regression" : "classification";
}

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<double> values,
                 std::vector<double> target, Task task,
                 std::vector<std::string> class_labels)
    : feature_names_(std::move(feature_names)),
      values_(std::move(values)),
      target_(std::move(target)),
      task_(task),
      class_labels_(std::move(class_labels)) {
  if (feature_names_.empty()) throw DatasetError("dataset has no feature columns");
  std::set<std::string> seen;
  for (const auto& name : feature_names_) {
    if (name.empty()) throw DatasetError("empty feature name");
    if (!seen.insert(name).second) throw DatasetError("duplicate feature name '" + name + "'");
  }
  if (target_.empty()) throw DatasetError("empty dataset");
  if (values_.size() != target_.size() * feature_names_.size()) {
    throw DatasetError("feature matrix shape does not match row count");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DatasetError("non-finite value at row " + std::to_string(i / features() + 1) +
                         ", column '" + feature_names_[i % features()] + "'");
    }
  }
  if (task_ == Task::regression) {
    if (!class_labels_.empty()) throw DatasetError("regression dataset with class labels");
    for (std::size_t i = 0; i < target_.size(); ++i) {
      if (!std::isfinite(target_[i])) {
        throw DatasetError("non-finite target at row " + std::to_string(i + 1));
      }
    }
    return;
  }
  double max_label = 0.0;
  for (std::size_t i = 0; i < target_.size(); ++i) {
    const double y = target_[i];
    if (!(y >= 0.0) || y != std::floor(y)) {
      throw DatasetError("classification target at row " + std::to_string(i + 1) +
                         " is not a class index");
    }
    max_label = std::max(max_label, y);
  }
  if (class_labels_.empty()) {
    for (int c = 0; c <= static_cast<int>(max_label); ++c) class_labels_.push_back(std::to_string(c));
  }
  if (max_label >= static_cast<double>(class_labels_.size())) {
    throw DatasetError("class index exceeds label count");
  }
  if (class_labels_.size() < 2) throw DatasetError("classification target has a single class");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  std::vector<double> target;
  values.reserve(rows.size() * features());
  target.reserve(rows.size());
  for (std::size_t r : rows) {
    auto x = row(r);
    values.insert(values.end(), x.begin(), x.end());
    target.push_back(target_[r]);
  }
  Dataset out(feature_names_, std::move(values), std::move(target), task_, class_labels_);
  out.target_name_ = target_name_;
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> parse_number(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

Dataset parse_csv(std::string_view text, Task task, std::optional<std::string> target_column) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DatasetError("empty dataset: missing header row");

  const auto header = split_fields(lines[0]);
  std::size_t target_idx = header.size() - 1;
  if (target_column) {
    auto it = std::find(header.begin(), header.end(), *target_column);
    if (it == header.end()) throw DatasetError("target column '" + *target_column + "' not found");
    target_idx = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() < 2) throw DatasetError("dataset needs at least one feature and a target column");

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_idx) names.emplace_back(header[c]);
  }

  std::vector<double> values;
  std::vector<double> target;
  std::vector<std::string> labels;
  std::map<std::string, int, std::less<>> label_index;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;  // 1-based data row
    if (trim(lines[li]).empty()) throw DatasetError("empty line at row " + std::to_string(row));
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw DatasetError("ragged row " + std::to_string(row) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const bool is_target = c == target_idx;
      if (is_target && task == Task::classification) {
        if (fields[c].empty()) throw DatasetError("missing class label at row " + std::to_string(row));
        auto it = label_index.find(fields[c]);
        if (it == label_index.end()) {
          it = label_index.emplace(std::string(fields[c]), static_cast<int>(labels.size())).first;
          labels.emplace_back(fields[c]);
        }
        target.push_back(it->second);
        continue;
      }
      auto value = parse_number(fields[c]);
      if (!value) {
        throw DatasetError("non-numeric value '" + std::string(fields[c]) + "' at row " +
                           std::to_string(row) + ", column '" + std::string(header[c]) + "'");
      }
      if (!std::isfinite(*value)) {
        throw DatasetError("non-finite value at row " + std::to_string(row) + ", column '" +
                           std::string(header[c]) + "'");
      }
      (is_target ? target : values).push_back(*value);
    }
  }
  if (target.empty()) throw DatasetError("empty dataset: no data rows");
  if (task == Task::classification && labels.size() < 2) {
    throw DatasetError("classification target has a single class");
  }
  Dataset ds(std::move(names), std::move(values), std::move(target), task, std::move(labels));
  ds.set_target_name(std::string(header[target_idx]));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, Task task,
                 std::optional<std::string> target_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), task, std::move(target_column));
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (const auto& name : ds.feature_names()) out += name + ",";
  out += ds.target_name() + "\n";
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (double v : ds.row(r)) out += format_double(v) + ",";
    if (ds.task() == Task::classification) {
      out += ds.class_labels()[static_cast<std::size_t>(ds.label(r))];
    } else {
      out += format_double(ds.target(r));
    }
    out += '\n';
  }
  return out;
}

std::string features_csv(const Dataset& ds, std::span<const std::size_t> rows, bool header) {
  std::string out;
  if (header) {
    for (std::size_t c = 0; c < ds.features(); ++c) {
      out += (c ? "," : "") + ds.feature_names()[c];
    }
    out += '\n';
  }
  for (std::size_t r : rows) {
    auto x = ds.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (c) out += ',';
      out += format_double(x[c]);
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write '" + path.string() + "'");
  out << to_csv(ds);
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::vector<std::size_t> FoldPlan::train_rows(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_rows(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (k > ds.rows()) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds row count " +
                      std::to_string(ds.rows()));
  }
  std::vector<std::size_t> order = all_rows(ds);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(ds.rows(), 0);

  if (ds.task() == Task::classification) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.classes()), 0);
    for (std::size_t r : order) ++counts[static_cast<std::size_t>(ds.label(r))];
    for (std::size_t c : counts) {
      if (c > 0 && c < k) plan.stratification_degraded = true;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ds.label(a) < ds.label(b);
    });
  }
  for (std::size_t i = 0; i < order.size(); ++i) plan.assignments[order[i]] = i % k;
  return plan;
}

void Normalization::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
}

void Normalization::invert(std::span<const double> in, std::span<double> out) const {
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = in[j] * scale[j] + mean[j];
}

Normalization Normalization::identity(std::size_t d) {
  return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<bool>(d, false)};
}

namespace {

// Mean and sample standard deviation; the second value is 0 for a single sample.
std::pair<double, double> moments(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

bool is_degenerate_scale(double stddev, double mean) {
  return !(stddev > 1e-12 * std::max(1.0, std::abs(mean)));
}

}  // namespace

Normalization fit_normalization(const Dataset& ds, std::span<const std::size_t> train_rows) {
  if (train_rows.empty()) throw ConfigError("normalization needs at least one training row");
  Normalization norm;
  std::vector<double> column(train_rows.size());
  for (std::size_t j = 0; j < ds.features(); ++j) {
    for (std::size_t i = 0; i < train_rows.size(); ++i) column[i] = ds.at(train_rows[i], j);
    auto [mean, sd] = moments(column);
    const bool flat = is_degenerate_scale(sd, mean);
    norm.mean.push_back(mean);
    norm.scale.push_back(flat ? 1.0 : sd);
    norm.constant.push_back(flat);
  }
  return norm;
}

std::pair<double, double> target_moments(const Dataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ConfigError("target moments need at least one row");
  std::vector<double> ys;
  ys.reserve(rows.size());
  for (std::size_t r : rows) ys.push_back(ds.target(r));
  auto [mean, sd] = moments(ys);
  return {mean, is_degenerate_scale(sd, mean) ? 1.0 : sd};
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "lte_regression" || name == "lte") return SyntheticKind::lte_regression;
  if (name == "vehicle_classification" || name == "vehicle") return SyntheticKind::vehicle_classification;
  throw ConfigError("unknown synthetic dataset '" + std::string(name) +
                    "' (known: lte_regression, vehicle_classification)");
}

namespace {

Dataset synth_lte(std::size_t n, double noise, Rng& rng) {
  std::vector<std::string> names{"RSRP", "SS",       "RSRQ",     "SINR",      "CQI",
                                 "TA",   "velocity", "cellId",   "frequency", "payload"};
  std::vector<double> values;
  std::vector<double> target;
  values.reserve(n * names.size());
  const double frequencies[] = {800.0, 1800.0, 2600.0};
  for (std::size_t i = 0; i < n; ++i) {
    // Integer dBm as reported by handsets; keeps SS = RSRP + 140 exact.
    const double rsrp = -120.0 + static_cast<double>(rng.below(51));
    const double ss = rsrp + 140.0;
    const double rsrq = -20.0 + static_cast<double>(rng.below(18));
    const double sinr = std::clamp(0.5 * (rsrp + 100.0) + rng.normal(0.0, 5.0), -10.0, 30.0);
    const double cqi = std::clamp(std::round(sinr / 2.0 + 7.0), 1.0, 15.0);
    const double ta = static_cast<double>(rng.below(41));
    const double velocity = rng.uniform(0.0, 35.0);
    const double cell = 1.0 + static_cast<double>(rng.below(25));
    const double freq = frequencies[rng.below(3)];
    const double payload = rng.uniform(0.1, 10.0);

    const double capacity = std::log2(1.0 + std::pow(10.0, sinr / 10.0));
    double rate = 3.5 * capacity * (1.0 - std::exp(-payload / 1.5)) * (1.0 - velocity / 120.0) +
                  0.04 * (rsrp + 120.0);
    rate = std::max(0.1, rate + noise * rng.normal());

    values.insert(values.end(), {rsrp, ss, rsrq, sinr, cqi, ta, velocity, cell, freq, payload});
    target.push_back(rate);
  }
  Dataset ds(std::move(names), std::move(values), std::move(target), Task::regression);
  ds.set_target_name("datarate");
  return ds;
}

Dataset synth_vehicles(std::size_t n, double noise, Rng& rng) {
  static const std::vector<std::string> labels{
      "Passenger car", "Passenger car with trailer", "Van", "Truck",
      "Truck with trailer", "Semitruck", "Bus"};
  // Length and height in metres per class.
  static const double shape[7][2] = {{4.5, 1.5}, {9.0, 1.6}, {5.3, 2.4}, {8.0, 3.3},
                                     {15.0, 3.3}, {16.5, 4.0}, {12.0, 3.1}};
  std::vector<std::string> names;
  for (int tx = 0; tx < 3; ++tx) {
    for (int rx = 0; rx < 3; ++rx) {
      names.push_back("link" + std::to_string(tx + 1) + std::to_string(rx + 1) + "_atten");
    }
  }
  std::vector<double> values;
  std::vector<double> target;
  values.reserve(n * 9);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % labels.size();
    const double length = shape[c][0] * (1.0 + 0.04 * rng.normal());
    const double height = shape[c][1] * (1.0 + 0.04 * rng.normal());
    for (int tx = 0; tx < 3; ++tx) {
      for (int rx = 0; rx < 3; ++rx) {
        // Higher node pairs are blocked only by tall vehicles; diagonal links
        // cross the vehicle over a longer stretch.
        const double mount = 0.5 + 0.9 * std::min(tx, rx);
        const double blocked = std::max(0.0, height - mount);
        const double stretch = 1.0 + 0.35 * std::abs(tx - rx);
        const double depth = 4.0 * blocked * stretch + 0.55 * length * (1.0 + 0.15 * rx);
        values.push_back(depth + noise * rng.normal());
      }
    }
    target.push_back(static_cast<double>(c));
  }
  Dataset ds(std::move(names), std::move(values), std::move(target), Task::classification, labels);
  ds.set_target_name("vehicle");
  return ds;
}

}  // namespace

Dataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.rows < 50) throw ConfigError("synthetic datasets need at least 50 rows");
  if (!(spec.noise >= 0.0)) throw ConfigError("noise level must be non-negative");
  Rng rng(seed);
  switch (spec.kind) {
    case SyntheticKind::lte_regression:
      return synth_lte(spec.rows, spec.noise, rng);
    case SyntheticKind::vehicle_classification:
      return synth_vehicles(spec.rows, spec.noise, rng);
  }
  throw ConfigError("unknown synthetic dataset kind");
}

}  // namespace mcufit
