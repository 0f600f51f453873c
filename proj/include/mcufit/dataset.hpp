#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcufit {

enum class Task { regression, classification };

std::string_view to_string(Task task);

/// Column-named tabular data with one designated target.
///
/// Features are stored row-major in a flat buffer. Classification targets are
/// dense class indices 0..n-1 stored as exact doubles; `class_labels` maps
/// them back to the original strings.
class Dataset {
 public:
  Dataset() = default;

  /// Validates the invariants (shapes, finiteness, unique names, dense class
  /// indices with at least two classes) and throws DatasetError otherwise.
  Dataset(std::vector<std::string> feature_names, std::vector<double> values,
          std::vector<double> target, Task task,
          std::vector<std::string> class_labels = {});

  std::size_t rows() const { return target_.size(); }
  std::size_t features() const { return feature_names_.size(); }
  Task task() const { return task_; }
  int classes() const { return static_cast<int>(class_labels_.size()); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * features(), features()};
  }
  double at(std::size_t row, std::size_t feature) const {
    return values_[row * features() + feature];
  }
  double target(std::size_t i) const { return target_[i]; }
  int label(std::size_t i) const { return static_cast<int>(target_[i]); }

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& targets() const { return target_; }
  const std::vector<std::string>& class_labels() const { return class_labels_; }

  /// Name used for the target column on export.
  const std::string& target_name() const { return target_name_; }
  void set_target_name(std::string name) { target_name_ = std::move(name); }

  /// Rows selected by index, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<double> values_;
  std::vector<double> target_;
  Task task_ = Task::regression;
  std::vector<std::string> class_labels_;
  std::string target_name_ = "target";
};

/// Parses CSV text: comma separated, header row first, '.' decimals.
/// The target column defaults to the last one.
Dataset parse_csv(std::string_view text, Task task,
                  std::optional<std::string> target_column = std::nullopt);

Dataset load_csv(const std::filesystem::path& path, Task task,
                 std::optional<std::string> target_column = std::nullopt);

/// Writes the dataset with shortest round-trip number formatting, so a reload
/// reproduces every value bit for bit. Classification targets are written as
/// their labels.
std::string to_csv(const Dataset& ds);

/// Feature rows only (no target), with or without the header line.
std::string features_csv(const Dataset& ds, std::span<const std::size_t> rows,
                         bool header);

void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // fold index per row
  std::uint64_t seed = 0;
  // Set when some class has fewer than k members; stratification is then
  // best effort.
  bool stratification_degraded = false;

  std::vector<std::size_t> train_rows(std::size_t fold) const;
  std::vector<std::size_t> test_rows(std::size_t fold) const;
};

/// Shuffle-then-stratify k-fold assignment. Rows are shuffled with the seeded
/// Rng, grouped by class (classification only, stable within a class), and
/// dealt round-robin over the folds.
FoldPlan make_folds(const Dataset& ds, std::size_t k, std::uint64_t seed);

/// Per-feature standardization fitted on a set of training rows.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale;     // sample standard deviation, 1 for constants
  std::vector<bool> constant;    // true where the divisor fell back to 1

  std::size_t size() const { return mean.size(); }
  void apply(std::span<const double> in, std::span<double> out) const;
  void invert(std::span<const double> in, std::span<double> out) const;
  /// Identity transform of the given width.
  static Normalization identity(std::size_t d);
};

Normalization fit_normalization(const Dataset& ds, std::span<const std::size_t> train_rows);

/// Mean and sample deviation of the targets of the given rows (regression).
std::pair<double, double> target_moments(const Dataset& ds,
                                         std::span<const std::size_t> rows);

enum class SyntheticKind { lte_regression, vehicle_classification };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::lte_regression;
  std::size_t rows = 1000;
  double noise = 1.0;
};

SyntheticKind parse_synthetic_kind(std::string_view name);

/// Benchmark datasets shaped like the two deployment case studies.
///
/// lte_regression: integer RSRP and SS = RSRP + 140 (exact), further radio and
/// context indicators, and a data-rate target that is a fixed nonlinear
/// function of SINR, payload, RSRP and velocity plus Gaussian noise.
///
/// vehicle_classification: 9 per-link attenuation summaries (one mean
/// attenuation depth per radio link) and 7 vehicle classes, balanced.
Dataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed);

std::vector<std::size_t> all_rows(const Dataset& ds);

}  // namespace mcufit
