#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcufit/dataset.hpp"
#include "mcufit/estimators.hpp"
#include "mcufit/metrics.hpp"
#include "mcufit/model.hpp"
#include "mcufit/toolchain.hpp"

namespace mcufit {

struct GridAxis {
  std::string name;  // ann: H (hidden layers), N (neurons); rf: T (trees), D (max depth)
  std::vector<int> values;
};

struct CandidateGrid {
  ModelConfig base;  // family and the hyperparameters not on an axis
  std::vector<GridAxis> axes;
  std::uint64_t seed = 1;
  std::size_t folds = 10;

  Family family() const { return base.family(); }
  /// Throws ConfigError on an unknown or repeated axis, an empty axis or a
  /// non-positive value.
  void validate() const;
};

/// Parses "T=1..5,D={2,4,8}" style specifications: comma-separated axes, each
/// a range `lo..hi` or a braced list. An empty spec yields a single candidate.
CandidateGrid parse_grid(const ModelConfig& base, std::string_view spec);

/// Cartesian product in row-major order (the last axis varies fastest).
std::vector<ModelConfig> enumerate_candidates(const CandidateGrid& grid);

enum class CandidateStatus { fits, program_overflow, ram_overflow, both, compile_failed, error };

std::string_view to_string(CandidateStatus status);

struct CandidateReport {
  std::size_t index = 0;  // enumeration order
  ModelConfig config;
  std::string platform;
  Metric quality_metric = Metric::r2;
  std::optional<MetricSummary> quality;
  MemoryEstimate analytical;
  std::optional<FootprintMeasurement> measurement;
  std::optional<CompileFailure> failure;
  CandidateStatus status = CandidateStatus::error;
  std::optional<std::uint64_t> ns_per_pred;
  std::string error;  // training or generation failure

  bool feasible() const { return status == CandidateStatus::fits; }
};

struct SweetSpot {
  std::string platform;
  std::optional<CandidateReport> winner;
  std::vector<CandidateReport> ranked;  // feasible candidates in selection order, winner first
  std::optional<CandidateReport> smallest_infeasible;  // diagnostic when nothing fits
  std::vector<std::string> trace;  // one line per candidate

  bool found() const { return winner.has_value(); }
  std::string summary() const;
};

/// Highest quality mean among feasible candidates; ties go to smaller
/// measured program memory, then smaller RAM, then earlier enumeration.
SweetSpot select_sweet_spot(std::span<const CandidateReport> reports, const PlatformDescriptor& platform);

/// Platform-independent part of a candidate evaluation.
struct PreparedCandidate {
  std::size_t index = 0;
  ModelConfig config;
  Metric quality_metric = Metric::r2;
  std::optional<MetricSummary> quality;
  std::optional<TrainedModel> model;
  std::optional<GeneratedSource> source;
  MemoryEstimate analytical;
  std::string error;
};

/// Cross-validates, retrains on all rows, generates code and computes the
/// analytical estimate. Trainer errors are recorded, not thrown.
PreparedCandidate prepare_candidate(const Dataset& ds, const ModelConfig& cfg, const FoldPlan& plan,
                                    std::size_t index = 0, const CodegenOptions& opts = {});

CandidateReport measure_candidate(const PreparedCandidate& prepared, const PlatformDescriptor& platform,
                                  ToolchainBackend& backend);

CandidateReport evaluate_candidate(const Dataset& ds, const ModelConfig& cfg, const PlatformDescriptor& platform,
                                   ToolchainBackend& backend, std::size_t folds = 10,
                                   std::uint64_t seed = 1);

struct SweepOptions {
  std::size_t jobs = 1;
  bool timing = false;
  CodegenOptions codegen;
};

struct SweepResult {
  std::vector<std::string> axis_names;
  std::vector<ModelConfig> candidates;
  std::vector<CandidateReport> reports;  // candidate-major, platforms in given order
  std::vector<SweetSpot> spots;          // one per platform
  std::vector<PlatformDescriptor> platforms;

  /// One row per candidate and platform with full-precision values.
  std::string to_csv() const;
};

SweepResult sweep(const Dataset& ds, const CandidateGrid& grid, std::span<const PlatformDescriptor> platforms,
                  ToolchainBackend& backend, const SweepOptions& opts = {});

}  // namespace mcufit
