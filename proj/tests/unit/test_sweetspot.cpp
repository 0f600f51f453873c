#include <gtest/gtest.h>

#include <map>
#include <random>

#include "mcufit/error.hpp"
#include "mcufit/sweetspot.hpp"
#include "oracles.hpp"

using namespace mcufit;

namespace {

const Dataset& lte() {
  static const Dataset ds = synth_dataset({SyntheticKind::lte_regression, 200, 1.0}, 2);
  return ds;
}

CandidateReport report(std::size_t index, double quality, std::uint64_t program, std::uint64_t ram,
                       const PlatformDescriptor& platform) {
  CandidateReport r;
  r.index = index;
  r.config = ModelConfig::rf(static_cast<int>(index) + 1, 2);
  r.platform = platform.name;
  r.quality = MetricSummary::of({quality, quality});
  FootprintMeasurement m;
  m.program_memory = program;
  m.ram = ram;
  r.measurement = m;
  switch (check_budget(m, platform)) {
    case FeasibilityVerdict::fits: r.status = CandidateStatus::fits; break;
    case FeasibilityVerdict::program_overflow: r.status = CandidateStatus::program_overflow; break;
    case FeasibilityVerdict::ram_overflow: r.status = CandidateStatus::ram_overflow; break;
    case FeasibilityVerdict::both: r.status = CandidateStatus::both; break;
  }
  return r;
}

PlatformDescriptor budget(std::uint64_t program, std::uint64_t ram) {
  auto p = builtin_platform("msp430");
  p.name = "test";
  p.program_budget = program;
  p.ram_budget = ram;
  return p;
}

}  // namespace

TEST(Grid, CartesianProductInDeclaredOrder) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::ann), "H={1,2,3},N={4,8}");
  const auto configs = enumerate_candidates(grid);
  std::vector<std::string> labels;
  for (const auto& c : configs) labels.push_back(c.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"ann{1,4}", "ann{1,8}", "ann{2,4}", "ann{2,8}", "ann{3,4}", "ann{3,8}"}));
  EXPECT_EQ(enumerate_candidates(parse_grid(ModelConfig::defaults(Family::rf), "T=2..4,D=3")).size(), 3u);
}

TEST(Grid, SinglePointAndErrors) {
  EXPECT_EQ(enumerate_candidates(parse_grid(ModelConfig::defaults(Family::rf), "T={3},D={5}")).size(), 1u);
  EXPECT_EQ(enumerate_candidates(parse_grid(ModelConfig::defaults(Family::m5), "")).size(), 1u);
  EXPECT_THROW(parse_grid(ModelConfig::defaults(Family::rf), "T={},D=1"), ConfigError);
  EXPECT_THROW(parse_grid(ModelConfig::defaults(Family::rf), "T=5..1"), ConfigError);
  EXPECT_THROW(parse_grid(ModelConfig::defaults(Family::rf), "H=1..2"), ConfigError);
  EXPECT_THROW(parse_grid(ModelConfig::defaults(Family::rf), "T=1,T=2"), ConfigError);
  EXPECT_THROW(parse_grid(ModelConfig::defaults(Family::rf), "T=0..2"), ConfigError);
  CandidateGrid g;
  g.base = ModelConfig::defaults(Family::rf);
  g.axes = {{"T", {}}};
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Select, QualityFirst) {
  const auto p = budget(16740, 512);
  const std::vector<CandidateReport> rs{report(0, 0.80, 12 * 1024, 200, p), report(1, 0.78, 5 * 1024, 200, p)};
  const auto spot = select_sweet_spot(rs, p);
  ASSERT_TRUE(spot.found());
  EXPECT_EQ(spot.winner->index, 0u);
  EXPECT_EQ(spot.ranked.size(), 2u);
  EXPECT_EQ(spot.trace.size(), 2u);
}

TEST(Select, TieBreaks) {
  const auto p = budget(16740, 512);
  const std::vector<CandidateReport> by_program{report(0, 0.9, 12 * 1024, 200, p), report(1, 0.9, 10 * 1024, 200, p)};
  EXPECT_EQ(select_sweet_spot(by_program, p).winner->index, 1u);
  const std::vector<CandidateReport> by_ram{report(0, 0.9, 1000, 300, p), report(1, 0.9, 1000, 200, p)};
  EXPECT_EQ(select_sweet_spot(by_ram, p).winner->index, 1u);
  const std::vector<CandidateReport> by_index{report(0, 0.9, 1000, 200, p), report(1, 0.9, 1000, 200, p)};
  EXPECT_EQ(select_sweet_spot(by_index, p).winner->index, 0u);
}

TEST(Select, InfeasibleNeverWins) {
  const auto p = budget(16740, 512);
  const std::vector<CandidateReport> rs{report(0, 0.99, 24 * 1024, 200, p), report(1, 0.5, 1024, 200, p)};
  EXPECT_EQ(select_sweet_spot(rs, p).winner->index, 1u);
}

TEST(Select, NoSweetSpotCarriesSmallestInfeasible) {
  const auto p = budget(1000, 100);
  const std::vector<CandidateReport> rs{report(0, 0.9, 5000, 50, p), report(1, 0.8, 3000, 500, p),
                                        report(2, 0.7, 4000, 50, p)};
  const auto spot = select_sweet_spot(rs, p);
  EXPECT_FALSE(spot.found());
  ASSERT_TRUE(spot.smallest_infeasible);
  EXPECT_EQ(spot.smallest_infeasible->index, 1u);
  EXPECT_NE(spot.summary().find("no sweet spot"), std::string::npos);
}

TEST(Sweep, MockGridShapeAndOracle) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::rf), "T=1..6,D=1..6");
  std::vector<PlatformDescriptor> platforms{budget(1500, 512)};
  MockToolchain mock(200, 0);
  const auto result = sweep(lte(), grid, platforms, mock);
  const auto rows = oracle::read_csv(result.to_csv());
  EXPECT_EQ(rows.size(), 36u);
  std::map<std::string, int> seen;
  for (const auto& row : rows) ++seen[row.at("index")];
  EXPECT_EQ(seen.size(), 36u);
  const auto want = oracle::brute_force_winner(rows, "test");
  ASSERT_EQ(result.spots.size(), 1u);
  ASSERT_EQ(want.has_value(), result.spots[0].found());
  if (want) {
    EXPECT_EQ(*want, result.spots[0].winner->index);
  }
}

TEST(Sweep, SharedMeasurementAcrossPlatforms) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::rf), "T=1..3,D={2,6}");
  std::vector<PlatformDescriptor> platforms{budget(400, 512), budget(100000, 512)};
  platforms[1].name = "large";
  MockToolchain mock;
  const auto result = sweep(lte(), grid, platforms, mock, {2, false, {}});
  ASSERT_EQ(result.reports.size(), 12u);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& a = result.reports[2 * i];
    const auto& b = result.reports[2 * i + 1];
    EXPECT_EQ(a.index, b.index);
    EXPECT_EQ(a.measurement->program_memory, b.measurement->program_memory);
    EXPECT_EQ(a.quality->mean, b.quality->mean);
  }
}

TEST(Sweep, EnlargingBudgetsKeepsWinnerFeasible) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::rf), "T=1..4,D=1..5");
  std::mt19937_64 gen(12);
  for (int t = 0; t < 5; ++t) {
    const auto small = budget(300 + gen() % 2000, 150 + gen() % 100);
    auto large = small;
    large.name = "large";
    large.program_budget += gen() % 3000;
    large.ram_budget += gen() % 100;
    const std::vector<PlatformDescriptor> platforms{small, large};
    MockToolchain mock(gen() % 200, gen() % 50);
    const auto result = sweep(lte(), grid, platforms, mock);
    if (!result.spots[0].found()) continue;
    const auto w = result.spots[0].winner->index;
    EXPECT_TRUE(result.reports[w * 2 + 1].feasible());
    ASSERT_TRUE(result.spots[1].found());
    EXPECT_GE(result.spots[1].winner->quality->mean, result.spots[0].winner->quality->mean);
  }
}

TEST(Sweep, OffsetIdentityForAnnAndSvm) {
  const auto base = parse_grid(ModelConfig::ann(3, 12), "");
  const std::vector<PlatformDescriptor> platforms{builtin_platform("esp32")};
  for (std::uint64_t offset : {0u, 5000u}) {
    MockToolchain mock(offset);
    const auto result = sweep(lte(), base, platforms, mock);
    const auto& r = result.reports[0];
    ASSERT_TRUE(r.measurement);
    EXPECT_EQ(r.measurement->program_memory - r.analytical.bytes(), offset);
    const std::size_t d = lte().features();
    EXPECT_EQ(r.analytical.parameter_count, oracle::ann_parameters({d, 12, 12, 12, 1}) + 2 * d + 2);

    const auto veh = synth_dataset({SyntheticKind::vehicle_classification, 140, 1.0}, 1);
    const auto svm = sweep(veh, parse_grid(ModelConfig::defaults(Family::svm), ""), platforms, mock).reports[0];
    ASSERT_TRUE(svm.measurement);
    EXPECT_EQ(svm.measurement->program_memory - svm.analytical.bytes(), offset);
    EXPECT_EQ(svm.analytical.parameter_count, 21u * 9 + 21 + 2 * 9);
  }
}

TEST(Sweep, TrainerErrorsAreRecorded) {
  const auto ds = oracle::separable_classes(20, 2, 2, 1);
  const auto plan = make_folds(ds, 5, 1);
  const auto prepared = prepare_candidate(ds, ModelConfig::defaults(Family::m5), plan);
  EXPECT_FALSE(prepared.model.has_value());
  EXPECT_NE(prepared.error.find("M5 is regression-only"), std::string::npos);
  MockToolchain mock;
  const auto r = measure_candidate(prepared, builtin_platform("msp430"), mock);
  EXPECT_EQ(r.status, CandidateStatus::error);
  const std::vector<CandidateReport> rs{r};
  EXPECT_FALSE(select_sweet_spot(rs, builtin_platform("msp430")).found());
  // A whole sweep of an unsupported family is rejected before any work.
  const std::vector<PlatformDescriptor> platforms{builtin_platform("msp430")};
  EXPECT_THROW(sweep(ds, parse_grid(ModelConfig::defaults(Family::m5), ""), platforms, mock), ConfigError);
}

TEST(Sweep, CompileFailureIsInfeasible) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::rf), "T={1},D={2}");
  auto p = builtin_platform("msp430");
  p.compile_command[0] = "no-such-cross-gcc";
  const std::vector<PlatformDescriptor> platforms{p};
  HostToolchain host;
  const auto result = sweep(lte(), grid, platforms, host);
  EXPECT_EQ(result.reports[0].status, CandidateStatus::compile_failed);
  EXPECT_TRUE(result.reports[0].quality.has_value());
}

TEST(Sweep, Deterministic) {
  const auto grid = parse_grid(ModelConfig::defaults(Family::rf), "T=1..3,D={2,4}");
  const std::vector<PlatformDescriptor> platforms{builtin_platform("msp430")};
  MockToolchain mock(100);
  EXPECT_EQ(sweep(lte(), grid, platforms, mock, {1, false, {}}).to_csv(),
            sweep(lte(), grid, platforms, mock, {3, false, {}}).to_csv());
}
