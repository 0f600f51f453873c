#include "mcufit/sweetspot.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <set>
#include <thread>
#include <tuple>

#include "mcufit/codegen.hpp"
#include "mcufit/error.hpp"

namespace mcufit {
namespace {

std::vector<std::string> allowed_axes(Family family) {
  switch (family) {
    case Family::ann: return {"H", "N"};
    case Family::rf: return {"T", "D"};
    default: return {};
  }
}

void apply_axis(ModelConfig& cfg, const std::string& axis, int value) {
  if (auto* ann = std::get_if<AnnParams>(&cfg.params)) {
    (axis == "H" ? ann->hidden_layers : ann->neurons) = value;
  } else if (auto* rf = std::get_if<RfParams>(&cfg.params)) {
    (axis == "T" ? rf->trees : rf->max_depth) = value;
  }
}

int axis_value(const ModelConfig& cfg, const std::string& axis) {
  if (const auto* ann = std::get_if<AnnParams>(&cfg.params)) return axis == "H" ? ann->hidden_layers : ann->neurons;
  if (const auto* rf = std::get_if<RfParams>(&cfg.params)) return axis == "T" ? rf->trees : rf->max_depth;
  return 0;
}

int parse_int(std::string_view text, std::string_view axis) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("grid axis " + std::string(axis) + ": '" + std::string(text) + "' is not an integer");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t") - b + 1));
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

CandidateStatus status_of(FeasibilityVerdict v) {
  switch (v) {
    case FeasibilityVerdict::fits: return CandidateStatus::fits;
    case FeasibilityVerdict::program_overflow: return CandidateStatus::program_overflow;
    case FeasibilityVerdict::ram_overflow: return CandidateStatus::ram_overflow;
    case FeasibilityVerdict::both: return CandidateStatus::both;
  }
  return CandidateStatus::error;
}

CandidateReport make_report(const PreparedCandidate& prepared, const PlatformDescriptor& platform,
                            const BuildResult* build, const std::string& build_error) {
  CandidateReport r;
  r.index = prepared.index;
  r.config = prepared.config;
  r.platform = platform.name;
  r.quality_metric = prepared.quality_metric;
  r.quality = prepared.quality;
  r.analytical = prepared.analytical;
  if (!prepared.error.empty()) {
    r.error = prepared.error;
    r.status = CandidateStatus::error;
  } else if (!build_error.empty()) {
    r.error = build_error;
    r.status = CandidateStatus::error;
  } else if (const auto* m = std::get_if<FootprintMeasurement>(build)) {
    r.measurement = *m;
    r.status = status_of(check_budget(*m, platform));
  } else {
    r.failure = std::get<CompileFailure>(*build);
    r.status = CandidateStatus::compile_failed;
  }
  return r;
}

struct Measured {
  std::optional<BuildResult> build;
  std::string error;
  std::optional<std::uint64_t> ns;
};

Measured run_build(const PreparedCandidate& prepared, const PlatformDescriptor& platform,
                   ToolchainBackend& backend) {
  Measured out;
  if (!prepared.error.empty()) return out;
  try {
    out.build = backend.build(*prepared.model, *prepared.source, platform);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

bool better(const CandidateReport& a, const CandidateReport& b) {
  if (a.quality->mean != b.quality->mean) return a.quality->mean > b.quality->mean;
  if (a.measurement->program_memory != b.measurement->program_memory) {
    return a.measurement->program_memory < b.measurement->program_memory;
  }
  if (a.measurement->ram != b.measurement->ram) return a.measurement->ram < b.measurement->ram;
  return a.index < b.index;
}

std::string describe(const CandidateReport& r) {
  std::string s = "#" + std::to_string(r.index) + " " + r.config.label();
  if (r.quality) s += " " + std::string(to_string(r.quality_metric)) + "=" + format_double(r.quality->mean);
  if (r.measurement) {
    s += " program=" + std::to_string(r.measurement->program_memory) + " B ram=" +
         std::to_string(r.measurement->ram) + " B";
  }
  return s;
}

}  // namespace

void CandidateGrid::validate() const {
  base.validate();
  const auto allowed = allowed_axes(family());
  std::set<std::string> seen;
  for (const auto& axis : axes) {
    if (std::find(allowed.begin(), allowed.end(), axis.name) == allowed.end()) {
      std::string known;
      for (const auto& a : allowed) known += (known.empty() ? "" : ", ") + a;
      throw ConfigError("grid axis '" + axis.name + "' does not apply to " + std::string(to_string(family())) +
                        (known.empty() ? " (no axes)" : " (axes: " + known + ")"));
    }
    if (!seen.insert(axis.name).second) throw ConfigError("grid axis '" + axis.name + "' given twice");
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.name + "' is empty");
    for (int v : axis.values) {
      if (v <= 0) throw ConfigError("grid axis '" + axis.name + "' has non-positive value " + std::to_string(v));
    }
  }
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
}

CandidateGrid parse_grid(const ModelConfig& base, std::string_view spec) {
  CandidateGrid grid;
  grid.base = base;
  std::vector<std::string> parts;
  std::string current;
  int depth = 0;
  for (char c : spec) {
    if (c == '{') ++depth;
    if (c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (!trim(current).empty() || !parts.empty()) parts.push_back(current);
  for (const auto& raw : parts) {
    const std::string part = trim(raw);
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("grid axis '" + part + "': expected NAME=values");
    GridAxis axis{trim(std::string_view(part).substr(0, eq)), {}};
    const std::string values = trim(std::string_view(part).substr(eq + 1));
    if (values.size() >= 2 && values.front() == '{' && values.back() == '}') {
      const std::string inner = values.substr(1, values.size() - 2);
      std::size_t start = 0;
      while (start <= inner.size() && !trim(inner).empty()) {
        const auto end = std::min(inner.find(',', start), inner.size());
        axis.values.push_back(parse_int(trim(std::string_view(inner).substr(start, end - start)), axis.name));
        start = end + 1;
      }
    } else if (const auto dots = values.find(".."); dots != std::string::npos) {
      const int lo = parse_int(trim(std::string_view(values).substr(0, dots)), axis.name);
      const int hi = parse_int(trim(std::string_view(values).substr(dots + 2)), axis.name);
      for (int v = lo; v <= hi; ++v) axis.values.push_back(v);
    } else {
      axis.values.push_back(parse_int(values, axis.name));
    }
    grid.axes.push_back(std::move(axis));
  }
  grid.validate();
  return grid;
}

std::vector<ModelConfig> enumerate_candidates(const CandidateGrid& grid) {
  grid.validate();
  std::vector<ModelConfig> out{grid.base};
  for (const auto& axis : grid.axes) {
    std::vector<ModelConfig> next;
    for (const auto& cfg : out) {
      for (int v : axis.values) {
        ModelConfig c = cfg;
        apply_axis(c, axis.name, v);
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string_view to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::fits: return "fits";
    case CandidateStatus::program_overflow: return "program_overflow";
    case CandidateStatus::ram_overflow: return "ram_overflow";
    case CandidateStatus::both: return "both";
    case CandidateStatus::compile_failed: return "compile_failed";
    case CandidateStatus::error: return "error";
  }
  return "?";
}

SweetSpot select_sweet_spot(std::span<const CandidateReport> reports, const PlatformDescriptor& platform) {
  if (reports.empty()) throw ConfigError("sweet-spot selection needs at least one candidate");
  SweetSpot spot;
  spot.platform = platform.name;
  for (const auto& r : reports) {
    if (r.feasible()) {
      if (!r.quality || !r.measurement) throw ConfigError("feasible candidate without quality or measurement");
      spot.ranked.push_back(r);
    } else if (r.measurement) {
      const auto& best = spot.smallest_infeasible;
      const bool smaller =
          !best || !best->measurement ||
          std::tie(r.measurement->program_memory, r.measurement->ram, r.index) <
              std::tie(best->measurement->program_memory, best->measurement->ram, best->index);
      if (smaller) spot.smallest_infeasible = r;
    } else if (!spot.smallest_infeasible) {
      spot.smallest_infeasible = r;
    }
  }
  std::sort(spot.ranked.begin(), spot.ranked.end(), better);
  if (!spot.ranked.empty()) {
    spot.winner = spot.ranked.front();
    spot.smallest_infeasible.reset();
  }
  for (const auto& r : reports) {
    std::string line = describe(r) + ": ";
    if (!r.feasible()) {
      line += std::string(to_string(r.status));
      if (r.failure) line += " (" + r.failure->message + ")";
      if (!r.error.empty()) line += " (" + r.error + ")";
    } else if (spot.winner && r.index == spot.winner->index) {
      line += "winner";
    } else {
      line += "feasible, outranked";
    }
    spot.trace.push_back(std::move(line));
  }
  return spot;
}

std::string SweetSpot::summary() const {
  if (winner) {
    return platform + ": sweet spot " + describe(*winner) + " (" + std::string(to_string(winner->status)) + ")";
  }
  std::string s = platform + ": no sweet spot";
  if (smallest_infeasible) {
    s += "; smallest infeasible " + describe(*smallest_infeasible) + " (" +
         std::string(to_string(smallest_infeasible->status)) + ")";
  }
  return s;
}

PreparedCandidate prepare_candidate(const Dataset& ds, const ModelConfig& cfg, const FoldPlan& plan,
                                    std::size_t index, const CodegenOptions& opts) {
  PreparedCandidate p;
  p.index = index;
  p.config = cfg;
  p.quality_metric = ds.task() == Task::regression ? Metric::r2 : Metric::accuracy;
  try {
    p.quality = cross_validate(ds, plan, cfg).at(p.quality_metric);
    p.model = train(ds, all_rows(ds), cfg);
    p.source = generate(*p.model, opts);
    p.analytical = candidate_estimate(*p.model, *p.source);
  } catch (const Error& e) {
    p.error = e.what();
  }
  return p;
}

CandidateReport measure_candidate(const PreparedCandidate& prepared, const PlatformDescriptor& platform,
                                  ToolchainBackend& backend) {
  const auto m = run_build(prepared, platform, backend);
  return make_report(prepared, platform, m.build ? &*m.build : nullptr, m.error);
}

CandidateReport evaluate_candidate(const Dataset& ds, const ModelConfig& cfg, const PlatformDescriptor& platform,
                                   ToolchainBackend& backend, std::size_t folds, std::uint64_t seed) {
  const auto plan = make_folds(ds, folds, seed);
  return measure_candidate(prepare_candidate(ds, cfg, plan), platform, backend);
}

SweepResult sweep(const Dataset& ds, const CandidateGrid& grid, std::span<const PlatformDescriptor> platforms,
                  ToolchainBackend& backend, const SweepOptions& opts) {
  if (platforms.empty()) throw ConfigError("sweep needs at least one platform");
  for (const auto& p : platforms) p.validate();
  check_supports(grid.base, ds.task());
  SweepResult result;
  result.candidates = enumerate_candidates(grid);
  for (const auto& axis : grid.axes) result.axis_names.push_back(axis.name);
  result.platforms.assign(platforms.begin(), platforms.end());
  const auto plan = make_folds(ds, grid.folds, grid.seed);

  std::vector<std::vector<double>> samples;
  for (std::size_t r = 0; r < std::min<std::size_t>(ds.rows(), 16); ++r) {
    samples.emplace_back(ds.row(r).begin(), ds.row(r).end());
  }

  const std::size_t n = result.candidates.size();
  const std::size_t np = platforms.size();
  result.reports.resize(n * np);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto prepared = prepare_candidate(ds, result.candidates[i], plan, i, opts.codegen);
      // Training is platform-independent; builds are shared by platforms with one toolchain.
      std::map<std::string, Measured> cache;
      for (std::size_t p = 0; p < np; ++p) {
        const auto key = backend.measurement_key(platforms[p]);
        auto it = cache.find(key);
        if (it == cache.end()) {
          Measured m = run_build(prepared, platforms[p], backend);
          if (opts.timing && prepared.error.empty() && m.error.empty() && m.build &&
              std::holds_alternative<FootprintMeasurement>(*m.build)) {
            try {
              m.ns = backend.time(*prepared.source, platforms[p], samples);
            } catch (const Error&) {
              m.ns.reset();
            }
          }
          it = cache.emplace(key, std::move(m)).first;
        }
        auto report = make_report(prepared, platforms[p], it->second.build ? &*it->second.build : nullptr,
                                  it->second.error);
        report.ns_per_pred = it->second.ns;
        result.reports[i * np + p] = std::move(report);
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t p = 0; p < np; ++p) {
    std::vector<CandidateReport> column;
    for (std::size_t i = 0; i < n; ++i) column.push_back(result.reports[i * np + p]);
    result.spots.push_back(select_sweet_spot(column, platforms[p]));
  }
  return result;
}

std::string SweepResult::to_csv() const {
  std::string out = "platform,index,config";
  for (const auto& a : axis_names) out += "," + a;
  out += ",quality_metric,quality_mean,quality_std,analytical_params,analytical_bytes,program_bytes,ram_bytes,"
         "program_budget,ram_budget,status,ns_per_pred,error\n";
  std::map<std::string, const PlatformDescriptor*> by_name;
  for (const auto& p : platforms) by_name[p.name] = &p;
  for (const auto& r : reports) {
    const auto* p = by_name.at(r.platform);
    out += csv_field(r.platform) + "," + std::to_string(r.index) + "," + csv_field(r.config.label());
    for (const auto& a : axis_names) out += "," + std::to_string(axis_value(r.config, a));
    out += "," + std::string(to_string(r.quality_metric));
    out += "," + (r.quality ? format_double(r.quality->mean) : "");
    out += "," + (r.quality ? format_double(r.quality->stddev) : "");
    out += "," + std::to_string(r.analytical.parameter_count) + "," + std::to_string(r.analytical.bytes());
    out += "," + (r.measurement ? std::to_string(r.measurement->program_memory) : "");
    out += "," + (r.measurement ? std::to_string(r.measurement->ram) : "");
    out += "," + std::to_string(p->program_budget) + "," + std::to_string(p->ram_budget);
    out += "," + std::string(to_string(r.status));
    out += "," + (r.ns_per_pred ? std::to_string(*r.ns_per_pred) : "");
    std::string err = r.error;
    if (r.failure) err = r.failure->message;
    out += "," + csv_field(err) + "\n";
  }
  return out;
}

}  // namespace mcufit
