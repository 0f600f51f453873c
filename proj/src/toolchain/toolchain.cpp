#include <stdlib.h>
#include <string.h>

#include <charconv>
#include <condition_variable>
#include <fstream>
#include <mutex>

#include "mcufit/error.hpp"
#include "mcufit/toolchain.hpp"

namespace mcufit {
namespace {

std::filesystem::path make_workdir(const std::filesystem::path& parent) {
  const auto base = parent.empty() ? std::filesystem::temp_directory_path() : parent;
  std::filesystem::create_directories(base);
  std::string tmpl = (base / "mcufit-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) {
    throw ToolchainError("cannot create a work directory under '" + base.string() + "'");
  }
  return tmpl;
}

void remove_quietly(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
}

std::string first_line(const std::string& text) {
  const auto end = text.find('\n');
  return text.substr(0, end);
}

// Keeps a compiled binary's directory alive while runners reference it.
struct WorkdirGuard {
  std::filesystem::path dir;
  ~WorkdirGuard() { remove_quietly(dir); }
};

}  // namespace

std::string_view to_string(CompileFailure::Kind kind) {
  switch (kind) {
    case CompileFailure::Kind::diagnostics: return "compile_error";
    case CompileFailure::Kind::timeout: return "compile_timeout";
    case CompileFailure::Kind::command_not_found: return "command_not_found";
  }
  return "?";
}

CompileResult compile(const std::vector<SourceFile>& sources, const PlatformDescriptor& platform,
                      const std::filesystem::path& parent) {
  platform.validate();
  const std::string compiler = platform.compile_command.front();
  if (!find_executable(compiler)) {
    return CompileFailure{CompileFailure::Kind::command_not_found, "command not found: " + compiler, ""};
  }
  const auto workdir = make_workdir(parent);
  std::vector<std::string> source_paths;
  for (const auto& file : sources) {
    const auto path = workdir / file.name;
    std::ofstream(path, std::ios::binary) << file.text;
    if (path.extension() == ".c") source_paths.push_back(path.string());
  }
  const auto binary = workdir / "model.bin";
  std::vector<std::string> argv;
  for (const auto& token : platform.compile_command) {
    if (token == "{src}") argv.insert(argv.end(), source_paths.begin(), source_paths.end());
    else if (token == "{out}") argv.push_back(binary.string());
    else argv.push_back(token);
  }
  ProcessResult result;
  try {
    result = run_process(argv, "", platform.timeout_s, workdir);
  } catch (const ToolchainError& e) {
    remove_quietly(workdir);
    return CompileFailure{CompileFailure::Kind::command_not_found, e.what(), ""};
  }
  if (result.timed_out) {
    remove_quietly(workdir);
    return CompileFailure{CompileFailure::Kind::timeout,
                          "compilation exceeded " + format_double(platform.timeout_s) + " s", result.err};
  }
  if (!result.ok()) {
    remove_quietly(workdir);
    const std::string diagnostics = result.err + result.out;
    return CompileFailure{CompileFailure::Kind::diagnostics,
                          "compiler exited with status " + std::to_string(result.exit_code) + ": " +
                              first_line(diagnostics),
                          diagnostics};
  }
  return CompiledBinary{binary, workdir, result.err, result.seconds};
}

std::vector<SourceFile> model_sources(const GeneratedSource& gs, const std::string& harness) {
  return {{"model.h", gs.header}, {"model.c", gs.source}, {"harness.c", harness}};
}

std::vector<double> run_replay(const std::filesystem::path& binary, const std::string& csv,
                               std::size_t expected_rows, double timeout_s) {
  const auto result = run_process({binary.string()}, csv, timeout_s);
  if (result.timed_out) throw ToolchainError("replay timed out after " + format_double(timeout_s) + " s");
  if (result.signal != 0) {
    throw ToolchainError("replay killed by signal " + std::to_string(result.signal) + " (" +
                         ::strsignal(result.signal) + ")");
  }
  if (result.exit_code != 0) {
    throw ToolchainError("replay exited with status " + std::to_string(result.exit_code) + ": " +
                         first_line(result.err));
  }
  std::vector<double> predictions;
  std::size_t lineno = 0, start = 0;
  const std::string& out = result.out;
  while (start < out.size()) {
    auto end = out.find('\n', start);
    if (end == std::string::npos) end = out.size();
    ++lineno;
    const std::string_view line(out.data() + start, end - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size() || line.empty()) {
      throw ToolchainError("replay output line " + std::to_string(lineno) + ": non-numeric prediction '" +
                           std::string(line) + "'");
    }
    predictions.push_back(v);
    start = end + 1;
  }
  if (predictions.size() != expected_rows) {
    throw ToolchainError("replay produced " + std::to_string(predictions.size()) + " lines for " +
                         std::to_string(expected_rows) + " rows");
  }
  return predictions;
}

std::uint64_t run_timing(const std::filesystem::path& binary, double timeout_s) {
  const auto result = run_process({binary.string()}, "", timeout_s);
  if (!result.ok()) throw ToolchainError("timing harness failed: " + first_line(result.err));
  const std::string key = "ns_per_pred=";
  const auto pos = result.out.find(key);
  if (pos == std::string::npos) throw ToolchainError("timing harness printed no ns_per_pred line");
  std::uint64_t ns = 0;
  const char* begin = result.out.data() + pos + key.size();
  const auto [ptr, ec] = std::from_chars(begin, result.out.data() + result.out.size(), ns);
  if (ec != std::errc() || (*ptr != '\n' && *ptr != '\0')) throw ToolchainError("malformed ns_per_pred line");
  return ns;
}

MemoryEstimate candidate_estimate(const TrainedModel& model, const GeneratedSource& gs) {
  const auto width = static_cast<std::size_t>(gs.manifest.scalar_width);
  MemoryEstimate e;
  switch (model.family()) {
    case Family::ann: {
      const auto sizes = std::get<AnnModel>(model.body).layer_sizes();
      e = estimate_ann(sizes, width);
      break;
    }
    case Family::svm:
      if (model.task == Task::classification) {
        e = estimate_svm(model.classes, model.features, width).with_biases();
      } else {
        e = {model.features + 1, width, EstimateKind::analytical};
      }
      break;
    case Family::rf:
    case Family::m5:
      return estimate_tree_exact(model, width);
  }
  e.parameter_count += gs.manifest.normalization_constants;
  return e;
}

// ---------------------------------------------------------------------------

struct HostToolchain::Limiter {
  std::mutex mutex;
  std::condition_variable cv;
  std::size_t available;
  explicit Limiter(std::size_t n) : available(n) {}
  void acquire() {
    std::unique_lock lock(mutex);
    cv.wait(lock, [&] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard lock(mutex);
      ++available;
    }
    cv.notify_one();
  }
};

HostToolchain::HostToolchain(std::size_t jobs, std::filesystem::path workroot)
    : limiter_(std::make_unique<Limiter>(std::max<std::size_t>(1, jobs))), workroot_(std::move(workroot)) {}

HostToolchain::~HostToolchain() = default;

std::string HostToolchain::measurement_key(const PlatformDescriptor& p) const {
  std::string key;
  for (const auto& t : p.compile_command) key += t + ' ';
  key += '|';
  for (const auto& t : p.size_command) key += t + ' ';
  return key + '|' + std::string(to_string(p.size_dialect)) + '|' + std::to_string(p.stack_reserve);
}

CompileResult HostToolchain::compile_limited(const std::vector<SourceFile>& sources,
                                             const PlatformDescriptor& platform) {
  limiter_->acquire();
  try {
    auto result = compile(sources, platform, workroot_);
    limiter_->release();
    return result;
  } catch (...) {
    limiter_->release();
    throw;
  }
}

BuildResult HostToolchain::build(const TrainedModel&, const GeneratedSource& gs,
                                 const PlatformDescriptor& platform) {
  auto compiled = compile_limited(model_sources(gs, generate_harness(gs, HarnessMode::replay)), platform);
  if (auto* failure = std::get_if<CompileFailure>(&compiled)) return *failure;
  const WorkdirGuard guard{std::get<CompiledBinary>(compiled).workdir};
  return measure_footprint(std::get<CompiledBinary>(compiled), platform);
}

std::optional<std::uint64_t> HostToolchain::time(const GeneratedSource& gs, const PlatformDescriptor& platform,
                                                 std::span<const std::vector<double>> samples) {
  if (!platform.executable) return std::nullopt;
  auto compiled =
      compile_limited(model_sources(gs, generate_harness(gs, HarnessMode::timing, samples)), platform);
  if (auto* failure = std::get_if<CompileFailure>(&compiled)) {
    throw ToolchainError("timing harness: " + failure->message);
  }
  const auto& binary = std::get<CompiledBinary>(compiled);
  const WorkdirGuard guard{binary.workdir};
  return run_timing(binary.path, platform.timeout_s);
}

ReplayRunner HostToolchain::replay_runner(const GeneratedSource& gs, const PlatformDescriptor& platform) {
  if (!platform.executable) {
    throw ToolchainError("platform '" + platform.name + "' cannot run replay binaries on this host");
  }
  auto compiled = compile_limited(model_sources(gs, generate_harness(gs, HarnessMode::replay)), platform);
  if (auto* failure = std::get_if<CompileFailure>(&compiled)) {
    throw ToolchainError("replay harness: " + failure->message);
  }
  const auto binary = std::get<CompiledBinary>(compiled);
  auto guard = std::make_shared<WorkdirGuard>();
  guard->dir = binary.workdir;
  const double timeout = platform.timeout_s;
  return [guard, path = binary.path, timeout](const std::string& csv, std::size_t rows) {
    return run_replay(path, csv, rows, timeout);
  };
}

std::string MockToolchain::measurement_key(const PlatformDescriptor& p) const {
  return "mock|" + std::to_string(p.stack_reserve);
}

BuildResult MockToolchain::build(const TrainedModel& model, const GeneratedSource& gs,
                                 const PlatformDescriptor& platform) {
  const std::uint64_t analytical = candidate_estimate(model, gs).bytes();
  FootprintMeasurement m;
  m.sections = {{"text", analytical + program_offset_}, {"data", 0}, {"bss", ram_offset_}};
  m.program_memory = analytical + program_offset_;
  m.ram = ram_offset_ + platform.stack_reserve;
  return m;
}

PlatformDescriptor host_variant(const PlatformDescriptor& target, const PlatformDescriptor& host,
                                const std::filesystem::path& workroot) {
  TrainedModel baseline;
  baseline.task = Task::regression;
  baseline.features = 1;
  baseline.feature_names = {"x"};
  Tree tree;
  tree.nodes.push_back(TreeNode{});
  baseline.body = ForestModel{{tree}, Aggregation::mean};
  const auto gs = generate(baseline);
  auto compiled = compile(model_sources(gs, generate_harness(gs, HarnessMode::replay)), host, workroot);
  if (auto* failure = std::get_if<CompileFailure>(&compiled)) {
    throw ToolchainError("host baseline for '" + target.name + "': " + failure->message);
  }
  const WorkdirGuard guard{std::get<CompiledBinary>(compiled).workdir};
  const auto base = measure_footprint(std::get<CompiledBinary>(compiled), host);

  PlatformDescriptor p = host;
  p.name = target.name + "@host";
  p.program_budget = target.program_budget + base.program_memory;
  p.ram_budget = target.ram_budget + base.sections.at("data") + base.sections.at("bss");
  p.stack_reserve = target.stack_reserve;
  return p;
}

}  // namespace mcufit
