#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcufit/codegen.hpp"
#include "mcufit/estimators.hpp"
#include "mcufit/model.hpp"

namespace mcufit {

// ---------------------------------------------------------------------------
// Child processes

struct ProcessResult {
  int exit_code = -1;  // valid when signal == 0 and !timed_out
  int signal = 0;      // terminating signal, 0 if the child exited
  bool timed_out = false;
  std::string out;
  std::string err;
  double seconds = 0.0;

  bool ok() const { return !timed_out && signal == 0 && exit_code == 0; }
};

/// Variables passed through to children; everything else is dropped and
/// LC_ALL is forced to C.
inline constexpr std::string_view kEnvironmentAllowlist[] = {"PATH", "TMPDIR", "HOME"};

/// Resolves a program name against the allowlisted PATH (names containing a
/// slash are checked as given).
std::optional<std::filesystem::path> find_executable(const std::string& name);

/// Runs argv[0] with `input` on stdin in its own process group. The group is
/// killed with SIGKILL once `timeout_s` elapses. Throws ToolchainError when
/// the program cannot be found or started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& input,
                          double timeout_s, const std::filesystem::path& cwd = {});

// ---------------------------------------------------------------------------
// Platforms

enum class SizeDialect { berkeley, map_json };

std::string_view to_string(SizeDialect dialect);

/// Key/value text form (one `key = value` per line, `#` comments):
///   name, program_budget, ram_budget (bytes), compile (argv with {src} and
///   {out}), size (argv with {bin}), size_dialect (berkeley | map_json),
///   timeout (seconds), stack_reserve (bytes), executable (0 | 1: binaries
///   run on this host).
/// `{src}` expands to all source files as separate arguments.
struct PlatformDescriptor {
  std::string name;
  std::uint64_t program_budget = 0;
  std::uint64_t ram_budget = 0;
  std::vector<std::string> compile_command;
  std::vector<std::string> size_command;
  SizeDialect size_dialect = SizeDialect::berkeley;
  double timeout_s = 60.0;
  std::uint64_t stack_reserve = 128;
  bool executable = false;

  /// Throws ConfigError on zero budgets, a non-positive timeout or missing
  /// placeholders.
  void validate() const;
  std::string to_text() const;
};

PlatformDescriptor parse_platform(std::string_view text);
PlatformDescriptor load_platform(const std::filesystem::path& path);

/// Shipped descriptors: msp430, atmega328, esp32 (cross toolchains expected
/// on PATH) and host (the system C compiler).
std::vector<std::string> builtin_platform_names();
PlatformDescriptor builtin_platform(std::string_view name);

/// A built-in name, or a path to a descriptor file. Unknown names list the
/// known descriptors in the error.
PlatformDescriptor resolve_platform(std::string_view name_or_path);

/// Strict warning profile used by the host descriptor.
std::vector<std::string> host_compile_command();

// ---------------------------------------------------------------------------
// Compilation and measurement

struct CompiledBinary {
  std::filesystem::path path;
  std::filesystem::path workdir;
  std::string diagnostics;
  double seconds = 0.0;
};

struct CompileFailure {
  enum class Kind { diagnostics, timeout, command_not_found };
  Kind kind = Kind::diagnostics;
  std::string message;
  std::string diagnostics;
};

std::string_view to_string(CompileFailure::Kind kind);

using CompileResult = std::variant<CompiledBinary, CompileFailure>;

struct SourceFile {
  std::string name;
  std::string text;
};

/// Writes the files into a fresh unique directory under `parent` (the system
/// temp directory when empty) and runs the platform's compile command.
CompileResult compile(const std::vector<SourceFile>& sources, const PlatformDescriptor& platform,
                      const std::filesystem::path& parent = {});

/// model.c, model.h and harness.c for a generated model.
std::vector<SourceFile> model_sources(const GeneratedSource& gs, const std::string& harness);

struct FootprintMeasurement {
  std::uint64_t program_memory = 0;  // text + data
  std::uint64_t ram = 0;             // data + bss + stack_reserve
  std::map<std::string, std::uint64_t> sections;
  std::string diagnostics;
  double seconds = 0.0;
};

/// Parses size-tool output. berkeley: a header naming text/data/bss columns
/// followed by one row per file (rows are summed), e.g.
///      text    data     bss     dec     hex filename
///      1200      16      64    1280     500 model
/// map_json: {"text": 1200, "data": 16, "bss": 64}.
/// Errors name the offending line.
FootprintMeasurement parse_size_output(std::string_view output, SizeDialect dialect,
                                       std::uint64_t stack_reserve);

FootprintMeasurement measure_footprint(const CompiledBinary& binary, const PlatformDescriptor& platform);

enum class FeasibilityVerdict { fits, program_overflow, ram_overflow, both };

std::string_view to_string(FeasibilityVerdict verdict);

/// A measurement fits when both byte counts are at most the budgets.
FeasibilityVerdict check_budget(const FootprintMeasurement& m, const PlatformDescriptor& platform);

/// Runs a replay binary on CSV rows and parses one prediction per line.
std::vector<double> run_replay(const std::filesystem::path& binary, const std::string& csv,
                               std::size_t expected_rows, double timeout_s = 60.0);

/// Runs a timing binary and returns its nanoseconds per prediction.
std::uint64_t run_timing(const std::filesystem::path& binary, double timeout_s = 60.0);

// ---------------------------------------------------------------------------
// Backends

/// Analytical parameter count of a generated candidate: the parameter count of
/// the IR (ANN weights and biases, SVM weights and biases, exact tree count)
/// plus the normalization constants baked into the source.
MemoryEstimate candidate_estimate(const TrainedModel& model, const GeneratedSource& gs);

using BuildResult = std::variant<FootprintMeasurement, CompileFailure>;

class ToolchainBackend {
 public:
  virtual ~ToolchainBackend() = default;
  virtual std::string name() const = 0;
  /// Platforms with equal keys produce identical measurements for the same
  /// source, so sweeps measure once per key.
  virtual std::string measurement_key(const PlatformDescriptor& platform) const = 0;
  virtual BuildResult build(const TrainedModel& model, const GeneratedSource& gs,
                            const PlatformDescriptor& platform) = 0;
  /// Nanoseconds per prediction, when the backend can execute binaries.
  virtual std::optional<std::uint64_t> time(const GeneratedSource& gs,
                                            const PlatformDescriptor& platform,
                                            std::span<const std::vector<double>> samples) = 0;
};

/// Compiles with the platform's command and measures with its size tool.
/// At most `jobs` compilations run at once across all threads.
class HostToolchain final : public ToolchainBackend {
 public:
  explicit HostToolchain(std::size_t jobs = 1, std::filesystem::path workroot = {});
  ~HostToolchain() override;

  std::string name() const override { return "real"; }
  std::string measurement_key(const PlatformDescriptor& platform) const override;
  BuildResult build(const TrainedModel& model, const GeneratedSource& gs,
                    const PlatformDescriptor& platform) override;
  std::optional<std::uint64_t> time(const GeneratedSource& gs, const PlatformDescriptor& platform,
                                    std::span<const std::vector<double>> samples) override;

  /// Compiles the replay harness and returns a runner bound to the binary.
  ReplayRunner replay_runner(const GeneratedSource& gs, const PlatformDescriptor& platform);

 private:
  struct Limiter;
  std::unique_ptr<Limiter> limiter_;
  std::filesystem::path workroot_;
  CompileResult compile_limited(const std::vector<SourceFile>& sources, const PlatformDescriptor& platform);
};

/// Test double: compiles nothing. Program memory is the candidate's analytical
/// byte count plus `program_offset`; RAM is `ram_offset` plus the platform's
/// stack reserve.
class MockToolchain final : public ToolchainBackend {
 public:
  explicit MockToolchain(std::uint64_t program_offset = 0, std::uint64_t ram_offset = 0)
      : program_offset_(program_offset), ram_offset_(ram_offset) {}

  std::string name() const override { return "mock"; }
  std::string measurement_key(const PlatformDescriptor& platform) const override;
  BuildResult build(const TrainedModel& model, const GeneratedSource& gs,
                    const PlatformDescriptor& platform) override;
  std::optional<std::uint64_t> time(const GeneratedSource&, const PlatformDescriptor&,
                                    std::span<const std::vector<double>>) override {
    return std::nullopt;
  }

 private:
  std::uint64_t program_offset_;
  std::uint64_t ram_offset_;
};

/// Host-compiled stand-in for a target platform: the host descriptor's
/// commands with the target's budgets raised by the footprint of a baseline
/// binary (the replay harness around a constant model), so the budget applies
/// to what the model adds on top of the host runtime.
PlatformDescriptor host_variant(const PlatformDescriptor& target, const PlatformDescriptor& host,
                                const std::filesystem::path& workroot = {});

}  // namespace mcufit
