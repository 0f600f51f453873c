#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "mcufit/analysis.hpp"
#include "mcufit/codegen.hpp"
#include "mcufit/dataset.hpp"
#include "mcufit/error.hpp"
#include "mcufit/estimators.hpp"
#include "mcufit/metrics.hpp"
#include "mcufit/sweetspot.hpp"
#include "mcufit/toolchain.hpp"

namespace fs = std::filesystem;
using namespace mcufit;

namespace {

struct DataArgs {
  std::string regression;
  std::string classification;
  std::string target;

  void add(CLI::App* cmd) {
    cmd->add_option("-r,--regression", regression, "regression dataset (CSV)");
    cmd->add_option("-c,--classification", classification, "classification dataset (CSV)");
    cmd->add_option("--target", target, "target column name (default: last column)");
  }

  Dataset load() const {
    if (regression.empty() == classification.empty()) {
      throw ConfigError("exactly one of -r/--regression or -c/--classification is required");
    }
    const bool reg = !regression.empty();
    std::optional<std::string> column;
    if (!target.empty()) column = target;
    return load_csv(reg ? regression : classification, reg ? Task::regression : Task::classification, column);
  }

  std::string id() const { return fs::path(regression.empty() ? classification : regression).stem().string(); }
};

std::vector<std::string> split_top_level(const std::string& list) {
  std::vector<std::string> out;
  std::string current;
  int depth = 0;
  for (char c : list) {
    if (c == '{') ++depth;
    if (c == '}') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  out.push_back(current);
  return out;
}

int parse_positive(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(what + ": expected a positive integer, got '" + text + "'");
}

void apply_seed(ModelConfig& cfg, std::uint64_t seed) {
  std::visit(
      [&](auto& p) {
        if constexpr (requires { p.seed; }) p.seed = seed;
      },
      cfg.params);
}

// "rf", "ann", "m5", "svm", optionally with shape arguments: "rf{T,D}", "ann{H,N}".
ModelConfig parse_model(const std::string& spec, std::uint64_t seed) {
  const auto brace = spec.find('{');
  const Family family = parse_family(spec.substr(0, brace));
  ModelConfig cfg = ModelConfig::defaults(family);
  if (brace != std::string::npos) {
    if (spec.back() != '}') throw ConfigError("model '" + spec + "': missing closing brace");
    const auto args = split_top_level(spec.substr(brace + 1, spec.size() - brace - 2));
    if (args.size() != 2 || (family != Family::ann && family != Family::rf)) {
      throw ConfigError("model '" + spec + "': only ann{H,N} and rf{T,D} take arguments");
    }
    const int a = parse_positive(args[0], spec), b = parse_positive(args[1], spec);
    cfg = family == Family::ann ? ModelConfig::ann(a, b) : ModelConfig::rf(a, b);
  }
  apply_seed(cfg, seed);
  cfg.validate();
  return cfg;
}

std::vector<ModelConfig> parse_models(const std::string& list, std::uint64_t seed) {
  std::vector<ModelConfig> out;
  for (const auto& item : split_top_level(list)) {
    if (item.empty()) throw ConfigError("empty entry in model list '" + list + "'");
    out.push_back(parse_model(item, seed));
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

struct Common {
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t jobs = 1;

  void add(CLI::App* cmd, bool with_out_required = false) {
    cmd->add_option("--folds", folds, "cross-validation folds")->capture_default_str();
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    auto* o = cmd->add_option("--out", out, "output directory");
    if (with_out_required) o->required();
    cmd->add_option("--jobs", jobs, "parallel workers")->capture_default_str();
  }
};

int run_eval(const DataArgs& data, const Common& common, const std::string& models) {
  const Dataset ds = data.load();
  const auto configs = parse_models(models, common.seed);
  for (const auto& cfg : configs) check_supports(cfg, ds.task());
  const auto result = run_experiment(ds, configs, common.folds, common.seed, data.id());
  std::vector<MetricReport> reports;
  for (const auto& entry : result.entries) {
    if (!entry.report) throw TrainingError(entry.error);
    reports.push_back(*entry.report);
  }
  std::cout << render_table(ds.task(), reports);
  if (!common.out.empty()) write_file(fs::path(common.out) / "experiment.csv", result.to_csv());
  return 0;
}

struct SweepArgs {
  std::string family = "rf";
  std::string grid;
  std::string platforms = "host";
  std::string backend = "real";
  std::uint64_t mock_offset = 0;
  std::uint64_t mock_ram_offset = 0;
  bool host_scaled = false;
  bool timing = false;
};

int run_sweep(const DataArgs& data, const Common& common, const SweepArgs& args) {
  const Dataset ds = data.load();
  ModelConfig base = parse_model(args.family, common.seed);
  CandidateGrid grid = parse_grid(base, args.grid);
  grid.folds = common.folds;
  grid.seed = common.seed;

  std::vector<PlatformDescriptor> platforms;
  for (const auto& name : split_top_level(args.platforms)) platforms.push_back(resolve_platform(name));

  std::unique_ptr<ToolchainBackend> backend;
  if (args.backend == "mock") {
    backend = std::make_unique<MockToolchain>(args.mock_offset, args.mock_ram_offset);
  } else if (args.backend == "real") {
    backend = std::make_unique<HostToolchain>(common.jobs);
    if (args.host_scaled) {
      const auto host = builtin_platform("host");
      for (auto& p : platforms) {
        if (p.name != "host") p = host_variant(p, host);
      }
    }
  } else {
    throw ConfigError("unknown backend '" + args.backend + "' (known: real, mock)");
  }

  SweepOptions opts;
  opts.jobs = common.jobs;
  opts.timing = args.timing;
  const auto result = sweep(ds, grid, platforms, *backend, opts);
  for (const auto& spot : result.spots) {
    std::cout << spot.summary() << "\n";
    for (const auto& line : spot.trace) std::cout << "  " << line << "\n";
  }
  if (!common.out.empty()) write_file(fs::path(common.out) / "sweep.csv", result.to_csv());
  return 0;
}

int run_codegen(const DataArgs& data, const Common& common, const std::string& model, int width,
                bool no_inline, const std::string& harness_mode) {
  const Dataset ds = data.load();
  const auto cfg = parse_model(model, common.seed);
  const auto trained = train(ds, all_rows(ds), cfg);
  CodegenOptions opts;
  opts.scalar_width = width;
  opts.inline_normalization = !no_inline;
  const auto gs = generate(trained, opts);
  HarnessMode mode = HarnessMode::replay;
  if (harness_mode == "timing") mode = HarnessMode::timing;
  else if (harness_mode != "replay") throw ConfigError("unknown harness mode '" + harness_mode + "' (known: replay, timing)");
  std::vector<std::vector<double>> samples;
  for (std::size_t r = 0; r < std::min<std::size_t>(ds.rows(), 16); ++r) {
    samples.emplace_back(ds.row(r).begin(), ds.row(r).end());
  }
  const fs::path dir(common.out);
  write_file(dir / "model.c", gs.source);
  write_file(dir / "model.h", gs.header);
  write_file(dir / "harness.c", generate_harness(gs, mode, samples));
  write_file(dir / "manifest", gs.manifest.to_text());
  write_file(dir / "model.json", to_json(trained));
  std::cout << "wrote " << (dir / "model.c").string() << " (" << gs.manifest.scalar_constants
            << " scalar constants)\n";
  return 0;
}

int run_validate(const DataArgs& data, const Common& common, const std::string& models,
                 const std::string& platform_name, bool cv) {
  const Dataset ds = data.load();
  const auto configs = parse_models(models, common.seed);
  const auto platform = resolve_platform(platform_name);
  HostToolchain toolchain(common.jobs);
  for (const auto& cfg : configs) {
    check_supports(cfg, ds.task());
    const auto trained = train(ds, all_rows(ds), cfg);
    const auto gs = generate(trained);
    const auto report = validate_generated(trained, ds, toolchain.replay_runner(gs, platform));
    std::cout << "model " << cfg.label() << "\n" << report.render();
    if (cv) {
      const auto plan = make_folds(ds, common.folds, common.seed);
      const auto cmp = cross_validate_generated(
          ds, plan, cfg, [&](const GeneratedSource& g) { return toolchain.replay_runner(g, platform); });
      const std::vector<MetricReport> both{cmp.reference, cmp.generated};
      std::cout << "cross-validated (reference, generated):\n" << render_table(ds.task(), both);
    }
    std::cout << "\n";
  }
  return 0;
}

int run_analyze(const DataArgs& data, const Common& common, bool correlation, bool importance,
                const std::string& multi, const std::string& multi_task, const std::string& models) {
  if (!correlation && !importance && multi.empty()) {
    throw ConfigError("analyze needs --correlation, --importance or --multi");
  }
  const fs::path dir(common.out);
  if (correlation || importance) {
    const Dataset ds = data.load();
    if (correlation) {
      const auto m = correlation_matrix(ds);
      write_file(dir / "correlation.csv", m.to_csv());
      std::cout << "wrote " << (dir / "correlation.csv").string() << " (" << m.size() << "x" << m.size()
                << ")\n";
    }
    if (importance) {
      ModelConfig cfg = ModelConfig::defaults(Family::rf);
      apply_seed(cfg, common.seed);
      const auto model = train(ds, all_rows(ds), cfg);
      const auto mdi = feature_importance(model);
      std::string csv = "feature,importance\n";
      for (std::size_t j = 0; j < mdi.size(); ++j) {
        csv += ds.feature_names()[j] + "," + format_double(mdi[j]) + "\n";
        std::printf("%-20s %.4f\n", ds.feature_names()[j].c_str(), mdi[j]);
      }
      write_file(dir / "importance.csv", csv);
    }
  }
  if (!multi.empty()) {
    if (multi_task != "regression" && multi_task != "classification") {
      throw ConfigError("unknown task '" + multi_task + "' (known: regression, classification)");
    }
    const Task task = multi_task == "classification" ? Task::classification : Task::regression;
    std::vector<Dataset> datasets;
    std::vector<std::string> ids;
    for (const auto& path : split_top_level(multi)) {
      datasets.push_back(load_csv(path, task));
      ids.push_back(fs::path(path).stem().string());
    }
    const auto cfg = parse_model(models, common.seed);
    const auto result = run_multi_experiment(datasets, cfg, common.seed, common.folds, ids);
    for (const auto& [metric, values] : result.matrices) {
      const auto file = dir / ("matrix_" + std::string(to_string(metric)) + ".csv");
      write_file(file, result.to_csv(metric));
      std::cout << "wrote " << file.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, evaluate, generate and fit machine-learning models to microcontroller budgets"};
  app.require_subcommand(1);

  DataArgs data;
  Common common;

  std::string models = "rf,m5,ann";
  auto* eval = app.add_subcommand("eval", "cross-validate models and print a metric table");
  data.add(eval);
  common.add(eval);
  eval->add_option("-m,--models", models, "comma-separated models (rf, m5, ann, svm, ann{H,N}, rf{T,D})")
      ->capture_default_str();

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "platform-in-the-loop hyperparameter sweep");
  data.add(sweep_cmd);
  common.add(sweep_cmd);
  sweep_cmd->add_option("-m,--family", sweep_args.family, "model family")->capture_default_str();
  sweep_cmd->add_option("--grid", sweep_args.grid, "axes, e.g. T=1..5,D={2,4,8} or H=1..3,N={4,8,12}");
  sweep_cmd->add_option("--platform", sweep_args.platforms, "platform names or descriptor files")
      ->capture_default_str();
  sweep_cmd->add_option("--backend", sweep_args.backend, "real or mock")->capture_default_str();
  sweep_cmd->add_option("--mock-offset", sweep_args.mock_offset, "mock program-memory offset (bytes)");
  sweep_cmd->add_option("--mock-ram-offset", sweep_args.mock_ram_offset, "mock RAM offset (bytes)");
  sweep_cmd->add_flag("--host-scaled", sweep_args.host_scaled,
                      "compile target platforms with the host compiler against baseline-raised budgets");
  sweep_cmd->add_flag("--timing", sweep_args.timing, "measure nanoseconds per prediction on executable platforms");

  std::string model = "rf";
  int width = 4;
  bool no_inline = false;
  std::string harness_mode = "replay";
  auto* codegen = app.add_subcommand("codegen", "train on all rows and write C sources");
  data.add(codegen);
  common.add(codegen, true);
  codegen->add_option("-m,--model", model, "model")->capture_default_str();
  codegen->add_option("--width", width, "scalar width in bytes (4 or 8)")->capture_default_str();
  codegen->add_flag("--no-inline-normalization", no_inline, "fold input scaling into the weights");
  codegen->add_option("--harness", harness_mode, "replay or timing")->capture_default_str();

  std::string validate_models = "rf";
  std::string platform = "host";
  bool cv = false;
  auto* validate = app.add_subcommand("validate", "replay the dataset through compiled generated models");
  data.add(validate);
  common.add(validate);
  validate->add_option("-m,--models", validate_models, "models")->capture_default_str();
  validate->add_option("--platform", platform, "executable platform")->capture_default_str();
  validate->add_flag("--cv", cv, "also compare cross-validated metrics");

  bool correlation = false, importance = false;
  std::string multi, multi_model = "rf", multi_task = "regression";
  auto* analyze = app.add_subcommand("analyze", "correlation, feature importance and multi-dataset experiments");
  data.add(analyze);
  common.add(analyze, true);
  analyze->add_flag("--correlation", correlation, "write the Pearson correlation matrix");
  analyze->add_flag("--importance", importance, "random-forest MDI feature importance");
  analyze->add_option("--multi", multi, "comma-separated datasets: train on each, test on each");
  analyze->add_option("-m,--model", multi_model, "model for --multi")->capture_default_str();
  analyze->add_option("--task", multi_task, "task of the --multi datasets")->capture_default_str();

  std::string kind = "lte_regression";
  SyntheticSpec spec;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--kind", kind, "lte_regression or vehicle_classification")->capture_default_str();
  synth->add_option("--rows", spec.rows, "rows")->capture_default_str();
  synth->add_option("--noise", spec.noise, "noise scale")->capture_default_str();
  synth->add_option("--seed", synth_seed, "random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n";
    return e.get_exit_code() != 0 ? e.get_exit_code() : 1;
  }

  try {
    if (*eval) return run_eval(data, common, models);
    if (*sweep_cmd) return run_sweep(data, common, sweep_args);
    if (*codegen) return run_codegen(data, common, model, width, no_inline, harness_mode);
    if (*validate) return run_validate(data, common, validate_models, platform, cv);
    if (*analyze) return run_analyze(data, common, correlation, importance, multi, multi_task, multi_model);
    if (*synth) {
      spec.kind = parse_synthetic_kind(kind);
      save_csv(synth_dataset(spec, synth_seed), synth_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}
