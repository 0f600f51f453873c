#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mcufit/error.hpp"
#include "mcufit/toolchain.hpp"

namespace mcufit {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_seconds(const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("timeout: expected seconds, got '" + text + "'");
  return v;
}

bool has_token(const std::vector<std::string>& argv, std::string_view token) {
  return std::find(argv.begin(), argv.end(), token) != argv.end();
}

std::vector<std::string> cross_command(const std::string& compiler, std::vector<std::string> flags) {
  std::vector<std::string> argv{compiler, "-std=c99", "-Os", "-ffp-contract=off"};
  argv.insert(argv.end(), flags.begin(), flags.end());
  argv.insert(argv.end(), {"{src}", "-o", "{out}", "-lm"});
  return argv;
}

}  // namespace

std::string_view to_string(SizeDialect dialect) {
  return dialect == SizeDialect::berkeley ? "berkeley" : "map_json";
}

void PlatformDescriptor::validate() const {
  if (name.empty()) throw ConfigError("platform descriptor without a name");
  const std::string where = "platform '" + name + "': ";
  if (program_budget == 0) throw ConfigError(where + "program budget must be positive");
  if (ram_budget == 0) throw ConfigError(where + "RAM budget must be positive");
  if (!(timeout_s > 0.0)) throw ConfigError(where + "timeout must be positive");
  if (compile_command.empty() || !has_token(compile_command, "{src}") || !has_token(compile_command, "{out}")) {
    throw ConfigError(where + "compile command needs {src} and {out} placeholders");
  }
  if (size_command.empty() || !has_token(size_command, "{bin}")) {
    throw ConfigError(where + "size command needs a {bin} placeholder");
  }
}

std::string PlatformDescriptor::to_text() const {
  std::ostringstream out;
  out << "name = " << name << "\n"
      << "program_budget = " << program_budget << "\n"
      << "ram_budget = " << ram_budget << "\n"
      << "compile = " << join(compile_command) << "\n"
      << "size = " << join(size_command) << "\n"
      << "size_dialect = " << to_string(size_dialect) << "\n"
      << "timeout = " << format_double(timeout_s) << "\n"
      << "stack_reserve = " << stack_reserve << "\n"
      << "executable = " << (executable ? 1 : 0) << "\n";
  return out.str();
}

PlatformDescriptor parse_platform(std::string_view text) {
  PlatformDescriptor p;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("platform line " + std::to_string(lineno) + ": expected key = value: '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") p.name = value;
    else if (key == "program_budget") p.program_budget = parse_u64(value, key);
    else if (key == "ram_budget") p.ram_budget = parse_u64(value, key);
    else if (key == "compile") p.compile_command = split_words(value);
    else if (key == "size") p.size_command = split_words(value);
    else if (key == "size_dialect") {
      if (value == "berkeley") p.size_dialect = SizeDialect::berkeley;
      else if (value == "map_json") p.size_dialect = SizeDialect::map_json;
      else throw ConfigError("size_dialect: unknown dialect '" + value + "' (known: berkeley, map_json)");
    } else if (key == "timeout") p.timeout_s = parse_seconds(value);
    else if (key == "stack_reserve") p.stack_reserve = parse_u64(value, key);
    else if (key == "executable") p.executable = parse_u64(value, key) != 0;
    else throw ConfigError("platform line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  p.validate();
  return p;
}

PlatformDescriptor load_platform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open platform descriptor '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_platform(text.str());
}

std::vector<std::string> host_compile_command() {
  return {"cc",           "-std=c99",         "-Os",      "-Wall",    "-Wextra",
          "-Wpedantic",   "-Wshadow",         "-Wconversion", "-Wdouble-promotion", "-Werror",
          "-ffp-contract=off", "{src}",        "-o",       "{out}",    "-lm"};
}

std::vector<std::string> builtin_platform_names() { return {"msp430", "atmega328", "esp32", "host"}; }

PlatformDescriptor builtin_platform(std::string_view name) {
  PlatformDescriptor p;
  p.name = std::string(name);
  if (name == "msp430") {
    p.program_budget = 16740;
    p.ram_budget = 512;
    p.compile_command = cross_command("msp430-elf-gcc", {"-mmcu=msp430g2553"});
    p.size_command = {"msp430-elf-size", "{bin}"};
  } else if (name == "atmega328") {
    p.program_budget = 32768;
    p.ram_budget = 2048;
    p.compile_command = cross_command("avr-gcc", {"-mmcu=atmega328p"});
    p.size_command = {"avr-size", "{bin}"};
  } else if (name == "esp32") {
    p.program_budget = 4194304;
    p.ram_budget = 544768;
    p.compile_command = cross_command("xtensa-esp32-elf-gcc", {"-mlongcalls"});
    p.size_command = {"xtensa-esp32-elf-size", "{bin}"};
  } else if (name == "host") {
    p.program_budget = std::uint64_t{1} << 30;
    p.ram_budget = std::uint64_t{1} << 30;
    p.compile_command = host_compile_command();
    p.size_command = {"size", "{bin}"};
    p.executable = true;
  } else {
    std::string known;
    for (const auto& n : builtin_platform_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown platform '" + std::string(name) + "' (known: " + known + ")");
  }
  p.validate();
  return p;
}

PlatformDescriptor resolve_platform(std::string_view name_or_path) {
  const auto names = builtin_platform_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_platform(name_or_path);
  const std::filesystem::path path{std::string(name_or_path)};
  if (name_or_path.find('/') != std::string_view::npos || std::filesystem::exists(path)) {
    return load_platform(path);
  }
  return builtin_platform(name_or_path);  // throws, listing the known names
}

FootprintMeasurement parse_size_output(std::string_view output, SizeDialect dialect,
                                       std::uint64_t stack_reserve) {
  FootprintMeasurement m;
  std::uint64_t text = 0, data = 0, bss = 0;
  if (dialect == SizeDialect::map_json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(output);
    } catch (const nlohmann::json::parse_error& e) {
      const auto upto = output.substr(0, std::min(e.byte, output.size()));
      const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
      throw ToolchainError("size output line " + std::to_string(line) + ": malformed JSON");
    }
    auto field = [&](const char* key) -> std::uint64_t {
      if (!j.is_object() || !j.contains(key) || !j[key].is_number_unsigned()) {
        throw ToolchainError(std::string("size output: missing or negative '") + key + "' section");
      }
      return j[key].get<std::uint64_t>();
    };
    text = field("text");
    data = field("data");
    bss = field("bss");
  } else {
    std::istringstream in{std::string(output)};
    std::size_t lineno = 0, rows = 0;
    std::ptrdiff_t col_text = -1, col_data = -1, col_bss = -1;
    bool header = false;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      const auto words = split_words(line);
      if (words.empty()) continue;
      auto fail = [&](const std::string& why) {
        throw ToolchainError("size output line " + std::to_string(lineno) + ": " + why + ": '" + trim(line) + "'");
      };
      if (!header) {
        for (std::size_t i = 0; i < words.size(); ++i) {
          std::string w = words[i];
          std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
          if (w == "text") col_text = static_cast<std::ptrdiff_t>(i);
          if (w == "data") col_data = static_cast<std::ptrdiff_t>(i);
          if (w == "bss") col_bss = static_cast<std::ptrdiff_t>(i);
        }
        if (col_text < 0 || col_data < 0 || col_bss < 0) fail("expected a header with text, data and bss columns");
        header = true;
        continue;
      }
      const auto need = static_cast<std::size_t>(std::max({col_text, col_data, col_bss}));
      if (words.size() <= need) fail("too few columns");
      auto number = [&](std::ptrdiff_t col) {
        const auto& w = words[static_cast<std::size_t>(col)];
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc() || ptr != w.data() + w.size()) fail("non-numeric section size '" + w + "'");
        return v;
      };
      text += number(col_text);
      data += number(col_data);
      bss += number(col_bss);
      ++rows;
    }
    if (!header) throw ToolchainError("size output line 1: empty output");
    if (rows == 0) throw ToolchainError("size output line " + std::to_string(lineno) + ": no section rows");
  }
  m.sections = {{"text", text}, {"data", data}, {"bss", bss}};
  m.program_memory = text + data;
  m.ram = data + bss + stack_reserve;
  return m;
}

FootprintMeasurement measure_footprint(const CompiledBinary& binary, const PlatformDescriptor& platform) {
  std::vector<std::string> argv;
  for (const auto& token : platform.size_command) {
    argv.push_back(token == "{bin}" ? binary.path.string() : token);
  }
  const auto result = run_process(argv, "", platform.timeout_s, binary.workdir);
  if (result.timed_out) throw ToolchainError("size command timed out");
  if (!result.ok()) throw ToolchainError("size command failed: " + trim(result.err));
  FootprintMeasurement m = parse_size_output(result.out, platform.size_dialect, platform.stack_reserve);
  m.diagnostics = binary.diagnostics;
  m.seconds = binary.seconds;
  return m;
}

std::string_view to_string(FeasibilityVerdict verdict) {
  switch (verdict) {
    case FeasibilityVerdict::fits: return "fits";
    case FeasibilityVerdict::program_overflow: return "program_overflow";
    case FeasibilityVerdict::ram_overflow: return "ram_overflow";
    case FeasibilityVerdict::both: return "both";
  }
  return "?";
}

FeasibilityVerdict check_budget(const FootprintMeasurement& m, const PlatformDescriptor& platform) {
  const bool program = m.program_memory > platform.program_budget;
  const bool ram = m.ram > platform.ram_budget;
  if (program && ram) return FeasibilityVerdict::both;
  if (program) return FeasibilityVerdict::program_overflow;
  if (ram) return FeasibilityVerdict::ram_overflow;
  return FeasibilityVerdict::fits;
}

}  // namespace mcufit
