#include "oracles.hpp"

#include <stdio.h>
#include <stdlib.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mcufit/toolchain.hpp"

namespace oracle {

using ld = long double;

double r2(const std::vector<double>& pred, const std::vector<double>& truth) {
  ld mean = 0;
  for (double t : truth) mean += t;
  mean /= static_cast<ld>(truth.size());
  ld ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (static_cast<ld>(truth[i]) - pred[i]) * (static_cast<ld>(truth[i]) - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return static_cast<double>(1 - ss_res / ss_tot);
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  ld s = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::fabs(static_cast<ld>(pred[i]) - truth[i]);
  return static_cast<double>(s / static_cast<ld>(truth.size()));
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  ld s = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const ld e = static_cast<ld>(pred[i]) - truth[i];
    s += e * e;
  }
  return static_cast<double>(std::sqrt(s / static_cast<ld>(truth.size())));
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(static_cast<ld>(hits) / static_cast<ld>(truth.size()));
}

Prf macro_prf(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes) {
  std::vector<std::vector<long>> cm(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm[truth[i]][pred[i]];
  ld p_sum = 0, r_sum = 0, f_sum = 0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    long row = 0, col = 0;
    for (int j = 0; j < n_classes; ++j) {
      row += cm[c][j];
      col += cm[j][c];
    }
    if (row == 0 && col == 0) continue;
    ++present;
    const ld p = col == 0 ? 0 : static_cast<ld>(cm[c][c]) / col;
    const ld r = row == 0 ? 0 : static_cast<ld>(cm[c][c]) / row;
    p_sum += p;
    r_sum += r;
    f_sum += (p + r) == 0 ? 0 : 2 * p * r / (p + r);
  }
  return {static_cast<double>(p_sum / present), static_cast<double>(r_sum / present),
          static_cast<double>(f_sum / present)};
}

std::size_t ann_parameters(const std::vector<std::size_t>& layers) {
  std::size_t weights = 0, biases = 0;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    weights += layers[i] * layers[i - 1];
    biases += layers[i];
  }
  return weights + biases;
}

std::size_t count_table_literals(const std::string& src) {
  std::size_t count = 0, pos = 0;
  while ((pos = src.find("static const", pos)) != std::string::npos) {
    const auto eq = src.find('=', pos);
    const auto semi = src.find(';', pos);
    if (eq == std::string::npos || semi < eq) {
      pos = semi;
      continue;
    }
    const std::string init = src.substr(eq + 1, semi - eq - 1);
    // A literal is a maximal run of number characters that starts with a
    // digit, '.', or a sign directly followed by one.
    std::size_t i = 0;
    while (i < init.size()) {
      const char c = init[i];
      const bool starts = std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                          ((c == '-' || c == '+') && i + 1 < init.size() &&
                           (std::isdigit(static_cast<unsigned char>(init[i + 1])) || init[i + 1] == '.'));
      if (!starts) {
        ++i;
        continue;
      }
      ++count;
      ++i;
      while (i < init.size()) {
        const char n = init[i];
        if (std::isalnum(static_cast<unsigned char>(n)) || n == '.') {
          ++i;
        } else if ((n == '-' || n == '+') && (init[i - 1] == 'e' || init[i - 1] == 'E')) {
          ++i;
        } else {
          break;
        }
      }
    }
    pos = semi;
  }
  return count;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const ld n = static_cast<ld>(x.size());
  ld mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  ld sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::vector<double> numeric_gradient(const std::vector<double>& w, double h,
                                     const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> g(w.size());
  auto probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = f(probe);
    probe[i] = w[i] - h;
    const double down = f(probe);
    probe[i] = w[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

namespace {

std::vector<std::vector<std::string>> csv_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      fields.push_back(field);
      field.clear();
      records.push_back(fields);
      fields.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any || !fields.empty()) {
    fields.push_back(field);
    records.push_back(fields);
  }
  return records;
}

}  // namespace

std::vector<std::map<std::string, std::string>> read_csv(const std::string& text) {
  auto records = csv_records(text);
  std::vector<std::map<std::string, std::string>> rows;
  if (records.empty()) return rows;
  const auto header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) throw std::runtime_error("ragged CSV record");
    std::map<std::string, std::string> row;
    for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = records[r][c];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<std::size_t> brute_force_winner(const std::vector<std::map<std::string, std::string>>& rows,
                                              const std::string& platform) {
  struct Cand {
    std::size_t index;
    double quality;
    unsigned long long program, ram;
  };
  std::vector<Cand> feasible;
  for (const auto& row : rows) {
    if (row.at("platform") != platform) continue;
    if (row.at("program_bytes").empty() || row.at("quality_mean").empty()) continue;
    const auto program = std::stoull(row.at("program_bytes"));
    const auto ram = std::stoull(row.at("ram_bytes"));
    if (program > std::stoull(row.at("program_budget")) || ram > std::stoull(row.at("ram_budget"))) continue;
    feasible.push_back({std::stoul(row.at("index")), std::strtod(row.at("quality_mean").c_str(), nullptr),
                        program, ram});
  }
  if (feasible.empty()) return std::nullopt;
  // Exhaustive pairwise comparison: a winner beats or ties every other candidate.
  for (const auto& a : feasible) {
    bool best = true;
    for (const auto& b : feasible) {
      if (&a == &b) continue;
      const bool b_better = b.quality > a.quality ||
                            (b.quality == a.quality &&
                             (b.program < a.program ||
                              (b.program == a.program &&
                               (b.ram < a.ram || (b.ram == a.ram && b.index < a.index)))));
      if (b_better) {
        best = false;
        break;
      }
    }
    if (best) return a.index;
  }
  return std::nullopt;
}

mcufit::Dataset single_informative_classification(std::size_t rows, std::size_t noise_features,
                                                  std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t d = noise_features + 1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  std::vector<double> values, target;
  for (std::size_t i = 0; i < rows; ++i) {
    const double x0 = u(gen);
    values.push_back(x0);
    for (std::size_t j = 1; j < d; ++j) values.push_back(u(gen));
    target.push_back(x0 > 0.0 ? 1.0 : 0.0);
  }
  return mcufit::Dataset(names, values, target, mcufit::Task::classification, {"neg", "pos"});
}

mcufit::Dataset single_informative_regression(std::size_t rows, std::size_t noise_features,
                                              std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t d = noise_features + 1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  std::vector<double> values, target;
  for (std::size_t i = 0; i < rows; ++i) {
    const double x0 = u(gen);
    values.push_back(x0);
    for (std::size_t j = 1; j < d; ++j) values.push_back(u(gen));
    target.push_back(x0 > 0.0 ? 5.0 : -5.0);
  }
  return mcufit::Dataset(names, values, target, mcufit::Task::regression);
}

mcufit::Dataset linear_regression(std::size_t rows, const std::vector<double>& coefficients,
                                  double intercept, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < coefficients.size(); ++j) names.push_back("x" + std::to_string(j));
  std::vector<double> values, target;
  for (std::size_t i = 0; i < rows; ++i) {
    double y = intercept;
    for (double c : coefficients) {
      const double x = u(gen);
      values.push_back(x);
      y += c * x;
    }
    target.push_back(y);
  }
  return mcufit::Dataset(names, values, target, mcufit::Task::regression);
}

mcufit::Dataset separable_classes(std::size_t rows_per_class, int classes, std::size_t features,
                                  std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  std::vector<std::string> names, labels;
  for (std::size_t j = 0; j < features; ++j) names.push_back("f" + std::to_string(j));
  for (int c = 0; c < classes; ++c) labels.push_back("c" + std::to_string(c));
  std::vector<double> values, target;
  for (std::size_t i = 0; i < rows_per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      // Class c sits around 3c on the first feature; the rest is noise.
      values.push_back(3.0 * c + u(gen));
      for (std::size_t j = 1; j < features; ++j) values.push_back(u(gen));
      target.push_back(c);
    }
  }
  return mcufit::Dataset(names, values, target, mcufit::Task::classification, labels);
}

bool have_host_compiler() { return mcufit::find_executable("cc").has_value(); }

mcufit::ReplayRunner host_runner(const mcufit::GeneratedSource& gs) {
  static mcufit::HostToolchain toolchain;
  return toolchain.replay_runner(gs, mcufit::builtin_platform("host"));
}

Shell run_shell(const std::string& command) {
  const auto dir = temp_dir("shell");
  const std::string err_path = dir + "/stderr";
  Shell result;
  FILE* pipe = ::popen((command + " 2>" + err_path).c_str(), "r");
  if (pipe == nullptr) return result;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.out.append(buf, n);
  const int status = ::pclose(pipe);
  result.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.err = read_file(err_path);
  std::filesystem::remove_all(dir);
  return result;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  std::string tmpl = (std::filesystem::temp_directory_path() / ("mcufit-test-" + tag + "-XXXXXX")).string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  return tmpl;
}

}  // namespace oracle
