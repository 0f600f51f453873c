#include <string_view>

#include "mcufit/codegen.hpp"
#include "mcufit/error.hpp"

namespace mcufit {
namespace {

// Splice points: {{MAX_LINE}}.
constexpr std::string_view kReplayTemplate = R"(/* Replay harness: CSV feature rows on stdin, one prediction per line on stdout.
 * Exit codes: 0 success, 1 usage, 2 input format error. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "model.h"

#define MAX_LINE {{MAX_LINE}}

/* Returns the number of fields read, MODEL_NUM_FEATURES + 1 when there are
 * more, or -1 when a field is not a finite decimal number. */
static int parse_row(const char *line, model_real_t row[MODEL_NUM_FEATURES]) {
  const char *p = line;
  int n = 0;
  for (;;) {
    char *end;
    double v;
    if (n == MODEL_NUM_FEATURES) return n + 1;
    v = strtod(p, &end);
    if (end == p || !isfinite(v)) return -1;
    while (*end == ' ' || *end == '\t') ++end;
    row[n++] = (model_real_t)v;
    if (*end == ',') {
      p = end + 1;
      continue;
    }
    if (*end == '\0' || *end == '\n' || *end == '\r') return n;
    return -1;
  }
}

int main(int argc, char **argv) {
  static char line[MAX_LINE];
  model_real_t row[MODEL_NUM_FEATURES];
  long lineno = 0;
  (void)argv;
  if (argc != 1) {
    fprintf(stderr, "usage: replay < rows.csv\n");
    return 1;
  }
  while (fgets(line, sizeof line, stdin) != NULL) {
    size_t len = strlen(line);
    int n;
    ++lineno;
    if (len == sizeof line - 1 && line[len - 1] != '\n') {
      fprintf(stderr, "line %ld: longer than %d bytes\n", lineno, MAX_LINE - 2);
      return 2;
    }
    if (line[0] == '\n' || line[0] == '\r' || line[0] == '\0') continue;
    n = parse_row(line, row);
    if (n < 0 && lineno == 1) continue; /* header */
    if (n < 0) {
      fprintf(stderr, "line %ld: non-numeric field\n", lineno);
      return 2;
    }
    if (n != MODEL_NUM_FEATURES) {
      fprintf(stderr, "line %ld: expected %d fields, got %s%d\n", lineno, MODEL_NUM_FEATURES,
              n > MODEL_NUM_FEATURES ? "more than " : "", n > MODEL_NUM_FEATURES ? n - 1 : n);
      return 2;
    }
#if MODEL_IS_CLASSIFIER
    printf("%d\n", predict(row));
#elif MODEL_SCALAR_WIDTH == 4
    printf("%.9g\n", (double)predict(row));
#else
    printf("%.17g\n", (double)predict(row));
#endif
  }
  return 0;
}
)";

// Splice points: {{PREDICTIONS}}, {{SAMPLE_ROWS}}, {{SAMPLES}}.
constexpr std::string_view kTimingTemplate = R"(/* Timing harness: runs a fixed number of predictions over a compiled-in
 * input block and reports the mean cost per prediction. */
#define _POSIX_C_SOURCE 199309L
#include <stdio.h>
#include <time.h>

#include "model.h"

#define PREDICTIONS {{PREDICTIONS}}
#define SAMPLE_ROWS {{SAMPLE_ROWS}}

static const model_real_t SAMPLES[SAMPLE_ROWS][MODEL_NUM_FEATURES] = {
{{SAMPLES}}};

int main(int argc, char **argv) {
  struct timespec start;
  struct timespec stop;
  double checksum = 0.0;
  long elapsed;
  long per;
  int k;
  (void)argv;
  if (argc != 1) {
    fprintf(stderr, "usage: timing\n");
    return 1;
  }
  clock_gettime(CLOCK_MONOTONIC, &start);
  for (k = 0; k < PREDICTIONS; ++k) {
    checksum += (double)predict(SAMPLES[k % SAMPLE_ROWS]);
  }
  clock_gettime(CLOCK_MONOTONIC, &stop);
  elapsed = (long)(stop.tv_sec - start.tv_sec) * 1000000000L + (long)(stop.tv_nsec - start.tv_nsec);
  per = (elapsed + PREDICTIONS - 1) / PREDICTIONS;
  if (per < 1) per = 1;
  printf("ns_per_pred=%ld\npredictions=%d\nchecksum=%.9g\n", per, PREDICTIONS, checksum);
  return 0;
}
)";

std::string splice(std::string_view tmpl, std::string_view key, const std::string& value) {
  std::string out(tmpl);
  const std::string marker = "{{" + std::string(key) + "}}";
  for (auto pos = out.find(marker); pos != std::string::npos; pos = out.find(marker, pos + value.size())) {
    out.replace(pos, marker.size(), value);
  }
  return out;
}

constexpr std::size_t kMaxTimingSamples = 16;

}  // namespace

std::string generate_harness(const GeneratedSource& gs, HarnessMode mode,
                             std::span<const std::vector<double>> samples) {
  const std::size_t d = gs.manifest.features;
  if (d == 0) throw CodegenError("IR invariant violation: feature count 0");
  if (mode == HarnessMode::replay) {
    return splice(kReplayTemplate, "MAX_LINE", std::to_string(kReplayMaxLine));
  }
  std::vector<std::vector<double>> rows(samples.begin(),
                                        samples.begin() + static_cast<std::ptrdiff_t>(
                                                              std::min(samples.size(), kMaxTimingSamples)));
  if (rows.empty()) rows.emplace_back(d, 0.0);
  std::string block;
  for (const auto& row : rows) {
    if (row.size() != d) throw CodegenError("timing sample width differs from the model's feature count");
    block += "  {";
    for (std::size_t j = 0; j < d; ++j) {
      block += c_literal(row[j], gs.manifest.scalar_width);
      if (j + 1 < d) block += ", ";
    }
    block += "},\n";
  }
  std::string out = splice(kTimingTemplate, "PREDICTIONS", std::to_string(kTimingPredictions));
  out = splice(out, "SAMPLE_ROWS", std::to_string(rows.size()));
  return splice(out, "SAMPLES", block);
}

}  // namespace mcufit
