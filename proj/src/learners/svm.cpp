#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "linear.hpp"
#include "mcufit/error.hpp"
#include "mcufit/model.hpp"
#include "mcufit/random.hpp"

namespace mcufit {
namespace {

// Binary L2-regularized, squared-hinge (L2-loss) linear SVM trained by dual
// coordinate descent: one dual variable is optimized in closed form per step,
// the single-variable analogue of SMO for the bias-augmented linear problem.
// Samples are standardized and augmented with a constant 1 feature whose
// weight is the bias.
Hyperplane train_pair(std::span<const double> z, std::size_t d, std::span<const double> labels,
                      const SvmParams& p, Rng& rng) {
  const std::size_t n = labels.size();
  const std::size_t width = d + 1;
  const double diag = 1.0 / (2.0 * p.regularization);
  std::vector<double> w(width, 0.0);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 1.0;
    for (std::size_t j = 0; j < d; ++j) sq += z[i * d + j] * z[i * d + j];
    qd[i] = sq + diag;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int pass = 0; pass < p.max_passes; ++pass) {
    rng.shuffle(std::span(order));
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
      const double y = labels[i];
      const auto xi = z.subspan(i * d, d);
      double margin = w[d];
      for (std::size_t j = 0; j < d; ++j) margin += w[j] * xi[j];
      const double g = y * margin - 1.0 + diag * alpha[i];
      const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) <= 1e-12) continue;
      const double old = alpha[i];
      alpha[i] = std::max(old - g / qd[i], 0.0);
      const double step = (alpha[i] - old) * y;
      for (std::size_t j = 0; j < d; ++j) w[j] += step * xi[j];
      w[d] += step;
    }
    if (pg_max - pg_min <= p.tolerance) break;
  }
  Hyperplane plane;
  plane.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  plane.bias = w[d];
  return plane;
}

}  // namespace

TrainedModel train_svm(const Dataset& ds, std::span<const std::size_t> rows, const SvmParams& p) {
  ModelConfig{p}.validate();
  if (rows.empty()) throw TrainingError("svm: empty training set");
  const std::size_t d = ds.features();

  TrainedModel model;
  model.task = ds.task();
  model.features = d;
  model.feature_names = ds.feature_names();
  model.class_labels = ds.class_labels();
  SvmModel svm;
  svm.input = fit_normalization(ds, rows);

  if (ds.task() == Task::regression) {
    const auto fit = linear::least_squares(ds, rows, &svm.input);
    Hyperplane plane;
    plane.weights = fit.coefficients;
    plane.bias = fit.intercept;
    svm.planes.push_back(std::move(plane));
    model.notes.push_back("svm: regression uses a least-squares linear model");
    if (fit.ridge) model.notes.push_back("svm: ridge fallback used for a rank-deficient system");
    model.body = std::move(svm);
    return model;
  }

  const int n = ds.classes();
  model.classes = n;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n));
  for (std::size_t r : rows) by_class[static_cast<std::size_t>(ds.label(r))].push_back(r);

  std::vector<double> z;
  std::vector<double> labels;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const auto& pos = by_class[static_cast<std::size_t>(a)];
      const auto& neg = by_class[static_cast<std::size_t>(b)];
      Hyperplane plane;
      if (pos.empty() || neg.empty()) {
        // Only one side is represented: always vote for the present class.
        plane.weights.assign(d, 0.0);
        plane.bias = neg.empty() ? 1.0 : -1.0;
        model.notes.push_back("svm: pair (" + std::to_string(a) + "," + std::to_string(b) +
                              ") has a single class in training; constant vote");
      } else {
        z.assign((pos.size() + neg.size()) * d, 0.0);
        labels.clear();
        std::size_t i = 0;
        for (const auto* group : {&pos, &neg}) {
          for (std::size_t r : *group) {
            svm.input.apply(ds.row(r), std::span(z).subspan(i * d, d));
            labels.push_back(group == &pos ? 1.0 : -1.0);
            ++i;
          }
        }
        Rng pair_rng(derive_seed(p.seed, static_cast<std::uint64_t>(a * n + b)));
        plane = train_pair(z, d, labels, p, pair_rng);
      }
      plane.positive = a;
      plane.negative = b;
      svm.planes.push_back(std::move(plane));
    }
  }
  model.body = std::move(svm);
  return model;
}

}  // namespace mcufit
