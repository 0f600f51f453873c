#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcufit/error.hpp"
#include "mcufit/model.hpp"
#include "mcufit/random.hpp"

namespace mcufit {
namespace ann {
namespace {

double activate(Activation a, double x) {
  return a == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-x)) : x;
}

// Derivative expressed through the activation output.
double activate_slope(Activation a, double out) {
  return a == Activation::sigmoid ? out * (1.0 - out) : 1.0;
}

// Forward pass for one sample; activations[0] is the input, activations[i+1]
// the output of layer i.
void forward(std::span<const DenseLayer> layers, std::span<const double> x,
             std::vector<std::vector<double>>& activations) {
  activations.resize(layers.size() + 1);
  activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& out = activations[l + 1];
    out.assign(layer.outputs, 0.0);
    for (std::size_t i = 0; i < layer.outputs; ++i) {
      double acc = layer.bias[i];
      for (std::size_t j = 0; j < layer.inputs; ++j) acc += layer.w(i, j) * activations[l][j];
      out[i] = activate(layer.activation, acc);
    }
  }
}

// Loss of one sample and d(loss)/d(output scores).
double output_loss(Task task, std::span<const double> out, double target,
                   std::vector<double>* grad) {
  if (task == Task::regression) {
    const double r = out[0] - target;
    if (grad) grad->assign(1, r);
    return 0.5 * r * r;
  }
  const double peak = *std::max_element(out.begin(), out.end());
  double norm = 0.0;
  for (double s : out) norm += std::exp(s - peak);
  const auto y = static_cast<std::size_t>(target);
  if (grad) {
    grad->resize(out.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
      (*grad)[c] = std::exp(out[c] - peak) / norm - (c == y ? 1.0 : 0.0);
    }
  }
  return std::log(norm) + peak - out[y];
}

std::vector<DenseLayer> zeros_like(std::span<const DenseLayer> layers) {
  std::vector<DenseLayer> g(layers.begin(), layers.end());
  for (auto& layer : g) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return g;
}

// Accumulates the gradient of one sample scaled by `weight` into `grads`.
double accumulate(std::span<const DenseLayer> layers, Task task, std::span<const double> x,
                  double target, double weight, std::vector<DenseLayer>& grads,
                  std::vector<std::vector<double>>& acts, std::vector<double>& delta,
                  std::vector<double>& back) {
  forward(layers, x, acts);
  const double loss = output_loss(task, acts.back(), target, &delta);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    auto& g = grads[l];
    const auto& out = acts[l + 1];
    const auto& in = acts[l];
    for (std::size_t i = 0; i < layer.outputs; ++i) {
      delta[i] *= activate_slope(layer.activation, out[i]);
    }
    back.assign(layer.inputs, 0.0);
    for (std::size_t i = 0; i < layer.outputs; ++i) {
      const double di = delta[i] * weight;
      g.bias[i] += di;
      for (std::size_t j = 0; j < layer.inputs; ++j) {
        g.w(i, j) += di * in[j];
        back[j] += layer.w(i, j) * delta[i];
      }
    }
    delta.swap(back);
  }
  return loss;
}

}  // namespace

double batch_loss(std::span<const DenseLayer> layers, Task task, std::span<const double> inputs,
                  std::span<const double> targets) {
  const std::size_t d = layers.front().inputs;
  std::vector<std::vector<double>> acts;
  double total = 0.0;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    forward(layers, inputs.subspan(s * d, d), acts);
    total += output_loss(task, acts.back(), targets[s], nullptr);
  }
  return total / static_cast<double>(targets.size());
}

std::vector<DenseLayer> batch_gradient(std::span<const DenseLayer> layers, Task task,
                                       std::span<const double> inputs,
                                       std::span<const double> targets) {
  const std::size_t d = layers.front().inputs;
  auto grads = zeros_like(layers);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, back;
  const double weight = 1.0 / static_cast<double>(targets.size());
  for (std::size_t s = 0; s < targets.size(); ++s) {
    accumulate(layers, task, inputs.subspan(s * d, d), targets[s], weight, grads, acts, delta, back);
  }
  return grads;
}

}  // namespace ann

TrainedModel train_ann(const Dataset& ds, std::span<const std::size_t> rows, const AnnParams& p) {
  ModelConfig{p}.validate();
  if (rows.empty()) throw TrainingError("ann: empty training set");
  if (rows.size() < 2) throw TrainingError("ann: needs at least two training rows");

  const std::size_t d = ds.features();
  const Task task = ds.task();
  AnnModel net;
  net.input = fit_normalization(ds, rows);
  if (task == Task::regression) {
    std::tie(net.target_mean, net.target_scale) = target_moments(ds, rows);
  }

  // Standardized copies of the training rows.
  std::vector<double> inputs(rows.size() * d);
  std::vector<double> targets(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    net.input.apply(ds.row(rows[i]), std::span(inputs).subspan(i * d, d));
    const double y = ds.target(rows[i]);
    targets[i] = task == Task::regression ? (y - net.target_mean) / net.target_scale : y;
  }

  Rng rng(p.seed);
  const std::size_t outputs = task == Task::regression ? 1u : static_cast<std::size_t>(ds.classes());
  std::size_t fan_in = d;
  for (int l = 0; l <= p.hidden_layers; ++l) {
    const bool last = l == p.hidden_layers;
    DenseLayer layer;
    layer.inputs = fan_in;
    layer.outputs = last ? outputs : static_cast<std::size_t>(p.neurons);
    layer.activation = last ? Activation::linear : p.hidden_activation;
    const double range = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.weights.resize(layer.inputs * layer.outputs);
    for (double& w : layer.weights) w = rng.uniform(-range, range);
    layer.bias.assign(layer.outputs, 0.0);
    net.layers.push_back(std::move(layer));
    fan_in = net.layers.back().outputs;
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = net.layers;
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, back;
  const auto batch = static_cast<std::size_t>(p.batch_size);
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      for (auto& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t i = order[s];
        epoch_loss += ann::accumulate(net.layers, task, std::span(inputs).subspan(i * d, d),
                                      targets[i], weight, grads, acts, delta, back);
      }
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t k = 0; k < layer.weights.size(); ++k) {
          layer.weights[k] -= p.learning_rate * grads[l].weights[k];
        }
        for (std::size_t k = 0; k < layer.bias.size(); ++k) {
          layer.bias[k] -= p.learning_rate * grads[l].bias[k];
        }
      }
    }
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("ann: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
  }

  TrainedModel model;
  model.task = task;
  model.features = d;
  model.classes = task == Task::classification ? ds.classes() : 0;
  model.feature_names = ds.feature_names();
  model.class_labels = ds.class_labels();
  for (std::size_t j = 0; j < d; ++j) {
    if (net.input.constant[j]) {
      model.notes.push_back("constant feature '" + ds.feature_names()[j] + "' uses divisor 1");
    }
  }
  model.body = std::move(net);
  return model;
}

}  // namespace mcufit
