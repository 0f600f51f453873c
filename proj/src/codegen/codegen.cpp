#include <algorithm>
#include <charconv>
#include <cmath>

#include "mcufit/codegen.hpp"
#include "mcufit/error.hpp"

namespace mcufit {

std::string c_literal(double value, int scalar_width) {
  char buf[64];
  std::to_chars_result res;
  if (scalar_width == 4) {
    const auto f = static_cast<float>(value);
    if (!std::isfinite(f)) throw CodegenError("constant " + format_double(value) + " overflows a 32-bit float");
    res = std::to_chars(buf, buf + sizeof buf, f);
  } else {
    if (!std::isfinite(value)) throw CodegenError("non-finite constant");
    res = std::to_chars(buf, buf + sizeof buf, value);
  }
  std::string text(buf, res.ptr);
  if (text.find_first_of(".e") == std::string::npos) text += ".0";
  if (scalar_width == 4) text += 'f';
  return text;
}

Precision precision_for(const CodegenOptions& opts) {
  return opts.scalar_width == 4 ? Precision::f32 : Precision::f64;
}

TrainedModel deployed_model(const TrainedModel& model, const CodegenOptions& opts) {
  return opts.inline_normalization ? model : fold_normalization(model);
}

std::string Manifest::to_text() const {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  kv("family", std::string(to_string(family)));
  kv("task", std::string(to_string(task)));
  kv("features", std::to_string(features));
  kv("classes", std::to_string(classes));
  kv("scalar_width", std::to_string(scalar_width));
  kv("normalization_inline", normalization_inline ? "1" : "0");
  kv("weight_constants", std::to_string(weight_constants));
  kv("bias_constants", std::to_string(bias_constants));
  kv("normalization_constants", std::to_string(normalization_constants));
  kv("split_constants", std::to_string(split_constants));
  kv("leaf_constants", std::to_string(leaf_constants));
  kv("scalar_constants", std::to_string(scalar_constants));
  for (std::size_t i = 0; i < feature_names.size(); ++i) kv("feature." + std::to_string(i), feature_names[i]);
  for (std::size_t i = 0; i < class_labels.size(); ++i) kv("class." + std::to_string(i), class_labels[i]);
  return out;
}

namespace {

class Writer {
 public:
  void line(const std::string& text) {
    if (!text.empty()) out_.append(static_cast<std::size_t>(indent_) * 2, ' ');
    out_ += text;
    out_ += '\n';
  }
  void open(const std::string& text) {
    line(text);
    ++indent_;
  }
  void reopen(const std::string& text) {
    --indent_;
    line(text);
    ++indent_;
  }
  void close(const std::string& text = "}") {
    --indent_;
    line(text);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
  int indent_ = 0;
};

std::string idx(std::size_t i) { return std::to_string(i); }

class Emitter {
 public:
  Emitter(const TrainedModel& model, const CodegenOptions& opts) : model_(model), opts_(opts) {
    if (opts.scalar_width != 4 && opts.scalar_width != 8) {
      throw CodegenError("scalar width must be 4 or 8 bytes");
    }
    manifest_.family = model.family();
    manifest_.task = model.task;
    manifest_.features = model.features;
    manifest_.classes = model.classes;
    manifest_.feature_names = model.feature_names;
    manifest_.class_labels = model.class_labels;
    manifest_.scalar_width = opts.scalar_width;
    manifest_.normalization_inline = false;
  }

  bool uses_exp() const {
    const auto* ann = std::get_if<AnnModel>(&model_.body);
    if (ann == nullptr) return false;
    return std::any_of(ann->layers.begin(), ann->layers.end(),
                       [](const DenseLayer& l) { return l.activation == Activation::sigmoid; });
  }

  GeneratedSource run() {
    out_.line("/* Generated model: " + std::string(to_string(model_.family())) + ", " + d() +
              " features, " +
              (classifier() ? idx(static_cast<std::size_t>(model_.classes)) + " classes"
                            : std::string("regression")) +
              ". */");
    if (uses_exp()) out_.line("#include <math.h>");
    out_.line("#include \"model.h\"");
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, AnnModel>) {
            emit_ann(m);
          } else if constexpr (std::is_same_v<M, ForestModel>) {
            emit_forest(m);
          } else if constexpr (std::is_same_v<M, M5Model>) {
            emit_trees({&m.tree, 1});
            out_.line("");
            out_.open(entry_signature() + " {");
            out_.line("return tree_0(features);");
            out_.close();
          } else {
            emit_svm(m);
          }
        },
        model_.body);
    manifest_.scalar_constants = manifest_.weight_constants + manifest_.bias_constants +
                                 manifest_.normalization_constants + manifest_.split_constants +
                                 manifest_.leaf_constants;
    return {out_.take(), header(), manifest_};
  }

 private:
  bool classifier() const { return model_.task == Task::classification; }
  std::string d() const { return idx(model_.features); }
  std::string lit(double v) const { return c_literal(v, opts_.scalar_width); }

  std::string entry_signature() const {
    return std::string(classifier() ? "int" : "model_real_t") +
           " predict(const model_real_t features[MODEL_NUM_FEATURES])";
  }

  std::string header() const {
    Writer h;
    h.line("#ifndef MODEL_H");
    h.line("#define MODEL_H");
    h.line("");
    h.line("#define MODEL_NUM_FEATURES " + d());
    h.line("#define MODEL_NUM_CLASSES " + idx(static_cast<std::size_t>(model_.classes)));
    h.line("#define MODEL_IS_CLASSIFIER " + std::string(classifier() ? "1" : "0"));
    h.line("#define MODEL_SCALAR_WIDTH " + std::to_string(opts_.scalar_width));
    h.line("");
    h.line("typedef " + std::string(opts_.scalar_width == 4 ? "float" : "double") + " model_real_t;");
    h.line("");
    h.line(entry_signature() + ";");
    h.line("");
    h.line("#endif");
    return h.take();
  }

  void values(std::span<const double> v) {
    constexpr std::size_t per_line = 6;
    for (std::size_t i = 0; i < v.size(); i += per_line) {
      std::string text;
      const std::size_t end = std::min(v.size(), i + per_line);
      for (std::size_t j = i; j < end; ++j) {
        text += lit(v[j]);
        if (j + 1 < v.size()) text += j + 1 < end ? ", " : ",";
      }
      out_.line(text);
    }
  }

  void table(const std::string& name, std::span<const double> v, std::size_t& counter) {
    out_.open("static const model_real_t " + name + "[" + idx(v.size()) + "] = {");
    values(v);
    out_.close("};");
    counter += v.size();
  }

  void matrix(const std::string& name, std::span<const double> v, std::size_t rows, std::size_t cols,
              std::size_t& counter) {
    out_.open("static const model_real_t " + name + "[" + idx(rows) + "][" + idx(cols) + "] = {");
    for (std::size_t r = 0; r < rows; ++r) {
      out_.open("{");
      values(v.subspan(r * cols, cols));
      out_.close(r + 1 < rows ? "}," : "}");
    }
    out_.close("};");
    counter += v.size();
  }

  void scalar(const std::string& name, double v, std::size_t& counter) {
    out_.line("static const model_real_t " + name + " = " + lit(v) + ";");
    ++counter;
  }

  void input_normalization(const Normalization& norm) {
    if (!opts_.inline_normalization) return;
    manifest_.normalization_inline = true;
    out_.line("");
    table("IN_MEAN", norm.mean, manifest_.normalization_constants);
    table("IN_SCALE", norm.scale, manifest_.normalization_constants);
  }

  void argmax(const std::string& array, std::size_t n) {
    out_.line("best = 0;");
    out_.open("for (i = 1; i < " + idx(n) + "; ++i) {");
    out_.line("if (" + array + "[i] > " + array + "[best]) best = i;");
    out_.close();
    out_.line("return best;");
  }

  void emit_ann(const AnnModel& net) {
    input_normalization(net.input);
    const bool out_norm = opts_.inline_normalization && !classifier();
    if (out_norm) {
      scalar("OUT_SCALE", net.target_scale, manifest_.normalization_constants);
      scalar("OUT_MEAN", net.target_mean, manifest_.normalization_constants);
    }
    bool uses_sigmoid = false;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      out_.line("");
      matrix("L" + idx(l + 1) + "_W", layer.weights, layer.outputs, layer.inputs,
             manifest_.weight_constants);
      table("L" + idx(l + 1) + "_B", layer.bias, manifest_.bias_constants);
      uses_sigmoid = uses_sigmoid || layer.activation == Activation::sigmoid;
    }
    if (uses_sigmoid) {
      const std::string one = lit(1.0);
      out_.line("");
      out_.open("static model_real_t sigmoid(model_real_t v) {");
      out_.line("return " + one + " / (" + one + " + " + (opts_.scalar_width == 4 ? "expf" : "exp") +
                "(-v));");
      out_.close();
    }

    // Activations alternate between two stack buffers.
    std::vector<std::string> inputs, outputs;
    std::size_t used[2] = {0, 0};
    std::string current = "features";
    int next = 0;
    if (opts_.inline_normalization) {
      current = "buf0";
      used[0] = model_.features;
      next = 1;
    }
    for (const auto& layer : net.layers) {
      inputs.push_back(current);
      current = "buf" + std::to_string(next);
      used[next] = std::max(used[next], layer.outputs);
      outputs.push_back(current);
      next = 1 - next;
    }

    out_.line("");
    out_.open(entry_signature() + " {");
    for (int b = 0; b < 2; ++b) {
      if (used[b]) out_.line("model_real_t buf" + std::to_string(b) + "[" + idx(used[b]) + "];");
    }
    out_.line("int i;");
    out_.line("int j;");
    if (classifier()) out_.line("int best;");
    if (opts_.inline_normalization) {
      out_.open("for (j = 0; j < " + d() + "; ++j) {");
      out_.line("buf0[j] = (features[j] - IN_MEAN[j]) / IN_SCALE[j];");
      out_.close();
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      const std::string name = "L" + idx(l + 1);
      out_.open("for (i = 0; i < " + idx(layer.outputs) + "; ++i) {");
      out_.line("model_real_t acc = " + name + "_B[i];");
      out_.open("for (j = 0; j < " + idx(layer.inputs) + "; ++j) {");
      out_.line("acc += " + name + "_W[i][j] * " + inputs[l] + "[j];");
      out_.close();
      out_.line(outputs[l] + "[i] = " +
                (layer.activation == Activation::sigmoid ? "sigmoid(acc)" : "acc") + ";");
      out_.close();
    }
    const std::string& last = outputs.back();
    if (classifier()) {
      argmax(last, net.layers.back().outputs);
    } else if (out_norm) {
      out_.line("return " + last + "[0] * OUT_SCALE + OUT_MEAN;");
    } else {
      out_.line("return " + last + "[0];");
    }
    out_.close();
  }

  void leaf(const Tree& tree, const TreeNode& node) {
    switch (tree.leaf_kind) {
      case LeafKind::class_vote:
        out_.line("return " + std::to_string(static_cast<int>(node.value)) + ";");
        ++manifest_.leaf_constants;
        break;
      case LeafKind::constant:
        out_.line("return " + lit(node.value) + ";");
        ++manifest_.leaf_constants;
        break;
      case LeafKind::linear: {
        std::string expr = lit(node.value);
        for (std::size_t j = 0; j < node.coefficients.size(); ++j) {
          expr += " + " + lit(node.coefficients[j]) + " * x[" + idx(j) + "]";
        }
        out_.line("return " + expr + ";");
        manifest_.leaf_constants += 1 + node.coefficients.size();
        break;
      }
    }
  }

  void node(const Tree& tree, int index) {
    const auto& n = tree.nodes[static_cast<std::size_t>(index)];
    if (n.is_leaf()) {
      leaf(tree, n);
      return;
    }
    ++manifest_.split_constants;
    out_.open("if (x[" + std::to_string(n.feature) + "] <= " + lit(n.threshold) + ") {");
    node(tree, n.left);
    out_.reopen("} else {");
    node(tree, n.right);
    out_.close();
  }

  void emit_trees(std::span<const Tree> trees) {
    for (std::size_t t = 0; t < trees.size(); ++t) {
      const Tree& tree = trees[t];
      const std::string ret = tree.leaf_kind == LeafKind::class_vote ? "int" : "model_real_t";
      out_.line("");
      out_.open("static " + ret + " tree_" + idx(t) + "(const model_real_t x[MODEL_NUM_FEATURES]) {");
      const bool reads_x = !tree.nodes.front().is_leaf() ||
                           (tree.leaf_kind == LeafKind::linear && model_.features > 0);
      if (!reads_x) out_.line("(void)x;");
      node(tree, 0);
      out_.close();
    }
  }

  void emit_forest(const ForestModel& forest) {
    emit_trees(forest.trees);
    out_.line("");
    out_.open(entry_signature() + " {");
    if (forest.aggregation == Aggregation::majority_vote) {
      out_.line("int votes[" + idx(static_cast<std::size_t>(model_.classes)) + "] = {0};");
      out_.line("int i;");
      out_.line("int best;");
      for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        out_.line("votes[tree_" + idx(t) + "(features)] += 1;");
      }
      argmax("votes", static_cast<std::size_t>(model_.classes));
    } else {
      out_.line("model_real_t sum = " + lit(0.0) + ";");
      for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        out_.line("sum += tree_" + idx(t) + "(features);");
      }
      out_.line("return sum / " + lit(static_cast<double>(forest.trees.size())) + ";");
    }
    out_.close();
  }

  void emit_svm(const SvmModel& svm) {
    const std::size_t planes = svm.planes.size();
    const std::size_t width = model_.features;
    if (classifier()) {
      // Planes are laid out in (a, b) pair order with a < b; the vote loop relies on it.
      std::size_t p = 0;
      for (int a = 0; a < model_.classes; ++a) {
        for (int b = a + 1; b < model_.classes; ++b, ++p) {
          if (svm.planes[p].positive != a || svm.planes[p].negative != b) {
            throw CodegenError("IR invariant violation: hyperplanes not in class-pair order");
          }
        }
      }
    }
    input_normalization(svm.input);
    std::vector<double> weights, biases;
    for (const auto& plane : svm.planes) {
      weights.insert(weights.end(), plane.weights.begin(), plane.weights.end());
      biases.push_back(plane.bias);
    }
    out_.line("");
    matrix("SVM_W", weights, planes, width, manifest_.weight_constants);
    table("SVM_B", biases, manifest_.bias_constants);

    const std::string z = opts_.inline_normalization ? "z" : "features";
    const std::string zero = lit(0.0);
    out_.line("");
    out_.open(entry_signature() + " {");
    if (opts_.inline_normalization) out_.line("model_real_t z[" + d() + "];");
    out_.line("int j;");
    if (classifier()) {
      out_.line("int votes[" + idx(static_cast<std::size_t>(model_.classes)) + "] = {0};");
      out_.line("int a;");
      out_.line("int b;");
      out_.line("int i;");
      out_.line("int p = 0;");
      out_.line("int best;");
    } else {
      out_.line("model_real_t acc = SVM_B[0];");
    }
    if (opts_.inline_normalization) {
      out_.open("for (j = 0; j < " + d() + "; ++j) {");
      out_.line("z[j] = (features[j] - IN_MEAN[j]) / IN_SCALE[j];");
      out_.close();
    }
    if (!classifier()) {
      out_.open("for (j = 0; j < " + d() + "; ++j) {");
      out_.line("acc += SVM_W[0][j] * " + z + "[j];");
      out_.close();
      out_.line("return acc;");
      out_.close();
      return;
    }
    const std::string n = idx(static_cast<std::size_t>(model_.classes));
    out_.open("for (a = 0; a < " + n + "; ++a) {");
    out_.open("for (b = a + 1; b < " + n + "; ++b) {");
    out_.line("model_real_t acc = SVM_B[p];");
    out_.open("for (j = 0; j < " + d() + "; ++j) {");
    out_.line("acc += SVM_W[p][j] * " + z + "[j];");
    out_.close();
    out_.open("if (acc > " + zero + ") {");
    out_.line("votes[a] += 1;");
    out_.reopen("} else {");
    out_.line("votes[b] += 1;");
    out_.close();
    out_.line("++p;");
    out_.close();
    out_.close();
    argmax("votes", static_cast<std::size_t>(model_.classes));
    out_.close();
  }

  const TrainedModel& model_;
  const CodegenOptions& opts_;
  Writer out_;
  Manifest manifest_;
};

}  // namespace

GeneratedSource generate(const TrainedModel& model, const CodegenOptions& opts) {
  model.validate();
  const TrainedModel deployed = deployed_model(model, opts);
  return Emitter(deployed, opts).run();
}

}  // namespace mcufit
