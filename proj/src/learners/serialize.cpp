#include <json.hpp>

#include "mcufit/error.hpp"
#include "mcufit/model.hpp"

namespace mcufit {
namespace {

using nlohmann::json;

json norm_to_json(const Normalization& n) {
  return {{"mean", n.mean}, {"scale", n.scale}, {"constant", n.constant}};
}

Normalization norm_from_json(const json& j) {
  Normalization n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.scale = j.at("scale").get<std::vector<double>>();
  n.constant = j.at("constant").get<std::vector<bool>>();
  return n;
}

std::string_view leaf_kind_name(LeafKind k) {
  switch (k) {
    case LeafKind::constant: return "constant";
    case LeafKind::class_vote: return "class_vote";
    case LeafKind::linear: return "linear";
  }
  return "?";
}

LeafKind parse_leaf_kind(const std::string& s) {
  if (s == "constant") return LeafKind::constant;
  if (s == "class_vote") return LeafKind::class_vote;
  if (s == "linear") return LeafKind::linear;
  throw Error("unknown leaf kind '" + s + "'");
}

json node_to_json(const Tree& tree, int index) {
  const auto& n = tree.nodes[static_cast<std::size_t>(index)];
  json j{{"samples", n.samples}, {"impurity", n.impurity}};
  if (n.is_leaf()) {
    j["value"] = n.value;
    if (tree.leaf_kind == LeafKind::linear) j["coefficients"] = n.coefficients;
  } else {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

int node_from_json(const json& j, Tree& tree) {
  const int index = static_cast<int>(tree.nodes.size());
  TreeNode node;
  node.samples = j.at("samples").get<std::size_t>();
  node.impurity = j.at("impurity").get<double>();
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    node.threshold = j.at("threshold").get<double>();
  } else {
    node.value = j.at("value").get<double>();
    if (j.contains("coefficients")) node.coefficients = j.at("coefficients").get<std::vector<double>>();
  }
  tree.nodes.push_back(std::move(node));
  if (j.contains("feature")) {
    const int l = node_from_json(j.at("left"), tree);
    const int r = node_from_json(j.at("right"), tree);
    tree.nodes[static_cast<std::size_t>(index)].left = l;
    tree.nodes[static_cast<std::size_t>(index)].right = r;
  }
  return index;
}

json tree_to_json(const Tree& tree) {
  return {{"leaf_kind", leaf_kind_name(tree.leaf_kind)}, {"root", node_to_json(tree, 0)}};
}

Tree tree_from_json(const json& j) {
  Tree tree;
  tree.leaf_kind = parse_leaf_kind(j.at("leaf_kind").get<std::string>());
  node_from_json(j.at("root"), tree);
  return tree;
}

}  // namespace

std::string to_json(const TrainedModel& model) {
  json j;
  j["family"] = to_string(model.family());
  j["task"] = to_string(model.task);
  j["features"] = model.features;
  j["classes"] = model.classes;
  j["feature_names"] = model.feature_names;
  j["class_labels"] = model.class_labels;
  j["notes"] = model.notes;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, AnnModel>) {
          j["input"] = norm_to_json(m.input);
          j["target_mean"] = m.target_mean;
          j["target_scale"] = m.target_scale;
          json layers = json::array();
          for (const auto& l : m.layers) {
            layers.push_back({{"inputs", l.inputs},
                              {"outputs", l.outputs},
                              {"activation", to_string(l.activation)},
                              {"weights", l.weights},
                              {"bias", l.bias}});
          }
          j["layers"] = std::move(layers);
        } else if constexpr (std::is_same_v<M, ForestModel>) {
          j["aggregation"] = m.aggregation == Aggregation::mean ? "mean" : "majority_vote";
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          j["trees"] = std::move(trees);
        } else if constexpr (std::is_same_v<M, M5Model>) {
          j["tree"] = tree_to_json(m.tree);
        } else {
          j["input"] = norm_to_json(m.input);
          json planes = json::array();
          for (const auto& p : m.planes) {
            planes.push_back({{"positive", p.positive},
                              {"negative", p.negative},
                              {"weights", p.weights},
                              {"bias", p.bias}});
          }
          j["planes"] = std::move(planes);
        }
      },
      model.body);
  return j.dump(1);
}

TrainedModel model_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    TrainedModel model;
    const Family family = parse_family(j.at("family").get<std::string>());
    model.task = j.at("task").get<std::string>() == "classification" ? Task::classification
                                                                     : Task::regression;
    model.features = j.at("features").get<std::size_t>();
    model.classes = j.at("classes").get<int>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    model.notes = j.at("notes").get<std::vector<std::string>>();
    switch (family) {
      case Family::ann: {
        AnnModel net;
        net.input = norm_from_json(j.at("input"));
        net.target_mean = j.at("target_mean").get<double>();
        net.target_scale = j.at("target_scale").get<double>();
        for (const auto& l : j.at("layers")) {
          DenseLayer layer;
          layer.inputs = l.at("inputs").get<std::size_t>();
          layer.outputs = l.at("outputs").get<std::size_t>();
          layer.activation = l.at("activation").get<std::string>() == "sigmoid"
                                 ? Activation::sigmoid
                                 : Activation::linear;
          layer.weights = l.at("weights").get<std::vector<double>>();
          layer.bias = l.at("bias").get<std::vector<double>>();
          net.layers.push_back(std::move(layer));
        }
        model.body = std::move(net);
        break;
      }
      case Family::rf: {
        ForestModel forest;
        forest.aggregation = j.at("aggregation").get<std::string>() == "mean"
                                 ? Aggregation::mean
                                 : Aggregation::majority_vote;
        for (const auto& t : j.at("trees")) forest.trees.push_back(tree_from_json(t));
        model.body = std::move(forest);
        break;
      }
      case Family::m5:
        model.body = M5Model{tree_from_json(j.at("tree"))};
        break;
      case Family::svm: {
        SvmModel svm;
        svm.input = norm_from_json(j.at("input"));
        for (const auto& p : j.at("planes")) {
          Hyperplane plane;
          plane.positive = p.at("positive").get<int>();
          plane.negative = p.at("negative").get<int>();
          plane.weights = p.at("weights").get<std::vector<double>>();
          plane.bias = p.at("bias").get<double>();
          svm.planes.push_back(std::move(plane));
        }
        model.body = std::move(svm);
        break;
      }
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace mcufit
