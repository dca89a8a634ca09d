#pragma once

// Model files are JSON documents:
//
//   {
//     "format": "edutier-model",
//     "version": 1,
//     "family": "knn" | "nb" | "svm" | "dt" | "rf",
//     "hyperparams": { ... family specific ... },
//     "feature_names": [ ... ],
//     "classes": ["A", "B", "C"],
//     "seed": <uint64>,
//     "state": { ... fitted parameters ... },
//     "transform": { ... }            // optional, present in CLI bundles
//   }
//
// Doubles are written in shortest round-trip form, so a reload reproduces
// every parameter bit-for-bit.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "edutier/classifiers.hpp"
#include "edutier/error.hpp"
#include "edutier/io.hpp"
#include "edutier/preprocess.hpp"

namespace edutier {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatTag = "edutier-model";

namespace detail {

using nlohmann::json;

inline json tiers_to_json(std::span<const Tier> tiers) {
  json out = json::array();
  for (Tier t : tiers) out.push_back(tier_index(t));
  return out;
}

inline std::vector<Tier> tiers_from_json(const json& j) {
  std::vector<Tier> out;
  for (const auto& v : j) {
    const auto i = v.get<std::size_t>();
    if (i >= kTierCount) throw DataError("model file: class index out of range");
    out.push_back(tier_from_index(i));
  }
  return out;
}

inline json tree_params_to_json(const TreeParams& p) {
  return {{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf}};
}

inline TreeParams tree_params_from_json(const json& j) {
  return {j.at("max_depth").get<int>(), j.at("min_samples_leaf").get<int>()};
}

inline json tree_to_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, tier_index(n.label), n.samples, n.gain});
  }
  return nodes;
}

inline DecisionTree tree_from_json(const json& j, std::size_t dims) {
  DecisionTree t;
  for (const auto& a : j) {
    TreeNode n;
    n.feature = a.at(0).get<int>();
    n.threshold = a.at(1).get<double>();
    n.left = a.at(2).get<int>();
    n.right = a.at(3).get<int>();
    const auto label = a.at(4).get<std::size_t>();
    if (label >= kTierCount) throw DataError("model file: leaf class out of range");
    n.label = tier_from_index(label);
    n.samples = a.at(5).get<std::size_t>();
    n.gain = a.at(6).get<double>();
    t.nodes.push_back(n);
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw DataError("model file: empty tree");
  for (const auto& n : t.nodes) {
    if (n.feature < 0) continue;
    if (static_cast<std::size_t>(n.feature) >= dims || n.left <= 0 || n.right <= 0 || n.left >= count ||
        n.right >= count) {
      throw DataError("model file: malformed tree node");
    }
  }
  return t;
}

inline json hyperparams_to_json(const Hyperparams& hp) {
  return std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          return {{"k", p.k}};
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          return {{"variance_smoothing", p.variance_smoothing}};
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          return {{"C", p.c}, {"epochs", p.epochs}};
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          return tree_params_to_json(p);
        } else {
          return {{"n_trees", p.n_trees},
                  {"tree", tree_params_to_json(p.tree)},
                  {"feature_subsample", p.feature_subsample == FeatureSubsample::sqrt ? "sqrt" : "all"},
                  {"bootstrap", p.bootstrap}};
        }
      },
      hp);
}

inline Hyperparams hyperparams_from_json(Family f, const json& j) {
  switch (f) {
    case Family::knn: return KnnParams{j.at("k").get<int>()};
    case Family::naive_bayes: return NaiveBayesParams{j.at("variance_smoothing").get<double>()};
    case Family::svm: return SvmParams{j.at("C").get<double>(), j.at("epochs").get<int>()};
    case Family::decision_tree: return tree_params_from_json(j);
    case Family::random_forest: {
      ForestParams p;
      p.n_trees = j.at("n_trees").get<int>();
      p.tree = tree_params_from_json(j.at("tree"));
      const auto mode = j.at("feature_subsample").get<std::string>();
      if (mode != "sqrt" && mode != "all") throw DataError("model file: bad feature_subsample");
      p.feature_subsample = mode == "sqrt" ? FeatureSubsample::sqrt : FeatureSubsample::all;
      p.bootstrap = j.at("bootstrap").get<bool>();
      return p;
    }
  }
  throw InvariantError("unreachable family");
}

template <std::size_t N>
json array_of_vectors(const std::array<std::vector<double>, N>& a) {
  json out = json::array();
  for (const auto& v : a) out.push_back(v);
  return out;
}

template <std::size_t N>
void vectors_from_json(const json& j, std::array<std::vector<double>, N>& a, std::size_t dims) {
  if (j.size() != N) throw DataError("model file: expected one vector per class");
  for (std::size_t c = 0; c < N; ++c) {
    a[c] = j.at(c).get<std::vector<double>>();
    if (a[c].size() != dims) throw DataError("model file: vector length does not match features");
  }
}

inline json state_to_json(const ModelState& state) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, KnnModel>) {
          return {{"dims", s.dims}, {"points", s.points}, {"labels", tiers_to_json(s.labels)}};
        } else if constexpr (std::is_same_v<S, NaiveBayesModel>) {
          return {{"epsilon", s.epsilon},
                  {"priors", s.priors},
                  {"means", array_of_vectors(s.means)},
                  {"variances", array_of_vectors(s.variances)}};
        } else if constexpr (std::is_same_v<S, SvmModel>) {
          return {{"trained", s.trained}, {"weights", array_of_vectors(s.weights)}, {"bias", s.bias}};
        } else if constexpr (std::is_same_v<S, TreeModel>) {
          return {{"tree", tree_to_json(s.tree)}};
        } else {
          json trees = json::array();
          for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
          return {{"trees", trees}, {"tree_seeds", s.tree_seeds}};
        }
      },
      state);
}

inline ModelState state_from_json(const Hyperparams& hp, const json& j, std::size_t dims) {
  switch (family_of(hp)) {
    case Family::knn: {
      KnnModel m{std::get<KnnParams>(hp), dims, j.at("points").get<std::vector<double>>(),
                 tiers_from_json(j.at("labels"))};
      if (j.at("dims").get<std::size_t>() != dims || m.points.size() != m.labels.size() * dims ||
          m.labels.empty()) {
        throw DataError("model file: inconsistent KNN state");
      }
      return m;
    }
    case Family::naive_bayes: {
      NaiveBayesModel m;
      m.params = std::get<NaiveBayesParams>(hp);
      m.dims = dims;
      m.epsilon = j.at("epsilon").get<double>();
      m.priors = j.at("priors").get<std::array<double, kTierCount>>();
      vectors_from_json(j.at("means"), m.means, dims);
      vectors_from_json(j.at("variances"), m.variances, dims);
      return m;
    }
    case Family::svm: {
      SvmModel m;
      m.params = std::get<SvmParams>(hp);
      m.dims = dims;
      m.trained = j.at("trained").get<std::array<bool, kTierCount>>();
      vectors_from_json(j.at("weights"), m.weights, dims);
      m.bias = j.at("bias").get<std::array<double, kTierCount>>();
      return m;
    }
    case Family::decision_tree:
      return TreeModel{std::get<TreeParams>(hp), tree_from_json(j.at("tree"), dims)};
    case Family::random_forest: {
      ForestModel m;
      m.params = std::get<ForestParams>(hp);
      m.dims = dims;
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t, dims));
      m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
      if (m.trees.size() != m.tree_seeds.size() || m.trees.empty()) {
        throw DataError("model file: inconsistent forest state");
      }
      return m;
    }
  }
  throw InvariantError("unreachable family");
}

inline json transform_to_json(const FittedTransform& t) {
  json numeric = json::array();
  for (const auto& s : t.numeric) numeric.push_back({{"name", s.name}, {"mean", s.mean}, {"min", s.min}, {"max", s.max}});
  return {{"input_columns", t.input_columns},
          {"output_columns", t.output_columns},
          {"numeric", numeric},
          {"gender_encoding", t.gender_encoding == GenderEncoding::one_hot ? "one_hot" : "binary"}};
}

inline FittedTransform transform_from_json(const json& j) {
  FittedTransform t;
  t.input_columns = j.at("input_columns").get<std::vector<std::string>>();
  t.output_columns = j.at("output_columns").get<std::vector<std::string>>();
  for (const auto& s : j.at("numeric")) {
    ColumnScaling c{s.at("name").get<std::string>(), s.at("mean").get<double>(), s.at("min").get<double>(),
                    s.at("max").get<double>()};
    if (!(c.min <= c.max)) throw DataError("model file: transform has min > max for " + c.name);
    t.numeric.push_back(std::move(c));
  }
  t.gender_encoding = j.at("gender_encoding").get<std::string>() == "binary" ? GenderEncoding::binary
                                                                             : GenderEncoding::one_hot;
  return t;
}

}  // namespace detail

// A trained model plus, optionally, the preprocessing fitted alongside it.
struct ModelBundle {
  TrainedModel model;
  std::optional<FittedTransform> transform;
};

inline nlohmann::json model_to_json(const ModelBundle& b) {
  nlohmann::json j{{"format", kModelFormatTag},
                   {"version", kModelFormatVersion},
                   {"family", family_key(b.model.family())},
                   {"hyperparams", detail::hyperparams_to_json(b.model.hyperparams())},
                   {"feature_names", b.model.feature_names},
                   {"classes", {"A", "B", "C"}},
                   {"seed", b.model.seed},
                   {"state", detail::state_to_json(b.model.state)}};
  if (b.transform) j["transform"] = detail::transform_to_json(*b.transform);
  return j;
}

inline ModelBundle model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormatTag) throw DataError("not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model file version " + std::to_string(version));
    }
    if (j.at("classes") != nlohmann::json{"A", "B", "C"}) throw DataError("model file: unexpected class list");
    const Family family = parse_family(j.at("family").get<std::string>());
    ModelBundle b;
    const auto hp = detail::hyperparams_from_json(family, j.at("hyperparams"));
    check_hyperparams(hp);
    b.model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    b.model.seed = j.at("seed").get<std::uint64_t>();
    b.model.state = detail::state_from_json(hp, j.at("state"), b.model.feature_names.size());
    if (j.contains("transform")) b.transform = detail::transform_from_json(j.at("transform"));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const ModelBundle& b, const std::filesystem::path& path) {
  io::write_file(path, model_to_json(b).dump(1) + "\n");
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace edutier
