#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "edutier/error.hpp"
#include "edutier/io.hpp"
#include "edutier/preprocess.hpp"
#include "edutier/rng.hpp"
#include "edutier/tier.hpp"

namespace edutier {

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

enum class Family { knn, naive_bayes, svm, decision_tree, random_forest };

// Report order.
inline constexpr std::array<Family, 5> kAllFamilies{Family::knn, Family::naive_bayes,
                                                    Family::decision_tree, Family::svm,
                                                    Family::random_forest};

inline std::string family_key(Family f) {
  switch (f) {
    case Family::knn: return "knn";
    case Family::naive_bayes: return "nb";
    case Family::svm: return "svm";
    case Family::decision_tree: return "dt";
    case Family::random_forest: return "rf";
  }
  return "?";
}

inline std::string family_display_name(Family f) {
  switch (f) {
    case Family::knn: return "KNN";
    case Family::naive_bayes: return "Naive Bayes";
    case Family::svm: return "SVM";
    case Family::decision_tree: return "Decision Tree";
    case Family::random_forest: return "Random Forest";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (Family f : kAllFamilies) {
    if (s == family_key(f)) return f;
  }
  if (s == "naive_bayes") return Family::naive_bayes;
  if (s == "decision_tree") return Family::decision_tree;
  if (s == "random_forest") return Family::random_forest;
  throw UsageError("unknown model family \"" + std::string(s) + "\" (expected knn, nb, svm, dt, rf)");
}

struct KnnParams {
  int k = 5;
  bool operator==(const KnnParams&) const = default;
};

// epsilon = variance_smoothing * (largest per-feature variance of the
// training set), added to every class-conditional variance.
struct NaiveBayesParams {
  double variance_smoothing = 1e-9;
  bool operator==(const NaiveBayesParams&) const = default;
};

struct SvmParams {
  double c = 1.0;
  int epochs = 100;
  bool operator==(const SvmParams&) const = default;
};

struct TreeParams {
  int max_depth = 8;
  int min_samples_leaf = 1;
  bool operator==(const TreeParams&) const = default;
};

enum class FeatureSubsample { sqrt, all };

struct ForestParams {
  int n_trees = 100;
  TreeParams tree;
  FeatureSubsample feature_subsample = FeatureSubsample::sqrt;
  bool bootstrap = true;
  bool operator==(const ForestParams&) const = default;
};

using Hyperparams = std::variant<KnnParams, NaiveBayesParams, SvmParams, TreeParams, ForestParams>;

inline Family family_of(const Hyperparams& hp) {
  static constexpr std::array<Family, 5> kByIndex{Family::knn, Family::naive_bayes, Family::svm,
                                                  Family::decision_tree, Family::random_forest};
  return kByIndex[hp.index()];
}

inline void check_hyperparams(const Hyperparams& hp) {
  auto fail = [](const std::string& m) { throw UsageError("invalid hyperparameters: " + m); };
  auto check_tree = [&](const TreeParams& t) {
    if (t.max_depth < 1) fail("max_depth must be >= 1");
    if (t.min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
  };
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          if (p.k < 1) fail("k must be >= 1");
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          if (!(p.variance_smoothing > 0.0)) fail("variance_smoothing must be > 0");
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          if (!(p.c > 0.0)) fail("C must be > 0");
          if (p.epochs < 1) fail("epochs must be >= 1");
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          check_tree(p);
        } else {
          if (p.n_trees < 1) fail("n_trees must be >= 1");
          check_tree(p.tree);
        }
      },
      hp);
}

inline std::string describe(const Hyperparams& hp) {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          return "k=" + std::to_string(p.k);
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          return "variance_smoothing=" + io::format_double(p.variance_smoothing);
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          return "C=" + io::format_double(p.c) + ";epochs=" + std::to_string(p.epochs);
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          return "max_depth=" + std::to_string(p.max_depth) +
                 ";min_samples_leaf=" + std::to_string(p.min_samples_leaf);
        } else {
          return "n_trees=" + std::to_string(p.n_trees) + ";max_depth=" + std::to_string(p.tree.max_depth) +
                 ";min_samples_leaf=" + std::to_string(p.tree.min_samples_leaf) + ";features=" +
                 (p.feature_subsample == FeatureSubsample::sqrt ? "sqrt" : "all") +
                 ";bootstrap=" + (p.bootstrap ? "on" : "off");
        }
      },
      hp);
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

using ClassCounts = std::array<std::size_t, kTierCount>;

// Highest count wins; ties go to the lowest class in A, B, C order.
inline Tier majority(const ClassCounts& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kTierCount; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return tier_from_index(best);
}

// Highest score wins; ties go to the lowest class.
inline Tier argmax_tier(const std::array<double, kTierCount>& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kTierCount; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return tier_from_index(best);
}

/// Shannon entropy in bits of a class histogram.
inline double entropy(const ClassCounts& counts) {
  const double n = static_cast<double>(counts[0] + counts[1] + counts[2]);
  if (n == 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

inline double information_gain(const ClassCounts& parent, const ClassCounts& left,
                               const ClassCounts& right) {
  const double n = static_cast<double>(parent[0] + parent[1] + parent[2]);
  const double nl = static_cast<double>(left[0] + left[1] + left[2]);
  const double nr = static_cast<double>(right[0] + right[1] + right[2]);
  return entropy(parent) - (nl / n) * entropy(left) - (nr / n) * entropy(right);
}

namespace detail {

inline void check_training_matrix(const FeatureMatrix& m) {
  if (m.rows == 0) throw DataError("cannot fit on an empty matrix");
  if (m.labels.size() != m.rows) {
    throw DataError("label count " + std::to_string(m.labels.size()) + " does not match " +
                    std::to_string(m.rows) + " rows");
  }
  if (m.values.size() != m.rows * m.cols()) throw InvariantError("feature matrix shape is inconsistent");
}

inline ClassCounts count_labels(std::span<const Tier> labels) {
  ClassCounts counts{};
  for (Tier t : labels) ++counts[tier_index(t)];
  return counts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

struct KnnModel {
  KnnParams params;
  std::size_t dims = 0;
  std::vector<double> points;  // row-major training matrix
  std::vector<Tier> labels;
};

inline KnnModel fit_knn(const KnnParams& p, const FeatureMatrix& m) {
  return {p, m.cols(), m.values, m.labels};
}

/// Majority label of the k nearest training rows (squared Euclidean).
/// Neighbours at equal distance are ranked by training-row index; vote ties
/// go to the lowest class.
inline Tier predict_knn(const KnnModel& model, std::span<const double> x) {
  const std::size_t n = model.labels.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    const double* row = model.points.data() + i * model.dims;
    for (std::size_t j = 0; j < model.dims; ++j) {
      const double diff = row[j] - x[j];
      d += diff * diff;
    }
    dist[i] = {d, i};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(model.params.k), n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  ClassCounts votes{};
  for (std::size_t i = 0; i < k; ++i) ++votes[tier_index(model.labels[dist[i].second])];
  return majority(votes);
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

struct NaiveBayesModel {
  NaiveBayesParams params;
  std::size_t dims = 0;
  double epsilon = 0.0;
  std::array<double, kTierCount> priors{};  // 0 for classes absent from training
  std::array<std::vector<double>, kTierCount> means;
  std::array<std::vector<double>, kTierCount> variances;
};

inline NaiveBayesModel fit_naive_bayes(const NaiveBayesParams& p, const FeatureMatrix& m) {
  NaiveBayesModel model;
  model.params = p;
  model.dims = m.cols();
  const std::size_t d = m.cols();
  const double n = static_cast<double>(m.rows);

  double max_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) mean += m.at(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) var += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    max_var = std::max(max_var, var / n);
  }
  model.epsilon = p.variance_smoothing * (max_var > 0.0 ? max_var : 1.0);

  const auto counts = detail::count_labels(m.labels);
  for (std::size_t c = 0; c < kTierCount; ++c) {
    model.priors[c] = static_cast<double>(counts[c]) / n;
    model.means[c].assign(d, 0.0);
    model.variances[c].assign(d, model.epsilon);
    if (counts[c] == 0) continue;
    const double nc = static_cast<double>(counts[c]);
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (tier_index(m.labels[i]) != c) continue;
      for (std::size_t j = 0; j < d; ++j) model.means[c][j] += m.at(i, j);
    }
    for (double& mu : model.means[c]) mu /= nc;
    std::vector<double> ss(d, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (tier_index(m.labels[i]) != c) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = m.at(i, j) - model.means[c][j];
        ss[j] += diff * diff;
      }
    }
    for (std::size_t j = 0; j < d; ++j) model.variances[c][j] = ss[j] / nc + model.epsilon;
  }
  return model;
}

/// Unnormalized log posteriors; -inf for classes absent from training.
inline std::array<double, kTierCount> naive_bayes_log_posteriors(const NaiveBayesModel& model,
                                                                  std::span<const double> x) {
  std::array<double, kTierCount> out{};
  for (std::size_t c = 0; c < kTierCount; ++c) {
    if (model.priors[c] <= 0.0) {
      out[c] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double lp = std::log(model.priors[c]);
    for (std::size_t j = 0; j < model.dims; ++j) {
      const double var = model.variances[c][j];
      const double diff = x[j] - model.means[c][j];
      lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - diff * diff / (2.0 * var);
    }
    out[c] = lp;
  }
  return out;
}

// Posterior probabilities via log-sum-exp.
inline std::array<double, kTierCount> normalize_log_posteriors(const std::array<double, kTierCount>& lp) {
  const double top = *std::max_element(lp.begin(), lp.end());
  std::array<double, kTierCount> p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kTierCount; ++c) {
    p[c] = std::isinf(lp[c]) && lp[c] < 0 ? 0.0 : std::exp(lp[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline Tier predict_naive_bayes(const NaiveBayesModel& model, std::span<const double> x) {
  return argmax_tier(naive_bayes_log_posteriors(model, x));
}

// ---------------------------------------------------------------------------
// Linear SVM, one-vs-rest
// ---------------------------------------------------------------------------

struct SvmModel {
  SvmParams params;
  std::size_t dims = 0;
  std::array<bool, kTierCount> trained{};  // classes with a separator
  std::array<std::vector<double>, kTierCount> weights;
  std::array<double, kTierCount> bias{};
};

/// Trains one hinge-loss separator for `positive` vs the rest by stochastic
/// subgradient descent on
///   (lambda / 2) * |(w, b)|^2 + mean_i max(0, 1 - y_i (w.x_i + b)),
/// with lambda = 1 / (C n) and step 1 / (lambda t). The bias is treated as the
/// weight of a constant input. Each epoch visits the rows in a fresh seeded
/// order; iterates are projected onto the ball of radius 1/sqrt(lambda).
inline std::pair<std::vector<double>, double> train_hinge_separator(const FeatureMatrix& m, Tier positive,
                                                                    const SvmParams& p,
                                                                    std::uint64_t seed) {
  const std::size_t d = m.cols();
  const std::size_t n = m.rows;
  const double lambda = 1.0 / (p.c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(d + 1, 0.0);  // w[d] is the bias
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = m.labels[i] == positive ? 1.0 : -1.0;
      const auto x = m.row(i);
      double score = w[d];
      for (std::size_t j = 0; j < d; ++j) score += w[j] * x[j];
      const double shrink = 1.0 - eta * lambda;
      for (double& wj : w) wj *= shrink;
      if (y * score < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * x[j];
        w[d] += eta * y;
      }
      double norm2 = 0.0;
      for (double wj : w) norm2 += wj * wj;
      if (norm2 > radius * radius) {
        const double f = radius / std::sqrt(norm2);
        for (double& wj : w) wj *= f;
      }
    }
  }
  const double b = w[d];
  w.pop_back();
  return {std::move(w), b};
}

inline SvmModel fit_svm(const SvmParams& p, const FeatureMatrix& m, std::uint64_t seed) {
  SvmModel model;
  model.params = p;
  model.dims = m.cols();
  const auto counts = detail::count_labels(m.labels);
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  for (std::size_t c = 0; c < kTierCount; ++c) {
    model.weights[c].assign(m.cols(), 0.0);
    if (counts[c] == 0) continue;
    model.trained[c] = true;
    if (present == 1) continue;  // single class: constant prediction
    auto [w, b] = train_hinge_separator(m, tier_from_index(c), p, derive_seed(seed, "svm", c));
    model.weights[c] = std::move(w);
    model.bias[c] = b;
  }
  return model;
}

inline std::array<double, kTierCount> svm_scores(const SvmModel& model, std::span<const double> x) {
  std::array<double, kTierCount> s{};
  for (std::size_t c = 0; c < kTierCount; ++c) {
    if (!model.trained[c]) {
      s[c] = -std::numeric_limits<double>::infinity();
      continue;
    }
    double v = model.bias[c];
    for (std::size_t j = 0; j < model.dims; ++j) v += model.weights[c][j] * x[j];
    s[c] = v;
  }
  return s;
}

inline Tier predict_svm(const SvmModel& model, std::span<const double> x) {
  return argmax_tier(svm_scores(model, x));
}

// ---------------------------------------------------------------------------
// Decision tree (entropy / information gain, pre-pruned)
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  Tier label = Tier::A;  // majority class of the node's samples
  std::size_t samples = 0;
  double gain = 0.0;  // information gain of the split (internal nodes)
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  Tier predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].label;
  }

  int depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
  }
};

namespace detail {

inline constexpr double kMinGain = 1e-12;

struct TreeBuilder {
  const FeatureMatrix& m;
  const TreeParams& params;
  Rng* rng;  // null: every split considers all features
  std::size_t features_per_split;
  DecisionTree tree;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = m.cols();
    std::vector<std::size_t> f(d);
    std::iota(f.begin(), f.end(), 0);
    if (rng == nullptr || features_per_split >= d) return f;
    // Partial Fisher-Yates, then ascending order for the tie rule.
    for (std::size_t i = 0; i < features_per_split; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng->below(d - i));
      std::swap(f[i], f[j]);
    }
    f.resize(features_per_split);
    std::sort(f.begin(), f.end());
    return f;
  }

  // Best split over candidate features; ties keep the lowest feature index,
  // then the lowest threshold.
  Split best_split(const std::vector<std::size_t>& rows, const ClassCounts& parent) {
    Split best;
    const std::size_t min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    std::vector<std::pair<double, Tier>> sorted(rows.size());
    for (std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {m.at(rows[i], f), m.labels[rows[i]]};
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      ClassCounts left{};
      ClassCounts right = parent;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto c = tier_index(sorted[i].second);
        ++left[c];
        --right[c];
        const double lo = sorted[i].first, hi = sorted[i + 1].first;
        if (!(lo < hi)) continue;
        const std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double gain = information_gain(parent, left, right);
        if (gain > kMinGain && (best.feature < 0 || gain > best.gain)) {
          double thr = lo + (hi - lo) / 2.0;
          if (!(thr < hi)) thr = lo;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    ClassCounts counts{};
    for (std::size_t r : rows) ++counts[tier_index(m.labels[r])];
    {
      auto& node = tree.nodes.back();
      node.label = majority(counts);
      node.samples = rows.size();
    }
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || depth >= params.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
      return id;
    }
    const Split split = best_split(rows, counts);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (m.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left_rows), depth + 1);
    const int r = grow(std::move(right_rows), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.gain = split.gain;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace detail

/// Grows a tree on the given rows (duplicates allowed, as in bootstrap
/// samples). With `rng` null every split considers every feature.
inline DecisionTree grow_tree(const FeatureMatrix& m, std::vector<std::size_t> rows, const TreeParams& p,
                              Rng* rng = nullptr, std::size_t features_per_split = 0) {
  detail::TreeBuilder b{m, p, rng, features_per_split == 0 ? m.cols() : features_per_split, {}};
  b.grow(std::move(rows), 0);
  return std::move(b.tree);
}

/// Weighted impurity decrease per feature, normalized to sum to 1. A tree
/// without splits yields all zeros.
inline std::vector<double> tree_importances(const DecisionTree& tree, std::size_t dims) {
  std::vector<double> imp(dims, 0.0);
  if (tree.nodes.empty()) return imp;
  const double root = static_cast<double>(tree.nodes.front().samples);
  for (const auto& n : tree.nodes) {
    if (n.feature < 0) continue;
    imp[static_cast<std::size_t>(n.feature)] += static_cast<double>(n.samples) / root * n.gain;
  }
  const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : imp) v /= sum;
  }
  return imp;
}

struct TreeModel {
  TreeParams params;
  DecisionTree tree;
};

inline TreeModel fit_decision_tree(const TreeParams& p, const FeatureMatrix& m) {
  std::vector<std::size_t> rows(m.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return {p, grow_tree(m, std::move(rows), p)};
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct ForestModel {
  ForestParams params;
  std::size_t dims = 0;
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;  // derive_seed(master, "tree", t)
};

inline std::size_t features_per_split(FeatureSubsample mode, std::size_t dims) {
  if (mode == FeatureSubsample::all) return dims;
  const auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dims))));
  return std::max<std::size_t>(1, k);
}

/// Trees are trained independently from pre-derived seeds, so the result
/// does not depend on training order.
inline ForestModel fit_random_forest(const ForestParams& p, const FeatureMatrix& m, std::uint64_t seed) {
  ForestModel model;
  model.params = p;
  model.dims = m.cols();
  const std::size_t per_split = features_per_split(p.feature_subsample, m.cols());
  for (int t = 0; t < p.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, "tree", static_cast<std::uint64_t>(t));
    Rng rng(tree_seed);
    std::vector<std::size_t> rows(m.rows);
    if (p.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(m.rows));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees.push_back(grow_tree(m, std::move(rows), p.tree,
                                    per_split < m.cols() ? &rng : nullptr, per_split));
    model.tree_seeds.push_back(tree_seed);
  }
  return model;
}

inline ClassCounts forest_votes(const ForestModel& model, std::span<const double> x) {
  ClassCounts votes{};
  for (const auto& tree : model.trees) ++votes[tier_index(tree.predict(x))];
  return votes;
}

inline Tier predict_forest(const ForestModel& model, std::span<const double> x) {
  return majority(forest_votes(model, x));
}

// ---------------------------------------------------------------------------
// Uniform fit / predict
// ---------------------------------------------------------------------------

using ModelState = std::variant<KnnModel, NaiveBayesModel, SvmModel, TreeModel, ForestModel>;

struct TrainedModel {
  ModelState state;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;

  Family family() const {
    static constexpr std::array<Family, 5> kByIndex{Family::knn, Family::naive_bayes, Family::svm,
                                                    Family::decision_tree, Family::random_forest};
    return kByIndex[state.index()];
  }

  Hyperparams hyperparams() const {
    return std::visit([](const auto& s) -> Hyperparams { return s.params; }, state);
  }
};

/// Fits one classifier family. Deterministic in (matrix, hyperparameters,
/// seed). Single-class training data yields a model that always predicts
/// that class.
inline TrainedModel fit(const Hyperparams& hp, const FeatureMatrix& m, std::uint64_t seed) {
  check_hyperparams(hp);
  detail::check_training_matrix(m);
  TrainedModel model;
  model.feature_names = m.column_names;
  model.seed = seed;
  model.state = std::visit(
      [&](const auto& p) -> ModelState {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          return fit_knn(p, m);
        } else if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          return fit_naive_bayes(p, m);
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          return fit_svm(p, m, seed);
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          return fit_decision_tree(p, m);
        } else {
          return fit_random_forest(p, m, seed);
        }
      },
      hp);
  return model;
}

inline Tier predict_row(const TrainedModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& s) -> Tier {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, KnnModel>) {
          return predict_knn(s, x);
        } else if constexpr (std::is_same_v<S, NaiveBayesModel>) {
          return predict_naive_bayes(s, x);
        } else if constexpr (std::is_same_v<S, SvmModel>) {
          return predict_svm(s, x);
        } else if constexpr (std::is_same_v<S, TreeModel>) {
          return s.tree.predict(x);
        } else {
          return predict_forest(s, x);
        }
      },
      model.state);
}

inline void check_schema(const TrainedModel& model, const FeatureMatrix& rows) {
  if (rows.column_names == model.feature_names) return;
  std::string missing, extra;
  for (const auto& n : model.feature_names) {
    if (std::find(rows.column_names.begin(), rows.column_names.end(), n) == rows.column_names.end()) {
      missing += " " + n;
    }
  }
  for (const auto& n : rows.column_names) {
    if (std::find(model.feature_names.begin(), model.feature_names.end(), n) == model.feature_names.end()) {
      extra += " " + n;
    }
  }
  std::string msg = "schema mismatch:";
  if (!missing.empty()) msg += " missing columns" + missing + ";";
  if (!extra.empty()) msg += " unexpected columns" + extra + ";";
  if (missing.empty() && extra.empty()) msg += " column order differs from the model;";
  throw DataError(msg);
}

inline std::vector<Tier> predict(const TrainedModel& model, const FeatureMatrix& rows) {
  check_schema(model, rows);
  std::vector<Tier> out;
  out.reserve(rows.rows);
  for (std::size_t i = 0; i < rows.rows; ++i) out.push_back(predict_row(model, rows.row(i)));
  return out;
}

/// Mean per-tree impurity-decrease importances, renormalized to sum to 1;
/// uniform when no tree has a split.
inline std::vector<std::pair<std::string, double>> feature_importances(const TrainedModel& model) {
  const auto* forest = std::get_if<ForestModel>(&model.state);
  if (forest == nullptr) throw UsageError("feature importances are only defined for random forests");
  const std::size_t d = model.feature_names.size();
  std::vector<double> total(d, 0.0);
  for (const auto& tree : forest->trees) {
    const auto imp = tree_importances(tree, d);
    for (std::size_t j = 0; j < d; ++j) total[j] += imp[j];
  }
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t j = 0; j < d; ++j) {
    out.emplace_back(model.feature_names[j], sum > 0.0 ? total[j] / sum : 1.0 / static_cast<double>(d));
  }
  return out;
}

}  // namespace edutier
