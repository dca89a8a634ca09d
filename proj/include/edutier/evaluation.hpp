#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "edutier/classifiers.hpp"
#include "edutier/error.hpp"
#include "edutier/io.hpp"
#include "edutier/preprocess.hpp"
#include "edutier/rng.hpp"
#include "edutier/tier.hpp"

namespace edutier {

// ---------------------------------------------------------------------------
// Splits and folds
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  bool stratified = false;
};

// Part sizes for a 60/20/20 split: validation and test are round(n/5)
// (half up), training takes the rest. Each is within 1 of its exact share.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const std::size_t fifth = (2 * n + 5) / 10;
  return {n - 2 * fifth, fifth, fifth};
}

namespace detail {

inline constexpr std::array<std::size_t, 3> kSplitFifths{3, 1, 1};

// Tiny max-flow on a dense residual matrix (Ford-Fulkerson with DFS).
// Node order and edge order are fixed, so the result is deterministic.
class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t nodes) : n_(nodes), cap_(nodes * nodes, 0) {}

  void add(std::size_t u, std::size_t v, long c) { cap_[u * n_ + v] += c; }
  long residual(std::size_t u, std::size_t v) const { return cap_[u * n_ + v]; }

  long max_flow(std::size_t s, std::size_t t) {
    long total = 0;
    while (true) {
      std::vector<char> seen(n_, 0);
      const long f = augment(s, t, 1L << 30, seen);
      if (f == 0) break;
      total += f;
    }
    return total;
  }

 private:
  long augment(std::size_t u, std::size_t t, long limit, std::vector<char>& seen) {
    if (u == t) return limit;
    seen[u] = 1;
    for (std::size_t v = 0; v < n_; ++v) {
      const long c = cap_[u * n_ + v];
      if (c <= 0 || seen[v]) continue;
      const long f = augment(v, t, std::min(limit, c), seen);
      if (f > 0) {
        cap_[u * n_ + v] -= f;
        cap_[v * n_ + u] += f;
        return f;
      }
    }
    return 0;
  }

  std::size_t n_;
  std::vector<long> cap_;
};

/// Per-class part sizes for a stratified split. Every cell is the floor or
/// ceiling of its exact share (n_c * 60/20/20 %), and the part totals match
/// `split_sizes(n)`. The +1 increments are placed by max-flow, first using
/// only cells with a fractional share, then any cell.
inline std::vector<std::array<std::size_t, 3>> stratified_allocation(
    const std::vector<std::size_t>& class_sizes) {
  const std::size_t k = class_sizes.size();
  const std::size_t n = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto targets = split_sizes(n);
  std::vector<std::array<std::size_t, 3>> alloc(k);
  std::array<long, 3> col_res{};
  std::vector<long> row_res(k, 0);
  for (std::size_t p = 0; p < 3; ++p) col_res[p] = static_cast<long>(targets[p]);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t used = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      alloc[c][p] = class_sizes[c] * kSplitFifths[p] / 5;
      used += alloc[c][p];
      col_res[p] -= static_cast<long>(alloc[c][p]);
    }
    row_res[c] = static_cast<long>(class_sizes[c] - used);
  }
  for (long r : col_res) {
    if (r < 0) throw InvariantError("stratified allocation: negative part residual");
  }
  // Nodes: 0 source, 1..k classes, k+1..k+3 parts, k+4 sink.
  const std::size_t source = 0, sink = k + 4;
  FlowNetwork net(k + 5);
  for (std::size_t c = 0; c < k; ++c) net.add(source, 1 + c, row_res[c]);
  for (std::size_t p = 0; p < 3; ++p) net.add(k + 1 + p, sink, col_res[p]);
  long flow = 0;
  for (int phase = 0; phase < 2; ++phase) {
    for (std::size_t c = 0; c < k; ++c) {
      // Larger fractional share first, then part order.
      std::array<std::size_t, 3> parts{0, 1, 2};
      auto frac = [&](std::size_t p) { return class_sizes[c] * kSplitFifths[p] % 5; };
      std::stable_sort(parts.begin(), parts.end(), [&](auto a, auto b) { return frac(a) > frac(b); });
      for (std::size_t p : parts) {
        const bool fractional = frac(p) != 0;
        if ((phase == 0) == fractional) net.add(1 + c, k + 1 + p, 1);
      }
    }
    flow += net.max_flow(source, sink);
  }
  const long need = std::accumulate(row_res.begin(), row_res.end(), 0L);
  if (flow != need) throw InvariantError("stratified allocation: no feasible rounding");
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t p = 0; p < 3; ++p) {
      // Unit edges that carried flow now have residual 0 forward, 1 backward.
      if (net.residual(k + 1 + p, 1 + c) > 0) alloc[c][p] += static_cast<std::size_t>(net.residual(k + 1 + p, 1 + c));
    }
  }
  return alloc;
}

}  // namespace detail

/// Seeded 60/20/20 partition of row indices. Each part is returned in
/// ascending index order. When stratified, per-class part sizes follow
/// `detail::stratified_allocation`.
inline SplitIndices split(std::size_t n_rows, std::span<const Tier> labels, std::uint64_t seed,
                          bool stratified) {
  if (n_rows < 5) {
    throw DataError("split needs at least 5 rows to populate train/validation/test, got " +
                    std::to_string(n_rows));
  }
  SplitIndices out;
  out.seed = seed;
  out.stratified = stratified;
  Rng rng(seed);
  if (!stratified) {
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    const auto sizes = split_sizes(n_rows);
    out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
    out.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                          idx.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
    out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), idx.end());
  } else {
    if (labels.size() != n_rows) throw DataError("stratified split needs one label per row");
    std::array<std::vector<std::size_t>, kTierCount> by_class;
    for (std::size_t i = 0; i < n_rows; ++i) by_class[tier_index(labels[i])].push_back(i);
    std::vector<std::size_t> sizes;
    for (const auto& v : by_class) sizes.push_back(v.size());
    const auto alloc = detail::stratified_allocation(sizes);
    for (std::size_t c = 0; c < kTierCount; ++c) {
      auto& rows = by_class[c];
      rng.shuffle(std::span<std::size_t>(rows));
      auto it = rows.begin();
      auto take = [&](std::vector<std::size_t>& dst, std::size_t count) {
        dst.insert(dst.end(), it, it + static_cast<std::ptrdiff_t>(count));
        it += static_cast<std::ptrdiff_t>(count);
      };
      take(out.train, alloc[c][0]);
      take(out.validation, alloc[c][1]);
      take(out.test, alloc[c][2]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// Seeded k-fold partition. The first n % k folds hold one extra row;
/// each fold is in ascending index order.
inline std::vector<std::vector<std::size_t>> kfold(std::size_t n_rows, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw UsageError("k must be >= 1");
  if (k > n_rows) {
    throw DataError("cannot make " + std::to_string(k) + " folds from " + std::to_string(n_rows) + " rows");
  }
  std::vector<std::size_t> idx(n_rows);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n_rows / k + (f < n_rows % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                    idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics
// ---------------------------------------------------------------------------

struct BinaryCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

/// counts[predicted][actual].
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kTierCount>, kTierCount> counts{};

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return t;
  }
  std::size_t trace() const { return counts[0][0] + counts[1][1] + counts[2][2]; }
  std::size_t predicted_count(Tier t) const {
    const auto& row = counts[tier_index(t)];
    return std::accumulate(row.begin(), row.end(), std::size_t{0});
  }
  std::size_t actual_count(Tier t) const {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[tier_index(t)];
    return s;
  }

  // One-vs-rest reading for class `t`.
  BinaryCounts one_vs_rest(Tier t) const {
    BinaryCounts b;
    const std::size_t c = tier_index(t);
    b.tp = counts[c][c];
    b.fp = predicted_count(t) - b.tp;
    b.fn = actual_count(t) - b.tp;
    b.tn = total() - b.tp - b.fp - b.fn;
    return b;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const Tier> actual, std::span<const Tier> predicted) {
  if (actual.size() != predicted.size()) {
    throw DataError("confusion: length mismatch (" + std::to_string(actual.size()) + " actual vs " +
                    std::to_string(predicted.size()) + " predicted)");
  }
  if (actual.empty()) throw DataError("confusion: no rows");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ++cm.counts[tier_index(predicted[i])][tier_index(actual[i])];
  }
  return cm;
}

enum class Averaging { binary, macro };

struct EvalMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  Averaging averaging = Averaging::macro;
  // Some per-class precision or recall had a zero denominator and counted as 0.
  bool zero_division = false;
};

inline double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * recall * precision / (recall + precision) : 0.0;
}

/// Accuracy, recall, precision and F-measure of a binary table.
inline EvalMetrics binary_metrics(const BinaryCounts& b) {
  if (b.total() == 0) throw DataError("metrics of an empty table");
  EvalMetrics m;
  m.averaging = Averaging::binary;
  m.accuracy = static_cast<double>(b.tp + b.tn) / static_cast<double>(b.total());
  if (b.tp + b.fn > 0) {
    m.recall = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fn);
  } else {
    m.zero_division = true;
  }
  if (b.tp + b.fp > 0) {
    m.precision = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fp);
  } else {
    m.zero_division = true;
  }
  m.f_measure = f_measure(m.precision, m.recall);
  return m;
}

/// Multiclass metrics: accuracy = trace / total; precision and recall are
/// one-vs-rest per class and macro-averaged over A, B, C; F-measure is the
/// harmonic mean of the macro pair.
inline EvalMetrics metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw DataError("metrics of an empty confusion matrix");
  EvalMetrics m;
  m.averaging = Averaging::macro;
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (Tier t : kAllTiers) {
    const auto per = binary_metrics(cm.one_vs_rest(t));
    m.precision += per.precision;
    m.recall += per.recall;
    m.zero_division = m.zero_division || per.zero_division;
  }
  m.precision /= static_cast<double>(kTierCount);
  m.recall /= static_cast<double>(kTierCount);
  m.f_measure = f_measure(m.precision, m.recall);
  return m;
}

inline double accuracy(std::span<const Tier> actual, std::span<const Tier> predicted) {
  return metrics(confusion(actual, predicted)).accuracy;
}

inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "predicted\\actual,A,B,C\n";
  for (Tier p : kAllTiers) {
    out += tier_name(p);
    for (Tier a : kAllTiers) out += "," + std::to_string(cm.counts[tier_index(p)][tier_index(a)]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search, cross-validation, learning curves
// ---------------------------------------------------------------------------

struct GridEntry {
  Hyperparams params;
  double validation_accuracy = 0.0;
};

struct GridSearchResult {
  std::vector<GridEntry> entries;  // enumeration order
  std::size_t best_index = 0;

  const GridEntry& best() const { return entries.at(best_index); }
};

/// Fits every config on `train` with the same seed and scores accuracy on
/// `validation`. The first config reaching the maximum wins.
inline GridSearchResult grid_search(const std::vector<Hyperparams>& grid, const FeatureMatrix& train,
                                    const FeatureMatrix& validation, std::uint64_t seed) {
  if (grid.empty()) throw UsageError("grid search needs at least one configuration");
  if (!validation.has_labels() || validation.rows == 0) throw DataError("validation set needs labels");
  GridSearchResult res;
  for (const auto& hp : grid) {
    const auto model = fit(hp, train, seed);
    const double acc = accuracy(validation.labels, predict(model, validation));
    res.entries.push_back({hp, acc});
    if (acc > res.entries[res.best_index].validation_accuracy) res.best_index = res.entries.size() - 1;
  }
  return res;
}

struct CvSummary {
  std::vector<EvalMetrics> folds;
  EvalMetrics mean;
  EvalMetrics stddev;  // population standard deviation across folds
};

/// k-fold cross-validation of one config: fit on k-1 folds, score the
/// held-out fold, aggregate.
inline CvSummary cross_validate(const Hyperparams& hp, const FeatureMatrix& m, std::size_t k,
                                std::uint64_t seed) {
  if (k < 2) throw UsageError("cross-validation needs k >= 2");
  if (!m.has_labels()) throw DataError("cross-validation needs labels");
  const auto folds = kfold(m.rows, k, derive_seed(seed, "kfold"));
  CvSummary s;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const auto train = select_rows(m, train_idx);
    const auto held = select_rows(m, folds[f]);
    const auto model = fit(hp, train, derive_seed(seed, "cv-fit", f));
    s.folds.push_back(metrics(confusion(held.labels, predict(model, held))));
  }
  auto field = [](EvalMetrics& e, int i) -> double& {
    switch (i) {
      case 0: return e.accuracy;
      case 1: return e.precision;
      case 2: return e.recall;
      default: return e.f_measure;
    }
  };
  const double kk = static_cast<double>(k);
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (auto& e : s.folds) sum += field(e, i);
    const double mean = sum / kk;
    double ss = 0.0;
    for (auto& e : s.folds) ss += (field(e, i) - mean) * (field(e, i) - mean);
    field(s.mean, i) = mean;
    field(s.stddev, i) = std::sqrt(ss / kk);
  }
  for (const auto& e : s.folds) s.mean.zero_division = s.mean.zero_division || e.zero_division;
  return s;
}

struct CurvePoint {
  double fraction = 0.0;
  std::size_t train_rows = 0;
  double validation_accuracy = 0.0;
};

// Rows used for a training fraction: floor(f * n), absorbing representation
// error such as 0.29 * 100 = 28.999999999999996.
inline std::size_t fraction_rows(double f, std::size_t n) {
  const double x = f * static_cast<double>(n);
  const double r = std::round(x);
  return static_cast<std::size_t>(std::abs(x - r) < 1e-9 ? r : std::floor(x));
}

/// Fits on seeded prefixes of the shuffled training rows and scores each on
/// the validation set. Points come back sorted by fraction.
inline std::vector<CurvePoint> learning_curve(const Hyperparams& hp, const FeatureMatrix& train,
                                              std::vector<double> fractions, const FeatureMatrix& validation,
                                              std::uint64_t seed) {
  if (fractions.empty()) throw UsageError("learning curve needs at least one fraction");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("learning-curve fractions must lie in (0,1]");
    if (fraction_rows(f, train.rows) < 1) {
      throw DataError("fraction " + io::format_double(f) + " selects no training rows");
    }
  }
  std::stable_sort(fractions.begin(), fractions.end());
  std::vector<std::size_t> order(train.rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "curve"));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<CurvePoint> points;
  for (double f : fractions) {
    const std::size_t rows = fraction_rows(f, train.rows);
    std::vector<std::size_t> idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(rows));
    const auto subset = select_rows(train, idx);
    const auto model = fit(hp, subset, seed);
    points.push_back({f, rows, accuracy(validation.labels, predict(model, validation))});
  }
  return points;
}

// ---------------------------------------------------------------------------
// Default search grids
// ---------------------------------------------------------------------------

inline std::vector<Hyperparams> default_grid(Family f) {
  std::vector<Hyperparams> grid;
  switch (f) {
    case Family::knn:
      for (int k : {1, 3, 5, 7, 9, 11, 15, 21}) grid.push_back(KnnParams{k});
      break;
    case Family::naive_bayes:
      for (double e : {1e-9, 1e-6, 1e-3, 1e-2, 1e-1}) grid.push_back(NaiveBayesParams{e});
      break;
    case Family::svm:
      for (double c : {0.1, 1.0, 10.0, 100.0}) grid.push_back(SvmParams{c, 100});
      break;
    case Family::decision_tree:
      for (int depth : {3, 5, 7, 9, 12}) {
        for (int leaf : {1, 5, 10}) grid.push_back(TreeParams{depth, leaf});
      }
      break;
    case Family::random_forest:
      for (int depth : {8, 12}) {
        for (int leaf : {1, 3}) {
          ForestParams p;
          p.n_trees = 100;
          p.tree = {depth, leaf};
          grid.push_back(p);
        }
      }
      break;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ModelScore {
  Family family;
  EvalMetrics metrics;
};

/// Method / Accuracy / Precision / Recall / F-measure table, values as
/// percentages with 2 decimals.
inline std::string comparison_table(const std::vector<ModelScore>& rows) {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto pct = [](double v) { return io::format_fixed(100.0 * v, 2); };
  std::string out = pad("Method", 15) + pad("Accuracy", 10) + pad("Precision", 11) + pad("Recall", 8) +
                    "F-measure\n";
  for (const auto& r : rows) {
    out += pad(family_display_name(r.family), 15) + pad(pct(r.metrics.accuracy), 10) +
           pad(pct(r.metrics.precision), 11) + pad(pct(r.metrics.recall), 8) + pct(r.metrics.f_measure) + "\n";
  }
  return out;
}

}  // namespace edutier
