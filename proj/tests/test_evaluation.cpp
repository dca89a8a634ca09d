#include <gtest/gtest.h>

#include <set>

#include "edutier/evaluation.hpp"
#include "support.hpp"

using namespace edutier;
using namespace testing_support;

namespace {

// Rebuilds label vectors from a counts[predicted][actual] table.
std::pair<std::vector<Tier>, std::vector<Tier>> vectors_from(
    const std::array<std::array<std::size_t, 3>, 3>& counts) {
  std::vector<Tier> actual, predicted;
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t i = 0; i < counts[p][a]; ++i) {
        predicted.push_back(tier_from_index(p));
        actual.push_back(tier_from_index(a));
      }
    }
  }
  return {actual, predicted};
}

void expect_partition(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& part : parts) {
    for (auto i : part) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], 1) << "index " << i;
}

}  // namespace

TEST(Split, TenRows) {
  const std::vector<Tier> labels(10, Tier::A);
  const auto s = split(10, labels, 1, false);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, Deterministic) {
  Rng rng(1);
  std::vector<Tier> labels;
  for (int i = 0; i < 97; ++i) labels.push_back(tier_from_index(rng.below(3)));
  for (bool strat : {false, true}) {
    const auto a = split(97, labels, 5, strat);
    const auto b = split(97, labels, 5, strat);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_EQ(a.test, b.test);
    const auto c = split(97, labels, 6, strat);
    EXPECT_NE(a.train, c.train);
  }
}

TEST(Split, MinorityClassesLandInOnePart) {
  std::vector<Tier> labels(8, Tier::A);
  labels.push_back(Tier::B);
  labels.push_back(Tier::C);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = split(10, labels, seed, true);
    EXPECT_EQ(s.train.size(), 6u);
    EXPECT_EQ(s.validation.size(), 2u);
    EXPECT_EQ(s.test.size(), 2u);
    for (std::size_t minority : {8u, 9u}) {
      int hits = 0;
      for (const auto* part : {&s.train, &s.validation, &s.test}) {
        hits += static_cast<int>(std::count(part->begin(), part->end(), minority));
      }
      EXPECT_EQ(hits, 1);
    }
    // 8 A rows: shares 4.8 / 1.6 / 1.6, so each part gets the floor or ceiling
    std::array<std::size_t, 3> a_counts{};
    const std::array<const std::vector<std::size_t>*, 3> parts{&s.train, &s.validation, &s.test};
    for (std::size_t p = 0; p < 3; ++p) {
      for (auto i : *parts[p]) a_counts[p] += i < 8 ? 1 : 0;
    }
    EXPECT_GE(a_counts[0], 4u);
    EXPECT_LE(a_counts[0], 5u);
    EXPECT_GE(a_counts[1], 1u);
    EXPECT_LE(a_counts[1], 2u);
  }
}

TEST(Split, PropertyLaws) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng.below(300);
    const std::uint64_t seed = rng.next();
    std::vector<Tier> labels;
    const double pa = rng.uniform(), pb = rng.uniform() * (1 - pa);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      labels.push_back(u < pa ? Tier::A : (u < pa + pb ? Tier::B : Tier::C));
    }
    for (bool strat : {false, true}) {
      const auto s = split(n, labels, seed, strat);
      expect_partition({s.train, s.validation, s.test}, n);
      const double dn = static_cast<double>(n);
      ASSERT_LE(std::abs(static_cast<double>(s.train.size()) - 0.6 * dn), 1.0) << n;
      ASSERT_LE(std::abs(static_cast<double>(s.validation.size()) - 0.2 * dn), 1.0) << n;
      ASSERT_LE(std::abs(static_cast<double>(s.test.size()) - 0.2 * dn), 1.0) << n;
      ASSERT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
      if (!strat) continue;
      std::array<std::size_t, 3> class_n{};
      for (Tier t : labels) ++class_n[tier_index(t)];
      const std::array<double, 3> share{0.6, 0.2, 0.2};
      const std::array<const std::vector<std::size_t>*, 3> parts{&s.train, &s.validation, &s.test};
      for (std::size_t p = 0; p < 3; ++p) {
        std::array<std::size_t, 3> got{};
        for (auto i : *parts[p]) ++got[tier_index(labels[i])];
        for (std::size_t c = 0; c < 3; ++c) {
          ASSERT_LT(std::abs(static_cast<double>(got[c]) - share[p] * static_cast<double>(class_n[c])), 1.0)
              << "n=" << n << " part " << p << " class " << c;
        }
      }
    }
  }
}

TEST(Split, TooFewRows) {
  const std::vector<Tier> labels(4, Tier::A);
  EXPECT_THROW(split(4, labels, 1, false), DataError);
}

TEST(Kfold, SingletonsAndRemainder) {
  const auto ten = kfold(10, 10, 3);
  for (const auto& f : ten) EXPECT_EQ(f.size(), 1u);
  expect_partition(ten, 10);
  const auto folds = kfold(23, 10, 3);
  std::multiset<std::size_t> sizes;
  for (const auto& f : folds) sizes.insert(f.size());
  EXPECT_EQ(sizes.count(3), 3u);
  EXPECT_EQ(sizes.count(2), 7u);
  expect_partition(folds, 23);
}

TEST(Kfold, PropertyLaws) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 10 + rng.below(500);
    const auto folds = kfold(n, 10, rng.next());
    ASSERT_EQ(folds.size(), 10u);
    expect_partition(folds, n);
    for (const auto& f : folds) {
      ASSERT_GE(f.size(), n / 10);
      ASSERT_LE(f.size(), n / 10 + 1);
    }
  }
  EXPECT_THROW(kfold(5, 10, 1), DataError);
  EXPECT_EQ(kfold(30, 10, 9), kfold(30, 10, 9));
}

TEST(Confusion, PerfectIsDiagonal) {
  const std::vector<Tier> y{Tier::A, Tier::B, Tier::C, Tier::C};
  const auto cm = confusion(y, y);
  EXPECT_EQ(cm.counts[0][0], 1u);
  EXPECT_EQ(cm.counts[1][1], 1u);
  EXPECT_EQ(cm.counts[2][2], 2u);
  EXPECT_EQ(cm.trace(), cm.total());
  const auto m = metrics(cm);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f_measure, 1.0);
}

TEST(Confusion, SinglePairCell) {
  const std::vector<Tier> actual{Tier::A}, predicted{Tier::B};
  const auto cm = confusion(actual, predicted);
  EXPECT_EQ(cm.counts[tier_index(Tier::B)][tier_index(Tier::A)], 1u);
  EXPECT_EQ(cm.total(), 1u);
}

TEST(Confusion, ClassOneFixture) {
  const std::array<std::array<std::size_t, 3>, 3> table{{{14, 2, 0}, {6, 18, 0}, {2, 6, 2}}};
  const auto [actual, predicted] = vectors_from(table);
  const auto cm = confusion(actual, predicted);
  EXPECT_EQ(cm.counts, table);
  EXPECT_EQ(cm.predicted_count(Tier::A), 16u);
  EXPECT_EQ(cm.predicted_count(Tier::B), 24u);
  EXPECT_EQ(cm.predicted_count(Tier::C), 10u);
  EXPECT_EQ(cm.actual_count(Tier::A), 22u);
  EXPECT_EQ(cm.actual_count(Tier::B), 26u);
  EXPECT_EQ(cm.actual_count(Tier::C), 2u);
  EXPECT_EQ(metrics(cm).accuracy, 34.0 / 50.0);
  EXPECT_EQ(confusion_csv(cm), "predicted\\actual,A,B,C\nA,14,2,0\nB,6,18,0\nC,2,6,2\n");
}

TEST(Metrics, BinaryFixture) {
  const auto m = binary_metrics({3, 2, 1, 4});
  EXPECT_NEAR(m.accuracy, 0.5, 1e-12);
  EXPECT_NEAR(m.recall, 3.0 / 7.0, 1e-12);
  EXPECT_NEAR(m.precision, 0.75, 1e-12);
  const double p = 0.75, r = 3.0 / 7.0;
  EXPECT_NEAR(m.f_measure, 2 * r * p / (r + p), 1e-12);
  EXPECT_NEAR(m.f_measure, 0.5454545, 1e-6);
  EXPECT_FALSE(m.zero_division);
}

TEST(Metrics, ZeroDivisionFlagged) {
  // class C never predicted and never present
  const std::vector<Tier> y{Tier::A, Tier::B}, p{Tier::A, Tier::A};
  const auto m = metrics(confusion(y, p));
  EXPECT_TRUE(m.zero_division);
  EXPECT_TRUE(std::isfinite(m.precision));
  EXPECT_TRUE(std::isfinite(m.f_measure));
}

TEST(Metrics, RandomMatrixIdentities) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts) {
      for (auto& c : row) c = rng.below(30);
    }
    if (cm.total() == 0) cm.counts[0][0] = 1;
    const auto m = metrics(cm);
    ASSERT_EQ(m.accuracy, static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    for (Tier t : kAllTiers) {
      const auto b = cm.one_vs_rest(t);
      ASSERT_EQ(b.total(), cm.total());
    }
    if (m.precision > 0 && m.recall > 0) {
      ASSERT_GE(m.f_measure, std::min(m.precision, m.recall) - 1e-15);
      ASSERT_LE(m.f_measure, std::max(m.precision, m.recall) + 1e-15);
    }
  }
}

TEST(GridSearch, SingleConfigIsBest) {
  Rng rng(6);
  const auto train = signal_matrix(rng, 60, 2);
  const auto val = signal_matrix(rng, 30, 2);
  const auto res = grid_search({KnnParams{3}}, train, val, 1);
  EXPECT_EQ(res.best_index, 0u);
  EXPECT_EQ(res.entries.size(), 1u);
}

TEST(GridSearch, TieKeepsFirst) {
  Rng rng(7);
  const auto train = signal_matrix(rng, 60, 2);
  const auto val = signal_matrix(rng, 30, 2);
  // identical configs score identically
  const auto res = grid_search({TreeParams{3, 1}, TreeParams{3, 1}, TreeParams{3, 1}}, train, val, 1);
  EXPECT_EQ(res.best_index, 0u);
  EXPECT_EQ(res.entries[0].validation_accuracy, res.entries[2].validation_accuracy);
}

TEST(GridSearch, KnnGridReproducible) {
  Rng rng(8);
  const auto train = signal_matrix(rng, 120, 2);
  const auto val = signal_matrix(rng, 60, 2);
  const std::vector<Hyperparams> grid{KnnParams{1}, KnnParams{3}, KnnParams{5}};
  const auto a = grid_search(grid, train, val, 1);
  const auto b = grid_search(grid, train, val, 1);
  EXPECT_EQ(a.best_index, b.best_index);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.entries[i].validation_accuracy, b.entries[i].validation_accuracy);
  double best = 0;
  for (const auto& e : a.entries) best = std::max(best, e.validation_accuracy);
  EXPECT_EQ(a.best().validation_accuracy, best);
}

TEST(CrossValidate, ConstantLabels) {
  Rng rng(9);
  auto m = random_matrix(rng, 40, 2);
  for (auto& l : m.labels) l = Tier::A;
  const auto cv = cross_validate(KnnParams{3}, m, 10, 1);
  EXPECT_EQ(cv.mean.accuracy, 1.0);
  EXPECT_EQ(cv.stddev.accuracy, 0.0);
}

TEST(CrossValidate, LeaveOneOut) {
  Rng rng(10);
  const auto m = signal_matrix(rng, 10, 2);
  const auto cv = cross_validate(KnnParams{1}, m, 10, 1);
  EXPECT_EQ(cv.folds.size(), 10u);
  for (const auto& f : cv.folds) EXPECT_TRUE(f.accuracy == 0.0 || f.accuracy == 1.0);
}

TEST(CrossValidate, DeterministicAndStatsMatchFolds) {
  Rng rng(11);
  const auto m = signal_matrix(rng, 120, 3);
  const auto a = cross_validate(TreeParams{4, 2}, m, 10, 7);
  const auto b = cross_validate(TreeParams{4, 2}, m, 10, 7);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < a.folds.size(); ++i) {
    EXPECT_EQ(a.folds[i].accuracy, b.folds[i].accuracy);
    EXPECT_EQ(a.folds[i].f_measure, b.folds[i].f_measure);
    sum += a.folds[i].accuracy;
  }
  const double mean = sum / 10;
  for (const auto& f : a.folds) sq += (f.accuracy - mean) * (f.accuracy - mean);
  EXPECT_NEAR(a.mean.accuracy, mean, 1e-12);
  EXPECT_NEAR(a.stddev.accuracy, std::sqrt(sq / 10), 1e-12);
}

TEST(LearningCurve, FullFractionMatchesFullFit) {
  Rng rng(12);
  const auto train = signal_matrix(rng, 100, 2);
  const auto val = signal_matrix(rng, 50, 2);
  const auto pts = learning_curve(TreeParams{4, 1}, train, {1.0}, val, 3);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].train_rows, 100u);
  // a tree does not depend on row order, so the shuffled full set matches
  EXPECT_EQ(pts[0].validation_accuracy, accuracy(val.labels, predict(fit(TreeParams{4, 1}, train, 3), val)));
}

TEST(LearningCurve, DuplicatesAndRange) {
  Rng rng(13);
  const auto train = signal_matrix(rng, 100, 2);
  const auto val = signal_matrix(rng, 50, 2);
  const auto dup = learning_curve(KnnParams{3}, train, {0.5, 0.5}, val, 3);
  ASSERT_EQ(dup.size(), 2u);
  EXPECT_EQ(dup[0].validation_accuracy, dup[1].validation_accuracy);
  const auto pts = learning_curve(SvmParams{1.0, 20}, train, {1.0, 0.25, 0.5}, val, 3);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].fraction, 0.25);
  EXPECT_EQ(pts[0].train_rows, 25u);
  for (const auto& p : pts) {
    EXPECT_GE(p.validation_accuracy, 0.0);
    EXPECT_LE(p.validation_accuracy, 1.0);
  }
  EXPECT_THROW(learning_curve(KnnParams{3}, train, {0.0}, val, 3), UsageError);
}

TEST(LearningCurve, FractionRows) {
  EXPECT_EQ(fraction_rows(0.29, 100), 29u);
  EXPECT_EQ(fraction_rows(0.1, 1200), 120u);
  EXPECT_EQ(fraction_rows(0.333, 10), 3u);
}

TEST(Report, ComparisonTableLayout) {
  EvalMetrics m;
  m.accuracy = 0.8375;
  m.precision = 0.81996;
  m.recall = 0.8;
  m.f_measure = 0.809;
  EvalMetrics low;
  low.accuracy = 0.05;
  const auto table = comparison_table({{Family::random_forest, m}, {Family::knn, low}});
  EXPECT_EQ(table,
            "Method         Accuracy  Precision  Recall  F-measure\n"
            "Random Forest  83.75     82.00      80.00   80.90\n"
            "KNN            5.00      0.00       0.00    0.00\n");
}
