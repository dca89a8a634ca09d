#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edutier/error.hpp"
#include "edutier/io.hpp"
#include "edutier/preprocess.hpp"

namespace edutier {

// The six inputs the reference study kept after correlation screening.
inline const std::vector<std::string>& reference_feature_set() {
  static const std::vector<std::string> kSet{"mathematics",      "database",   "java",
                                             "computer_network", "study_time", "attendance"};
  return kSet;
}

inline constexpr double kDefaultSelectionThreshold = 0.3;

/// Pearson product-moment correlation. Means and co-moments are accumulated
/// in a single streaming pass (Welford update), which stays accurate for
/// data with a large offset.
/// Throws `DataError` on length mismatch, fewer than two points, or a
/// zero-variance input (correlation undefined).
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DataError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DataError("pearson: need at least 2 points");
  double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    sxx += dx * (x[i] - mx);
    syy += dy * (y[i] - my);
    sxy += dx * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DataError("pearson: constant vector, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline bool is_constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<double> values;  // names.size()^2, row-major
  std::vector<std::string> excluded;  // constant columns left out
  std::vector<std::string> warnings;

  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }

  std::optional<std::size_t> index(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    return std::nullopt;
  }

  double at(std::string_view a, std::string_view b) const {
    const auto i = index(a), j = index(b);
    if (!i || !j) throw DataError("correlation matrix has no entry (" + std::string(a) + ", " +
                                  std::string(b) + ")");
    return at(*i, *j);
  }
};

/// Pairwise correlations of named columns. Constant columns are dropped and
/// reported in `excluded`/`warnings`.
inline CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                            const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw InvariantError("correlation_matrix: name/column mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  if (rows < 2) throw DataError("correlation matrix needs at least 2 rows");
  CorrelationMatrix cm;
  std::vector<const std::vector<double>*> kept;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != rows) throw DataError("column \"" + names[c] + "\" has the wrong length");
    if (is_constant(columns[c])) {
      cm.excluded.push_back(names[c]);
      cm.warnings.push_back("column \"" + names[c] + "\" is constant and was excluded");
      continue;
    }
    cm.names.push_back(names[c]);
    kept.push_back(&columns[c]);
  }
  const std::size_t k = kept.size();
  cm.values.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    cm.values[i * k + i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      const double r = pearson(*kept[i], *kept[j]);
      cm.values[i * k + j] = r;
      cm.values[j * k + i] = r;
    }
  }
  return cm;
}

/// Matrix over the feature columns of `m` plus one appended target column.
inline CorrelationMatrix correlation_matrix(const FeatureMatrix& m, std::span<const double> target,
                                            const std::string& target_name) {
  if (target.size() != m.rows) throw DataError("target length does not match matrix rows");
  std::vector<std::string> names = m.column_names;
  std::vector<std::vector<double>> columns;
  columns.reserve(m.cols() + 1);
  for (std::size_t c = 0; c < m.cols(); ++c) columns.push_back(m.column(c));
  names.push_back(target_name);
  columns.emplace_back(target.begin(), target.end());
  return correlation_matrix(names, columns);
}

struct SelectedFeature {
  std::string name;
  double r = 0.0;  // correlation with the target
};

struct SelectionResult {
  std::vector<SelectedFeature> selected;
  double threshold = 0.0;
  bool overridden = false;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : selected) out.push_back(f.name);
    return out;
  }
};

/// Keeps columns with |r(column, target)| >= threshold, or exactly the
/// `override_list` when one is given. Output is ordered by descending |r|,
/// then by name.
inline SelectionResult select_features(const CorrelationMatrix& cm, std::string_view target,
                                       double threshold,
                                       const std::optional<std::vector<std::string>>& override_list = {}) {
  const auto t = cm.index(target);
  if (!t) throw DataError("unknown target column \"" + std::string(target) + "\"");
  if (!override_list && !(threshold > 0.0 && threshold <= 1.0)) {
    throw UsageError("selection threshold must lie in (0,1]");
  }
  SelectionResult res;
  res.threshold = threshold;
  if (override_list) {
    res.overridden = true;
    for (const auto& name : *override_list) {
      const auto i = cm.index(name);
      if (!i || *i == *t) throw DataError("override names unknown column \"" + name + "\"");
      res.selected.push_back({name, cm.at(*i, *t)});
    }
  } else {
    for (std::size_t i = 0; i < cm.size(); ++i) {
      if (i == *t) continue;
      const double r = cm.at(i, *t);
      if (std::abs(r) >= threshold) res.selected.push_back({cm.names[i], r});
    }
  }
  std::sort(res.selected.begin(), res.selected.end(), [](const auto& a, const auto& b) {
    const double ra = std::abs(a.r), rb = std::abs(b.r);
    if (ra != rb) return ra > rb;
    return a.name < b.name;
  });
  return res;
}

inline std::string selection_to_csv(const SelectionResult& s) {
  std::string out = "feature,r\n";
  for (const auto& f : s.selected) out += f.name + "," + io::format_fixed(f.r, 6) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap output
// ---------------------------------------------------------------------------

struct Rgb {
  int r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Diverging ramp: -1 blue, 0 near-white, +1 red.
inline constexpr Rgb kRampNegative{33, 102, 172};
inline constexpr Rgb kRampMid{247, 247, 247};
inline constexpr Rgb kRampPositive{178, 24, 43};

inline Rgb ramp_color(double r) {
  r = std::clamp(r, -1.0, 1.0);
  const Rgb& from = kRampMid;
  const Rgb& to = r < 0.0 ? kRampNegative : kRampPositive;
  const double f = std::abs(r);
  auto lerp = [f](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * f));
  };
  return {lerp(from.r, to.r), lerp(from.g, to.g), lerp(from.b, to.b)};
}

inline std::string hex_color(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

inline std::string heatmap_csv(const CorrelationMatrix& cm) {
  std::string out = "feature";
  for (const auto& n : cm.names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += cm.names[i];
    for (std::size_t j = 0; j < cm.size(); ++j) out += "," + io::format_fixed(cm.at(i, j), 6);
    out += '\n';
  }
  return out;
}

/// SVG heatmap: one square cell per entry, filled by `ramp_color`, annotated
/// with the value to 2 decimals, plus a color bar over [-1,1].
inline std::string heatmap_svg(const CorrelationMatrix& cm) {
  constexpr int cell = 48;
  constexpr int label_w = 140;
  constexpr int label_h = 140;
  constexpr int bar_w = 20;
  const int k = static_cast<int>(cm.size());
  const int width = label_w + k * cell + 80;
  const int height = label_h + std::max(k * cell, 120) + 20;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (int j = 0; j < k; ++j) {
    const int x = label_w + j * cell + cell / 2;
    s += "<text transform=\"translate(" + std::to_string(x) + "," + std::to_string(label_h - 6) +
         ") rotate(-60)\">" + cm.names[j] + "</text>\n";
  }
  for (int i = 0; i < k; ++i) {
    const int y = label_h + i * cell;
    s += "<text x=\"" + std::to_string(label_w - 6) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
         "\" text-anchor=\"end\">" + cm.names[i] + "</text>\n";
    for (int j = 0; j < k; ++j) {
      const double r = cm.at(i, j);
      const int x = label_w + j * cell;
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
           hex_color(ramp_color(r)) + "\"/>\n";
      s += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
           "\" text-anchor=\"middle\">" + io::format_fixed(r, 2) + "</text>\n";
    }
  }
  const int bx = label_w + k * cell + 20;
  const int bar_h = std::max(k * cell, 120);
  constexpr int steps = 20;
  for (int i = 0; i < steps; ++i) {
    const double r = 1.0 - 2.0 * (i + 0.5) / steps;
    const int y0 = label_h + i * bar_h / steps;
    const int y1 = label_h + (i + 1) * bar_h / steps;
    s += "<rect x=\"" + std::to_string(bx) + "\" y=\"" + std::to_string(y0) + "\" width=\"" +
         std::to_string(bar_w) + "\" height=\"" + std::to_string(y1 - y0) + "\" fill=\"" +
         hex_color(ramp_color(r)) + "\"/>\n";
  }
  s += "<text x=\"" + std::to_string(bx + bar_w + 4) + "\" y=\"" + std::to_string(label_h + 10) +
       "\">1</text>\n";
  s += "<text x=\"" + std::to_string(bx + bar_w + 4) + "\" y=\"" +
       std::to_string(label_h + bar_h) + "\">-1</text>\n";
  s += "</svg>\n";
  return s;
}

struct HeatmapFiles {
  std::filesystem::path csv;
  std::filesystem::path svg;
};

inline HeatmapFiles emit_heatmap(const CorrelationMatrix& cm, const std::filesystem::path& out_dir) {
  HeatmapFiles files{out_dir / "correlation.csv", out_dir / "correlation_heatmap.svg"};
  io::write_file(files.csv, heatmap_csv(cm));
  io::write_file(files.svg, heatmap_svg(cm));
  return files;
}

}  // namespace edutier
