#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edutier/dataset.hpp"
#include "edutier/error.hpp"
#include "edutier/tier.hpp"

namespace edutier {

// Dense row-major matrix of model inputs.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<std::string> column_names;
  std::vector<double> values;  // rows * cols, row-major
  std::vector<std::string> row_ids;
  std::vector<Tier> labels;  // empty when unlabeled

  std::size_t cols() const { return column_names.size(); }
  bool has_labels() const { return !labels.empty() && labels.size() == rows; }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
  }

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i) {
      if (column_names[i] == name) return i;
    }
    return std::nullopt;
  }

  bool operator==(const FeatureMatrix&) const = default;
};

/// Row subset in the given order; labels follow when present.
inline FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> idx) {
  FeatureMatrix out;
  out.rows = idx.size();
  out.column_names = m.column_names;
  out.values.reserve(idx.size() * m.cols());
  out.row_ids.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto r = m.row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    if (i < m.row_ids.size()) out.row_ids.push_back(m.row_ids[i]);
    if (m.has_labels()) out.labels.push_back(m.labels[i]);
  }
  return out;
}

inline Dataset select_records(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset out;
  out.provenance = ds.provenance;
  out.has_target_column = ds.has_target_column;
  out.records.reserve(idx.size());
  for (std::size_t i : idx) out.records.push_back(ds.records.at(i));
  return out;
}

enum class GenderEncoding {
  one_hot,  // gender_M, gender_F
  binary,   // single "gender" column: M = 0, F = 1
};

// Fitted parameters of one numeric input column.
struct ColumnScaling {
  std::string name;
  double mean = 0.0;  // imputation value
  double min = 0.0;
  double max = 0.0;

  bool operator==(const ColumnScaling&) const = default;
};

/// Mean imputation followed by min-max scaling to [0,1], fitted once and
/// re-applied unchanged to other cohorts. Gender columns are 0/1 codes and
/// are not rescaled.
struct FittedTransform {
  std::vector<std::string> input_columns;  // as requested, e.g. "gender", "java"
  std::vector<std::string> output_columns;  // after gender expansion
  std::vector<ColumnScaling> numeric;  // schema of the numeric inputs, in request order
  GenderEncoding gender_encoding = GenderEncoding::one_hot;
  std::vector<std::string> warnings;

  bool operator==(const FittedTransform&) const = default;
};

namespace detail {

inline void check_feature_column(std::string_view name) {
  if (name == "gender") return;
  if (name == kTargetColumn) {
    throw DataError("column \"microcomputer\" is the target and cannot be an input feature");
  }
  if (!is_numeric_column(name)) throw DataError("unknown column \"" + std::string(name) + "\"");
}

inline double scale_value(const ColumnScaling& s, double v) {
  if (!(s.max > s.min)) return 0.0;
  return std::clamp((v - s.min) / (s.max - s.min), 0.0, 1.0);
}

}  // namespace detail

/// Applies a fitted transform. Missing values take the stored means; values
/// outside the fitted range are clipped to [0,1].
inline FeatureMatrix apply_transform(const FittedTransform& t, const Dataset& ds) {
  FeatureMatrix m;
  m.rows = ds.size();
  m.column_names = t.output_columns;
  m.values.reserve(m.rows * m.cols());
  m.row_ids.reserve(m.rows);
  for (const auto& r : ds.records) {
    m.row_ids.push_back(r.student_id);
    std::size_t numeric_i = 0;
    for (const auto& col : t.input_columns) {
      if (col == "gender") {
        const bool female = r.gender == Gender::female;
        if (t.gender_encoding == GenderEncoding::one_hot) {
          m.values.push_back(female ? 0.0 : 1.0);
          m.values.push_back(female ? 1.0 : 0.0);
        } else {
          m.values.push_back(female ? 1.0 : 0.0);
        }
        continue;
      }
      if (numeric_i >= t.numeric.size() || t.numeric[numeric_i].name != col) {
        throw DataError("incompatible schema: transform has no parameters for \"" + col + "\"");
      }
      const auto& s = t.numeric[numeric_i++];
      const double v = column_value(r, col).value_or(s.mean);
      m.values.push_back(detail::scale_value(s, v));
    }
  }
  return m;
}

/// Fits imputation means and min/max ranges on `ds` and transforms it.
/// Throws `DataError` for unknown columns or columns with no observed value.
inline std::pair<FittedTransform, FeatureMatrix> fit_transform(
    const Dataset& ds, const std::vector<std::string>& columns,
    GenderEncoding gender_encoding = GenderEncoding::one_hot) {
  FittedTransform t;
  t.gender_encoding = gender_encoding;
  t.input_columns = columns;
  for (const auto& col : columns) {
    detail::check_feature_column(col);
    if (std::count(columns.begin(), columns.end(), col) > 1) {
      throw DataError("column \"" + col + "\" requested twice");
    }
    if (col == "gender") {
      if (gender_encoding == GenderEncoding::one_hot) {
        t.output_columns.emplace_back("gender_M");
        t.output_columns.emplace_back("gender_F");
      } else {
        t.output_columns.emplace_back("gender");
      }
      continue;
    }
    t.output_columns.push_back(col);

    double sum = 0.0;
    std::size_t count = 0;
    ColumnScaling s{col, 0.0, 0.0, 0.0};
    for (const auto& r : ds.records) {
      const auto v = column_value(r, col);
      if (!v) continue;
      if (count == 0) {
        s.min = s.max = *v;
      } else {
        s.min = std::min(s.min, *v);
        s.max = std::max(s.max, *v);
      }
      sum += *v;
      ++count;
    }
    if (count == 0) throw DataError("column \"" + col + "\" has no non-missing values");
    s.mean = sum / static_cast<double>(count);
    if (!(s.max > s.min)) {
      t.warnings.push_back("column \"" + col + "\" is constant; normalized to 0");
    }
    t.numeric.push_back(std::move(s));
  }
  auto m = apply_transform(t, ds);
  return {std::move(t), std::move(m)};
}

/// One tier label per record, from the microcomputer score.
inline std::vector<Tier> derive_labels(const Dataset& ds, const TierThresholds& thresholds = {}) {
  std::vector<Tier> labels;
  labels.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    if (!r.microcomputer) {
      throw DataError("record " + std::to_string(i + 1) + " (\"" + r.student_id +
                      "\") has no microcomputer score");
    }
    labels.push_back(assign_tier(*r.microcomputer, thresholds));
  }
  return labels;
}

}  // namespace edutier
