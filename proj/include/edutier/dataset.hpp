#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "edutier/error.hpp"
#include "edutier/io.hpp"
#include "edutier/rng.hpp"

namespace edutier {

enum class Gender { male, female };

struct StudentRecord {
  std::string student_id;
  Gender gender = Gender::male;
  std::optional<double> language;
  std::optional<double> mathematics;
  std::optional<double> english;
  std::optional<double> pe;
  std::optional<double> database;
  std::optional<double> java;
  std::optional<double> computer_network;
  std::optional<double> study_time;  // weekly after-class hours
  std::optional<std::int64_t> attendance;  // number of late arrivals
  std::optional<double> microcomputer;  // target course score

  bool operator==(const StudentRecord&) const = default;
};

inline constexpr std::string_view kTargetColumn = "microcomputer";

// Exact CSV header order.
inline constexpr std::array<std::string_view, 12> kCsvColumns{
    "student_id", "gender",   "language", "mathematics",      "english",    "pe",
    "database",   "java",     "computer_network", "study_time", "attendance", "microcomputer"};

inline constexpr std::array<std::string_view, 7> kScoreColumns{
    "language", "mathematics", "english", "pe", "database", "java", "computer_network"};

// Every numeric input attribute, in schema order (gender excluded).
inline constexpr std::array<std::string_view, 9> kNumericFeatureColumns{
    "language", "mathematics",      "english",    "pe",        "database",
    "java",     "computer_network", "study_time", "attendance"};

inline bool is_numeric_column(std::string_view name) {
  return name == kTargetColumn ||
         std::find(kNumericFeatureColumns.begin(), kNumericFeatureColumns.end(), name) !=
             kNumericFeatureColumns.end();
}

inline bool is_score_column(std::string_view name) {
  return name == kTargetColumn ||
         std::find(kScoreColumns.begin(), kScoreColumns.end(), name) != kScoreColumns.end();
}

namespace detail {

inline std::optional<double>* score_slot(StudentRecord& r, std::string_view name) {
  if (name == "language") return &r.language;
  if (name == "mathematics") return &r.mathematics;
  if (name == "english") return &r.english;
  if (name == "pe") return &r.pe;
  if (name == "database") return &r.database;
  if (name == "java") return &r.java;
  if (name == "computer_network") return &r.computer_network;
  if (name == "study_time") return &r.study_time;
  if (name == "microcomputer") return &r.microcomputer;
  return nullptr;
}

}  // namespace detail

/// Reads a numeric column from a record; attendance is widened to double.
/// Throws `DataError` for names that are not numeric columns.
inline std::optional<double> column_value(const StudentRecord& r, std::string_view name) {
  if (name == "attendance") {
    if (!r.attendance) return std::nullopt;
    return static_cast<double>(*r.attendance);
  }
  auto* slot = detail::score_slot(const_cast<StudentRecord&>(r), name);
  if (slot == nullptr) throw DataError("unknown numeric column: " + std::string(name));
  return *slot;
}

inline void set_column_value(StudentRecord& r, std::string_view name, std::optional<double> v) {
  if (name == "attendance") {
    r.attendance = v ? std::optional<std::int64_t>(static_cast<std::int64_t>(*v)) : std::nullopt;
    return;
  }
  auto* slot = detail::score_slot(r, name);
  if (slot == nullptr) throw DataError("unknown numeric column: " + std::string(name));
  *slot = v;
}

struct LoadedFrom {
  std::string path;
  bool operator==(const LoadedFrom&) const = default;
};

struct SyntheticFrom {
  std::uint64_t seed = 0;
  std::string config_digest;
  bool operator==(const SyntheticFrom&) const = default;
};

using Provenance = std::variant<LoadedFrom, SyntheticFrom>;

struct Dataset {
  std::vector<StudentRecord> records;
  Provenance provenance = LoadedFrom{};
  // False when the source CSV had no microcomputer column.
  bool has_target_column = true;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell_error(std::size_t row, std::string_view column, const std::string& what) {
  return "row " + std::to_string(row) + ", column \"" + std::string(column) + "\": " + what;
}

// Range check for a present numeric value. Empty string means OK.
inline std::string range_problem(std::string_view column, double v) {
  if (is_score_column(column)) {
    if (v < 0.0 || v > 100.0) return "value " + io::format_double(v) + " outside [0,100]";
  } else if (column == "study_time") {
    if (v < 0.0) return "value " + io::format_double(v) + " is negative";
  } else if (column == "attendance") {
    if (v < 0.0) return "value " + io::format_double(v) + " is negative";
    if (v != std::floor(v)) return "value " + io::format_double(v) + " is not an integer";
  }
  return {};
}

}  // namespace detail

/// Loads a cohort CSV. The header must equal the fixed schema, optionally
/// without the trailing `microcomputer` column. Rows are numbered from 1
/// (first data row) in error messages.
inline Dataset load_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());
  const auto lines = io::read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file, expected a header row");

  const auto header = io::split_csv_line(lines.front());
  const bool with_target = header.size() == kCsvColumns.size();
  const std::size_t expected = with_target ? kCsvColumns.size() : kCsvColumns.size() - 1;
  {
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < expected; ++i) {
      if (std::find(header.begin(), header.end(), kCsvColumns[i]) == header.end()) {
        missing.emplace_back(kCsvColumns[i]);
      }
    }
    if (!missing.empty()) {
      std::string msg = "header mismatch: missing column(s)";
      for (const auto& m : missing) msg += " \"" + m + "\"";
      throw DataError(path.string() + ": " + msg);
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i >= expected || header[i] != kCsvColumns[i]) {
        throw DataError(path.string() + ": header mismatch at column " + std::to_string(i + 1) +
                        ": got \"" + header[i] + "\", expected \"" +
                        (i < expected ? std::string(kCsvColumns[i]) : std::string("<end of row>")) +
                        "\"");
      }
    }
  }

  Dataset ds;
  ds.provenance = LoadedFrom{path.string()};
  ds.has_target_column = with_target;
  std::set<std::string> seen;
  std::size_t row = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    ++row;
    const auto cells = io::split_csv_line(lines[li]);
    if (cells.size() != expected) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": expected " +
                      std::to_string(expected) + " cells, got " + std::to_string(cells.size()));
    }
    StudentRecord rec;
    rec.student_id = cells[0];
    if (rec.student_id.empty()) {
      throw DataError(path.string() + ": " + detail::cell_error(row, "student_id", "empty id"));
    }
    if (!seen.insert(rec.student_id).second) {
      throw DataError(path.string() + ": row " + std::to_string(row) + ": duplicate student_id \"" +
                      rec.student_id + "\"");
    }
    if (cells[1] == "M") {
      rec.gender = Gender::male;
    } else if (cells[1] == "F") {
      rec.gender = Gender::female;
    } else {
      throw DataError(path.string() + ": " +
                      detail::cell_error(row, "gender", "expected M or F, got \"" + cells[1] + "\""));
    }
    for (std::size_t ci = 2; ci < expected; ++ci) {
      const auto column = kCsvColumns[ci];
      const auto& cell = cells[ci];
      if (cell.empty()) continue;
      double v = 0.0;
      if (!io::parse_double(cell, v)) {
        throw DataError(path.string() + ": " +
                        detail::cell_error(row, column, "unparsable number \"" + cell + "\""));
      }
      if (auto problem = detail::range_problem(column, v); !problem.empty()) {
        throw DataError(path.string() + ": out-of-range " + detail::cell_error(row, column, problem));
      }
      set_column_value(rec, column, v);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

inline std::string to_csv(const Dataset& ds) {
  const std::size_t ncols = ds.has_target_column ? kCsvColumns.size() : kCsvColumns.size() - 1;
  std::string out;
  for (std::size_t i = 0; i < ncols; ++i) {
    if (i) out += ',';
    out += kCsvColumns[i];
  }
  out += '\n';
  for (const auto& r : ds.records) {
    out += r.student_id;
    out += ',';
    out += r.gender == Gender::male ? 'M' : 'F';
    for (std::size_t ci = 2; ci < ncols; ++ci) {
      out += ',';
      if (auto v = column_value(r, kCsvColumns[ci])) out += io::format_double(*v);
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, to_csv(ds));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct RangeViolation {
  std::size_t row = 0;  // 1-based
  std::string column;
  double value = 0.0;
};

struct ValidationReport {
  // Schema order; every numeric column is listed, zero counts included.
  std::vector<std::pair<std::string, std::size_t>> missing;
  std::vector<RangeViolation> range_violations;
  std::vector<std::string> duplicate_ids;
  std::size_t empty_ids = 0;

  std::size_t missing_count(std::string_view column) const {
    for (const auto& [name, count] : missing) {
      if (name == column) return count;
    }
    return 0;
  }

  std::size_t total_missing() const {
    std::size_t total = 0;
    for (const auto& m : missing) total += m.second;
    return total;
  }

  // Missing cells are legitimate input and are not counted as issues.
  std::size_t issue_count() const {
    return range_violations.size() + duplicate_ids.size() + empty_ids;
  }
  bool ok() const { return issue_count() == 0; }
};

inline ValidationReport validate(const Dataset& ds) {
  ValidationReport report;
  for (std::size_t ci = 2; ci < kCsvColumns.size(); ++ci) {
    report.missing.emplace_back(std::string(kCsvColumns[ci]), 0);
  }
  std::map<std::string, std::size_t> id_counts;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.student_id.empty()) ++report.empty_ids;
    ++id_counts[r.student_id];
    for (std::size_t ci = 2; ci < kCsvColumns.size(); ++ci) {
      const auto column = kCsvColumns[ci];
      const auto v = column_value(r, column);
      if (!v) {
        if (column != kTargetColumn || ds.has_target_column) ++report.missing[ci - 2].second;
        continue;
      }
      if (!detail::range_problem(column, *v).empty() || !std::isfinite(*v)) {
        report.range_violations.push_back({i + 1, std::string(column), *v});
      }
    }
  }
  for (const auto& [id, count] : id_counts) {
    if (count > 1 && !id.empty()) report.duplicate_ids.push_back(id);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts
// ---------------------------------------------------------------------------

// One observable score column: mean + loadings on the two latent factors
// (ability, conscientiousness) + Gaussian noise.
struct LatentColumn {
  std::string column;
  double mean = 0.0;
  double ability = 0.0;
  double conscientiousness = 0.0;
  double noise_sd = 0.0;
};

// Lateness counts ~ Poisson(base_rate * exp(-conscientiousness_slope * c)).
struct AttendanceModel {
  double base_rate = 2.0;
  double conscientiousness_slope = 0.7;
};

// Linear target term: weight * (value - center).
struct TargetTerm {
  std::string column;
  double weight = 0.0;
  double center = 0.0;
};

// Step term: adds `above` when value >= threshold, else `below`.
struct ThresholdTerm {
  std::string column;
  double threshold = 0.0;
  double above = 0.0;
  double below = 0.0;
};

struct TargetModel {
  double intercept = 0.0;
  std::vector<TargetTerm> terms;
  std::vector<ThresholdTerm> thresholds;
  double noise_sd = 0.0;
};

struct GeneratorConfig {
  std::size_t n = 2000;
  std::uint64_t seed = 42;
  double female_fraction = 0.5;
  std::vector<LatentColumn> columns;  // score columns and study_time
  AttendanceModel attendance;
  TargetModel target;
  double missing_rate = 0.0;
  int decimals = 1;  // rounding applied to generated real values
};

inline void to_json(nlohmann::json& j, const LatentColumn& c) {
  j = {{"column", c.column},
       {"mean", c.mean},
       {"ability", c.ability},
       {"conscientiousness", c.conscientiousness},
       {"noise_sd", c.noise_sd}};
}
inline void from_json(const nlohmann::json& j, LatentColumn& c) {
  j.at("column").get_to(c.column);
  j.at("mean").get_to(c.mean);
  j.at("ability").get_to(c.ability);
  j.at("conscientiousness").get_to(c.conscientiousness);
  j.at("noise_sd").get_to(c.noise_sd);
}
inline void to_json(nlohmann::json& j, const TargetTerm& t) {
  j = {{"column", t.column}, {"weight", t.weight}, {"center", t.center}};
}
inline void from_json(const nlohmann::json& j, TargetTerm& t) {
  j.at("column").get_to(t.column);
  j.at("weight").get_to(t.weight);
  j.at("center").get_to(t.center);
}
inline void to_json(nlohmann::json& j, const ThresholdTerm& t) {
  j = {{"column", t.column}, {"threshold", t.threshold}, {"above", t.above}, {"below", t.below}};
}
inline void from_json(const nlohmann::json& j, ThresholdTerm& t) {
  j.at("column").get_to(t.column);
  j.at("threshold").get_to(t.threshold);
  j.at("above").get_to(t.above);
  j.at("below").get_to(t.below);
}

inline nlohmann::json config_to_json(const GeneratorConfig& c) {
  return {{"n", c.n},
          {"seed", c.seed},
          {"female_fraction", c.female_fraction},
          {"columns", c.columns},
          {"attendance",
           {{"base_rate", c.attendance.base_rate},
            {"conscientiousness_slope", c.attendance.conscientiousness_slope}}},
          {"target",
           {{"intercept", c.target.intercept},
            {"terms", c.target.terms},
            {"thresholds", c.target.thresholds},
            {"noise_sd", c.target.noise_sd}}},
          {"missing_rate", c.missing_rate},
          {"decimals", c.decimals}};
}

inline GeneratorConfig config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    c.female_fraction = j.value("female_fraction", c.female_fraction);
    j.at("columns").get_to(c.columns);
    const auto& att = j.at("attendance");
    att.at("base_rate").get_to(c.attendance.base_rate);
    att.at("conscientiousness_slope").get_to(c.attendance.conscientiousness_slope);
    const auto& tgt = j.at("target");
    tgt.at("intercept").get_to(c.target.intercept);
    tgt.at("terms").get_to(c.target.terms);
    if (tgt.contains("thresholds")) tgt.at("thresholds").get_to(c.target.thresholds);
    tgt.at("noise_sd").get_to(c.target.noise_sd);
    c.missing_rate = j.value("missing_rate", c.missing_rate);
    c.decimals = j.value("decimals", c.decimals);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid generator config: ") + e.what());
  }
  return c;
}

/// Calibrated defaults (also checked in as data/generator_default.json).
/// Ability drives the course scores, conscientiousness drives study time and
/// lateness. The target leans on java, computer_network, mathematics and
/// study time, is pushed down by lateness, and carries two prerequisite
/// steps on java and computer_network.
inline GeneratorConfig default_generator_config() {
  GeneratorConfig c;
  c.columns = {
      {"language", 74.0, 1.5, 1.5, 9.0},
      {"mathematics", 70.0, 11.0, 3.0, 7.0},
      {"english", 70.0, 2.0, 1.5, 10.0},
      {"pe", 78.0, 0.0, 1.0, 8.0},
      {"database", 72.0, 7.0, 3.0, 9.0},
      {"java", 68.0, 12.0, 3.0, 6.0},
      {"computer_network", 70.0, 11.0, 3.0, 6.0},
      {"study_time", 8.0, 0.6, 3.0, 1.8},
  };
  c.attendance = {2.0, 0.7};
  c.target.intercept = 69.0;
  c.target.terms = {
      {"java", 0.30, 68.0},
      {"computer_network", 0.25, 70.0},
      {"mathematics", 0.20, 70.0},
      {"study_time", 1.0, 8.0},
      {"attendance", -1.2, 2.0},
  };
  c.target.thresholds = {
      {"java", 60.0, 4.0, -6.0},
      {"computer_network", 75.0, 4.0, 0.0},
  };
  c.target.noise_sd = 4.5;
  c.missing_rate = 0.02;
  c.decimals = 1;
  return c;
}

inline void check_config(const GeneratorConfig& c) {
  auto fail = [](const std::string& m) { throw DataError("invalid generator config: " + m); };
  if (!(c.missing_rate >= 0.0 && c.missing_rate < 1.0)) fail("missing_rate must lie in [0,1)");
  if (!(c.female_fraction >= 0.0 && c.female_fraction <= 1.0)) fail("female_fraction must lie in [0,1]");
  if (c.decimals < 0 || c.decimals > 6) fail("decimals must lie in [0,6]");
  if (c.target.noise_sd < 0.0) fail("target noise_sd must be >= 0");
  if (c.attendance.base_rate < 0.0) fail("attendance base_rate must be >= 0");
  if (c.attendance.conscientiousness_slope < 0.0) {
    fail("attendance rate must not increase with conscientiousness");
  }
  std::set<std::string> names;
  for (const auto& col : c.columns) {
    if (!is_score_column(col.column) && col.column != "study_time") {
      fail("unknown latent column " + col.column);
    }
    if (col.column == kTargetColumn) fail("target is not a latent column");
    if (col.noise_sd < 0.0) fail("noise_sd of " + col.column + " must be >= 0");
    if (!names.insert(col.column).second) fail("duplicate column " + col.column);
  }
  for (const char* needed : {"java", "computer_network", "mathematics", "study_time"}) {
    auto it = std::find_if(c.target.terms.begin(), c.target.terms.end(),
                           [&](const TargetTerm& t) { return t.column == needed; });
    if (it == c.target.terms.end() || !(it->weight > 0.0)) {
      fail(std::string("target needs a positive weight on ") + needed);
    }
  }
  auto att = std::find_if(c.target.terms.begin(), c.target.terms.end(),
                          [](const TargetTerm& t) { return t.column == "attendance"; });
  if (att == c.target.terms.end() || !(att->weight < 0.0)) {
    fail("target needs a negative weight on attendance");
  }
  for (const auto& t : c.target.terms) {
    if (!is_numeric_column(t.column) || t.column == kTargetColumn) fail("bad target term " + t.column);
  }
  for (const auto& t : c.target.thresholds) {
    if (!is_numeric_column(t.column) || t.column == kTargetColumn) fail("bad threshold term " + t.column);
  }
}

inline std::string config_digest(const GeneratorConfig& c) {
  return io::sha256_hex(config_to_json(c).dump());
}

/// Deterministic synthetic cohort: a pure function of the config (seed
/// included). Draw order per student is fixed: two latent factors, gender,
/// the latent columns in config order, lateness, target noise, then one
/// mask draw per maskable cell.
inline Dataset generate_synthetic(const GeneratorConfig& config) {
  check_config(config);
  Rng rng(config.seed);
  const double scale = std::pow(10.0, config.decimals);
  auto round_to = [&](double v) { return std::round(v * scale) / scale; };

  Dataset ds;
  ds.provenance = SyntheticFrom{config.seed, config_digest(config)};
  ds.has_target_column = true;
  ds.records.reserve(config.n);
  const int id_width = std::max<int>(4, static_cast<int>(std::to_string(config.n).size()));

  for (std::size_t i = 0; i < config.n; ++i) {
    StudentRecord r;
    std::string num = std::to_string(i + 1);
    r.student_id = "S" + std::string(static_cast<std::size_t>(id_width) - num.size(), '0') + num;

    const double ability = rng.normal();
    const double consc = rng.normal();
    r.gender = rng.bernoulli(config.female_fraction) ? Gender::female : Gender::male;

    for (const auto& col : config.columns) {
      double v = col.mean + col.ability * ability + col.conscientiousness * consc +
                 col.noise_sd * rng.normal();
      v = round_to(v);
      v = col.column == "study_time" ? std::max(0.0, v) : std::clamp(v, 0.0, 100.0);
      set_column_value(r, col.column, v);
    }
    r.attendance = static_cast<std::int64_t>(rng.poisson(
        config.attendance.base_rate * std::exp(-config.attendance.conscientiousness_slope * consc)));

    double target = config.target.intercept;
    for (const auto& term : config.target.terms) {
      const auto v = column_value(r, term.column);
      target += term.weight * (v.value_or(term.center) - term.center);
    }
    for (const auto& step : config.target.thresholds) {
      const auto v = column_value(r, step.column);
      if (v) target += *v >= step.threshold ? step.above : step.below;
    }
    target += config.target.noise_sd * rng.normal();
    r.microcomputer = std::clamp(round_to(target), 0.0, 100.0);

    for (std::string_view column : kNumericFeatureColumns) {
      const bool mask = rng.bernoulli(config.missing_rate);
      if (mask) set_column_value(r, column, std::nullopt);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace edutier
