#pragma once

// File-based commands behind the `edutier` CLI. Each command reads its
// inputs, writes a fixed set of artifacts and a manifest describing the run,
// and returns a summary for the caller. Output bytes depend only on the
// inputs and flags.
//
// Artifact layout:
//   generate  <out>                      cohort CSV
//             <out>.manifest.json
//   analyze   <dir>/correlation.csv      6-decimal correlation matrix
//             <dir>/correlation_heatmap.svg
//             <dir>/selection.csv        feature,r
//             <dir>/manifest.json
//   train     <dir>/selection.csv
//             <dir>/split.csv            student_id,part
//             <dir>/models/<key>.json    one per family (knn, nb, svm, dt, rf)
//             <dir>/grid_search.csv
//             <dir>/cv_report.csv
//             <dir>/learning_curve.csv
//             <dir>/test_metrics.csv
//             <dir>/comparison.txt       method/accuracy/precision/recall/F table
//             <dir>/confusion/<key>.csv
//             <dir>/importances.csv      random forest only
//             <dir>/manifest.json
//   predict   <out>                      student_id,predicted_tier
//             <out>.manifest.json
//   report    <dir>/comparison.txt, <dir>/confusion.csv, <dir>/manifest.json
//   plan      <dir>/plan_<level>.txt, <dir>/manifest.json
//   survey    <out>, <out>.manifest.json

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edutier/classifiers.hpp"
#include "edutier/correlation.hpp"
#include "edutier/dataset.hpp"
#include "edutier/error.hpp"
#include "edutier/evaluation.hpp"
#include "edutier/io.hpp"
#include "edutier/persistence.hpp"
#include "edutier/preprocess.hpp"
#include "edutier/rng.hpp"
#include "edutier/tiering.hpp"

namespace edutier {

inline constexpr const char* kToolVersion = "1.0.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> flags;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::vector<std::pair<std::string, std::string>> inputs;  // path -> sha256

  void add_input(const fs::path& p) { inputs.emplace_back(p.string(), io::sha256_file(p)); }

  /// Writes the manifest listing `artifacts` (relative to `base`) with
  /// their digests.
  void write(const fs::path& manifest_path, const fs::path& base, std::vector<fs::path> artifacts) const {
    std::sort(artifacts.begin(), artifacts.end());
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : artifacts) {
      arts.push_back({{"path", a.lexically_relative(base).generic_string()}, {"sha256", io::sha256_file(a)}});
    }
    nlohmann::json flags_j = nlohmann::json::object();
    for (const auto& [k, v] : flags) flags_j[k] = v;
    nlohmann::json seeds_j = nlohmann::json::object();
    for (const auto& [k, v] : seeds) seeds_j[k] = v;
    nlohmann::json inputs_j = nlohmann::json::array();
    for (const auto& [p, d] : inputs) inputs_j.push_back({{"path", p}, {"sha256", d}});
    const nlohmann::json j{{"tool", "edutier"},        {"version", kToolVersion}, {"command", command},
                           {"flags", flags_j},          {"seeds", seeds_j},        {"inputs", inputs_j},
                           {"artifacts", arts}};
    io::write_file(manifest_path, j.dump(2) + "\n");
  }
};

inline fs::path sidecar_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::size_t n = 2000;
  std::uint64_t seed = 42;
  fs::path out;
  std::optional<fs::path> config;
};

inline GeneratorConfig load_generator_config(const fs::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": not valid JSON: " + e.what());
  }
}

inline Dataset run_generate(const GenerateOptions& opt) {
  GeneratorConfig cfg = opt.config ? load_generator_config(*opt.config) : default_generator_config();
  cfg.n = opt.n;
  cfg.seed = opt.seed;
  Dataset ds = generate_synthetic(cfg);
  write_csv(ds, opt.out);

  RunManifest m;
  m.command = "generate";
  m.flags = {{"n", std::to_string(opt.n)}, {"seed", std::to_string(opt.seed)}, {"out", opt.out.string()}};
  if (opt.config) {
    m.flags.emplace_back("config", opt.config->string());
    m.add_input(*opt.config);
  }
  m.flags.emplace_back("config_digest", config_digest(cfg));
  m.seeds = {{"generator", opt.seed}};
  const fs::path base = opt.out.has_parent_path() ? opt.out.parent_path() : fs::path(".");
  m.write(sidecar_manifest(opt.out), base, {opt.out});
  return ds;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

inline std::vector<std::string> all_feature_columns() {
  std::vector<std::string> cols{"gender"};
  for (auto c : kNumericFeatureColumns) cols.emplace_back(c);
  return cols;
}

/// Imputed, normalized feature table (gender as a single 0/1 column) over
/// the records that carry a target score, plus the raw target scores.
inline std::pair<FeatureMatrix, std::vector<double>> analysis_table(const Dataset& ds) {
  std::vector<std::size_t> with_target;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.records[i].microcomputer) with_target.push_back(i);
  }
  if (with_target.size() < 2) throw DataError("correlation analysis needs at least 2 records with a target score");
  const auto subset = select_records(ds, with_target);
  auto [transform, m] = fit_transform(subset, all_feature_columns(), GenderEncoding::binary);
  std::vector<double> target;
  for (const auto& r : subset.records) target.push_back(*r.microcomputer);
  return {std::move(m), std::move(target)};
}

struct AnalysisResult {
  CorrelationMatrix matrix;
  SelectionResult selection;
  std::vector<std::string> warnings;
};

inline AnalysisResult analyze_dataset(const Dataset& ds, double threshold,
                                      const std::optional<std::vector<std::string>>& features = {}) {
  auto [m, target] = analysis_table(ds);
  AnalysisResult res;
  res.matrix = correlation_matrix(m, target, std::string(kTargetColumn));
  res.selection = select_features(res.matrix, kTargetColumn, threshold, features);
  res.warnings = res.matrix.warnings;
  if (res.selection.selected.empty()) {
    res.warnings.push_back("no feature reaches |r| >= " + io::format_double(threshold) +
                           "; selection is empty");
  }
  return res;
}

struct AnalyzeOptions {
  fs::path data;
  fs::path out_dir;
  double threshold = kDefaultSelectionThreshold;
  std::optional<std::vector<std::string>> features;
};

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline AnalysisResult run_analyze(const AnalyzeOptions& opt) {
  const Dataset ds = load_csv(opt.data);
  auto res = analyze_dataset(ds, opt.threshold, opt.features);
  const auto files = emit_heatmap(res.matrix, opt.out_dir);
  const fs::path sel = opt.out_dir / "selection.csv";
  io::write_file(sel, selection_to_csv(res.selection));

  RunManifest m;
  m.command = "analyze";
  m.flags = {{"data", opt.data.string()},
             {"out-dir", opt.out_dir.string()},
             {"threshold", io::format_double(opt.threshold)}};
  if (opt.features) m.flags.emplace_back("features", join(*opt.features));
  m.add_input(opt.data);
  m.write(opt.out_dir / "manifest.json", opt.out_dir, {files.csv, files.svg, sel});
  return res;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  fs::path data;
  std::uint64_t seed = 1;
  std::vector<Family> models{kAllFamilies.begin(), kAllFamilies.end()};
  fs::path out_dir;
  double threshold = kDefaultSelectionThreshold;
  std::optional<std::vector<std::string>> features;
  std::size_t cv_folds = 10;
  std::vector<double> curve_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool stratified = true;
};

struct FamilyOutcome {
  Family family;
  GridSearchResult grid;
  CvSummary cv;
  std::vector<CurvePoint> curve;
  ConfusionMatrix test_confusion;
  EvalMetrics test_metrics;
  ModelBundle bundle;
};

struct TrainResult {
  SelectionResult selection;
  SplitIndices split;
  std::vector<FamilyOutcome> outcomes;
  double majority_baseline = 0.0;  // test accuracy of the training-majority class
};

struct PreparedData {
  FittedTransform transform;
  FeatureMatrix train, validation, test;
  SelectionResult selection;
  SplitIndices split;
};

/// Split, feature selection and preprocessing, all fitted on training rows.
inline PreparedData prepare_training_data(const Dataset& ds, std::uint64_t seed, double threshold,
                                          const std::optional<std::vector<std::string>>& features,
                                          bool stratified) {
  const auto labels = derive_labels(ds);
  PreparedData p;
  p.split = split(ds.size(), labels, derive_seed(seed, "split"), stratified);
  const Dataset train_ds = select_records(ds, p.split.train);
  p.selection = analyze_dataset(train_ds, threshold, features).selection;
  if (p.selection.selected.empty()) {
    throw DataError("feature selection kept no columns at threshold " + io::format_double(threshold));
  }
  // Selected names are analysis columns; "gender" maps back to the gender input.
  std::vector<std::string> columns;
  for (const auto& name : p.selection.names()) columns.push_back(name);
  std::sort(columns.begin(), columns.end(), [](const std::string& a, const std::string& b) {
    const auto all = all_feature_columns();
    return std::find(all.begin(), all.end(), a) < std::find(all.begin(), all.end(), b);
  });
  auto [transform, train] = fit_transform(train_ds, columns);
  p.transform = std::move(transform);
  p.train = std::move(train);
  p.validation = apply_transform(p.transform, select_records(ds, p.split.validation));
  p.test = apply_transform(p.transform, select_records(ds, p.split.test));
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<Tier> out;
    for (auto i : idx) out.push_back(labels[i]);
    return out;
  };
  p.train.labels = pick(p.split.train);
  p.validation.labels = pick(p.split.validation);
  p.test.labels = pick(p.split.test);
  return p;
}

inline FamilyOutcome train_family(Family f, const PreparedData& data, std::uint64_t seed, std::size_t cv_folds,
                                  const std::vector<double>& fractions) {
  const std::uint64_t fit_seed = derive_seed(seed, "fit", static_cast<std::uint64_t>(f));
  FamilyOutcome o;
  o.family = f;
  o.grid = grid_search(default_grid(f), data.train, data.validation, fit_seed);
  const auto& best = o.grid.best().params;
  o.cv = cross_validate(best, data.train, std::min(cv_folds, data.train.rows),
                        derive_seed(seed, "cv", static_cast<std::uint64_t>(f)));
  o.curve = learning_curve(best, data.train, fractions, data.validation,
                           derive_seed(seed, "curve", static_cast<std::uint64_t>(f)));
  o.bundle.model = fit(best, data.train, fit_seed);
  o.bundle.transform = data.transform;
  o.test_confusion = confusion(data.test.labels, predict(o.bundle.model, data.test));
  o.test_metrics = metrics(o.test_confusion);
  return o;
}

inline TrainResult train_models(const Dataset& ds, const TrainOptions& opt) {
  const auto data = prepare_training_data(ds, opt.seed, opt.threshold, opt.features, opt.stratified);
  TrainResult res;
  res.selection = data.selection;
  res.split = data.split;
  const Tier baseline = majority(detail::count_labels(data.train.labels));
  std::size_t hits = 0;
  for (Tier t : data.test.labels) hits += t == baseline ? 1 : 0;
  res.majority_baseline = static_cast<double>(hits) / static_cast<double>(data.test.rows);
  for (Family f : kAllFamilies) {
    if (std::find(opt.models.begin(), opt.models.end(), f) == opt.models.end()) continue;
    res.outcomes.push_back(train_family(f, data, opt.seed, opt.cv_folds, opt.curve_fractions));
  }
  return res;
}

namespace detail {

inline std::string metric_cells(const EvalMetrics& m) {
  return io::format_fixed(m.accuracy, 6) + "," + io::format_fixed(m.precision, 6) + "," +
         io::format_fixed(m.recall, 6) + "," + io::format_fixed(m.f_measure, 6);
}

}  // namespace detail

inline TrainResult run_train(const TrainOptions& opt) {
  if (opt.models.empty()) throw UsageError("no model families selected");
  const Dataset ds = load_csv(opt.data);
  TrainResult res = train_models(ds, opt);

  std::vector<fs::path> artifacts;
  auto emit = [&](const fs::path& rel, const std::string& content) {
    const fs::path p = opt.out_dir / rel;
    io::write_file(p, content);
    artifacts.push_back(p);
  };

  emit("selection.csv", selection_to_csv(res.selection));
  {
    std::vector<std::pair<std::size_t, const char*>> parts;
    for (auto i : res.split.train) parts.emplace_back(i, "train");
    for (auto i : res.split.validation) parts.emplace_back(i, "validation");
    for (auto i : res.split.test) parts.emplace_back(i, "test");
    std::sort(parts.begin(), parts.end());
    std::string s = "student_id,part\n";
    for (const auto& [i, part] : parts) s += ds.records[i].student_id + "," + part + "\n";
    emit("split.csv", s);
  }

  std::string grid = "family,config,validation_accuracy,best\n";
  std::string cv = "family,config,folds,accuracy_mean,precision_mean,recall_mean,f_measure_mean,"
                   "accuracy_std,precision_std,recall_std,f_measure_std\n";
  std::string curve = "family,fraction,train_rows,validation_accuracy\n";
  std::string test = "family,config,accuracy,precision,recall,f_measure,zero_division\n";
  std::vector<ModelScore> scores;
  for (const auto& o : res.outcomes) {
    const auto key = family_key(o.family);
    for (std::size_t i = 0; i < o.grid.entries.size(); ++i) {
      const auto& e = o.grid.entries[i];
      grid += key + "," + describe(e.params) + "," + io::format_fixed(e.validation_accuracy, 6) + "," +
              (i == o.grid.best_index ? "1" : "0") + "\n";
    }
    const auto best = describe(o.grid.best().params);
    cv += key + "," + best + "," + std::to_string(o.cv.folds.size()) + "," + detail::metric_cells(o.cv.mean) +
          "," + detail::metric_cells(o.cv.stddev) + "\n";
    for (const auto& p : o.curve) {
      curve += key + "," + io::format_double(p.fraction) + "," + std::to_string(p.train_rows) + "," +
               io::format_fixed(p.validation_accuracy, 6) + "\n";
    }
    test += key + "," + best + "," + detail::metric_cells(o.test_metrics) + "," +
            (o.test_metrics.zero_division ? "1" : "0") + "\n";
    scores.push_back({o.family, o.test_metrics});
    emit(fs::path("confusion") / (key + ".csv"), confusion_csv(o.test_confusion));
    {
      const fs::path p = opt.out_dir / "models" / (key + ".json");
      save_model(o.bundle, p);
      artifacts.push_back(p);
    }
    if (o.family == Family::random_forest) {
      std::string imp = "feature,importance\n";
      for (const auto& [name, w] : feature_importances(o.bundle.model)) {
        imp += name + "," + io::format_fixed(w, 6) + "\n";
      }
      emit("importances.csv", imp);
    }
  }
  emit("grid_search.csv", grid);
  emit("cv_report.csv", cv);
  emit("learning_curve.csv", curve);
  emit("test_metrics.csv", test);
  emit("comparison.txt", comparison_table(scores));

  RunManifest m;
  m.command = "train";
  std::vector<std::string> keys;
  for (Family f : opt.models) keys.push_back(family_key(f));
  m.flags = {{"data", opt.data.string()},
             {"seed", std::to_string(opt.seed)},
             {"models", join(keys)},
             {"out-dir", opt.out_dir.string()},
             {"threshold", io::format_double(opt.threshold)},
             {"cv-folds", std::to_string(opt.cv_folds)},
             {"stratified", opt.stratified ? "true" : "false"}};
  if (opt.features) m.flags.emplace_back("features", join(*opt.features));
  m.seeds = {{"master", opt.seed}, {"split", res.split.seed}};
  m.add_input(opt.data);
  m.write(opt.out_dir / "manifest.json", opt.out_dir, artifacts);
  return res;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOptions {
  fs::path model;
  fs::path data;
  fs::path out;
};

inline std::vector<std::pair<std::string, Tier>> predict_dataset(const ModelBundle& b, const Dataset& ds) {
  if (!b.transform) throw DataError("model file carries no preprocessing transform; cannot score raw records");
  const auto m = apply_transform(*b.transform, ds);
  const auto tiers = predict(b.model, m);
  std::vector<std::pair<std::string, Tier>> out;
  for (std::size_t i = 0; i < tiers.size(); ++i) out.emplace_back(m.row_ids[i], tiers[i]);
  return out;
}

inline std::vector<std::pair<std::string, Tier>> run_predict(const PredictOptions& opt) {
  const ModelBundle b = load_model(opt.model);
  const Dataset ds = load_csv(opt.data);
  const auto rows = predict_dataset(b, ds);
  std::string csv = "student_id,predicted_tier\n";
  for (const auto& [id, t] : rows) csv += id + "," + tier_name(t) + "\n";
  io::write_file(opt.out, csv);

  RunManifest m;
  m.command = "predict";
  m.flags = {{"model", opt.model.string()}, {"data", opt.data.string()}, {"out", opt.out.string()}};
  m.add_input(opt.model);
  m.add_input(opt.data);
  const fs::path base = opt.out.has_parent_path() ? opt.out.parent_path() : fs::path(".");
  m.write(sidecar_manifest(opt.out), base, {opt.out});
  return rows;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Reads `student_id,<value>` where each value is a tier letter (A/B/C) or
/// a score in [0,100] that is mapped onto its tier.
inline std::vector<std::pair<std::string, Tier>> load_tier_csv(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no such file: " + path.string());
  const auto lines = io::read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  const auto header = io::split_csv_line(lines.front());
  if (header.size() != 2 || header[0] != "student_id") {
    throw DataError(path.string() + ": header must be \"student_id,<tier or score column>\"");
  }
  std::vector<std::pair<std::string, Tier>> out;
  std::set<std::string> seen;
  std::size_t row = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    ++row;
    const auto cells = io::split_csv_line(lines[i]);
    const std::string where = path.string() + ": row " + std::to_string(row);
    if (cells.size() != 2 || cells[0].empty()) throw DataError(where + ": expected student_id,value");
    if (!seen.insert(cells[0]).second) throw DataError(where + ": duplicate student_id \"" + cells[0] + "\"");
    if (auto t = parse_tier(cells[1])) {
      out.emplace_back(cells[0], *t);
      continue;
    }
    double score = 0.0;
    if (!io::parse_double(cells[1], score)) throw DataError(where + ": \"" + cells[1] + "\" is neither a tier nor a score");
    if (score < 0.0 || score > 100.0) throw DataError(where + ": score " + cells[1] + " outside [0,100]");
    out.emplace_back(cells[0], assign_tier(score));
  }
  return out;
}

struct ReportOptions {
  fs::path predicted;
  fs::path actual;
  fs::path out_dir;
};

inline CohortComparison run_report(const ReportOptions& opt) {
  const auto predicted = load_tier_csv(opt.predicted);
  const auto actual = load_tier_csv(opt.actual);
  std::map<std::string, Tier> actual_by_id(actual.begin(), actual.end());
  if (actual_by_id.size() != predicted.size()) {
    throw DataError("predicted and actual files list different numbers of students (" +
                    std::to_string(predicted.size()) + " vs " + std::to_string(actual.size()) + ")");
  }
  std::vector<Tier> p, a;
  for (const auto& [id, t] : predicted) {
    const auto it = actual_by_id.find(id);
    if (it == actual_by_id.end()) throw DataError("student \"" + id + "\" has no actual result");
    p.push_back(t);
    a.push_back(it->second);
  }
  const auto cmp = compare_cohorts(p, a);
  const fs::path text = opt.out_dir / "comparison.txt";
  const fs::path csv = opt.out_dir / "confusion.csv";
  io::write_file(text, comparison_report(cmp));
  io::write_file(csv, confusion_csv(cmp.confusion));

  RunManifest m;
  m.command = "report";
  m.flags = {{"predicted", opt.predicted.string()},
             {"actual", opt.actual.string()},
             {"out-dir", opt.out_dir.string()}};
  m.add_input(opt.predicted);
  m.add_input(opt.actual);
  m.write(opt.out_dir / "manifest.json", opt.out_dir, {text, csv});
  return cmp;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanOptions {
  std::vector<Tier> levels;
  std::optional<fs::path> templates;
  std::optional<fs::path> out_dir;  // unset: documents are only returned
};

inline std::vector<std::string> run_plan(const PlanOptions& opt) {
  if (opt.levels.empty()) throw UsageError("choose --level A|B|C or --all");
  const PlanTemplates plans = opt.templates ? load_plan_templates(*opt.templates) : builtin_plan_templates();
  std::vector<std::string> docs;
  std::vector<fs::path> artifacts;
  for (Tier t : opt.levels) {
    docs.push_back(plan_document(generate_plan(t, plans)));
    if (opt.out_dir) {
      const fs::path p = *opt.out_dir / ("plan_" + tier_name(t) + ".txt");
      io::write_file(p, docs.back());
      artifacts.push_back(p);
    }
  }
  if (opt.out_dir) {
    RunManifest m;
    m.command = "plan";
    std::vector<std::string> names;
    for (Tier t : opt.levels) names.push_back(tier_name(t));
    m.flags = {{"levels", join(names)}, {"out-dir", opt.out_dir->string()}};
    if (opt.templates) {
      m.flags.emplace_back("templates", opt.templates->string());
      m.add_input(*opt.templates);
    }
    m.write(*opt.out_dir / "manifest.json", *opt.out_dir, artifacts);
  }
  return docs;
}

// ---------------------------------------------------------------------------
// survey
// ---------------------------------------------------------------------------

struct SurveyOptions {
  fs::path responses;
  fs::path out;
  std::vector<std::string> questions;
};

inline SurveySummary run_survey(const SurveyOptions& opt) {
  const auto responses = load_survey_csv(opt.responses);
  const auto summary = aggregate_survey(responses, opt.questions);
  io::write_file(opt.out, survey_csv(summary));
  RunManifest m;
  m.command = "survey";
  m.flags = {{"responses", opt.responses.string()}, {"out", opt.out.string()}};
  if (!opt.questions.empty()) m.flags.emplace_back("questions", join(opt.questions));
  m.add_input(opt.responses);
  const fs::path base = opt.out.has_parent_path() ? opt.out.parent_path() : fs::path(".");
  m.write(sidecar_manifest(opt.out), base, {opt.out});
  return summary;
}

}  // namespace edutier
