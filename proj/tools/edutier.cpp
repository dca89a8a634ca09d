// edutier: generate cohorts, analyze correlations, train and apply tier
// classifiers, and render reports, plans and survey tallies.
//
// exit codes: 0 ok, 1 usage, 2 data/validation, 3 internal invariant

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "edutier/pipeline.hpp"

namespace {

using namespace edutier;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<Family> parse_models(const std::string& s) {
  if (s == "all") return {kAllFamilies.begin(), kAllFamilies.end()};
  std::vector<Family> out;
  for (const auto& name : split_list(s)) {
    const Family f = parse_family(name);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  if (out.empty()) throw UsageError("--models is empty");
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Student performance tiering: cohort generation, feature analysis, classifier training, "
               "prediction and tiered-instruction reports."};
  app.set_version_flag("--version", std::string("edutier ") + kToolVersion);
  app.require_subcommand(1);

  // generate
  GenerateOptions gen;
  std::int64_t gen_n = 2000;
  std::string gen_config;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic cohort CSV and its manifest");
  c_gen->add_option("--n", gen_n, "Number of students (>= 1)")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output CSV path")->required();
  c_gen->add_option("--config", gen_config, "Generator config JSON (default: built-in calibrated config)");

  // analyze
  AnalyzeOptions an;
  std::string an_features;
  auto* c_an = app.add_subcommand("analyze", "Pearson correlation heatmap and feature selection");
  c_an->add_option("--data", an.data, "Cohort CSV")->required();
  c_an->add_option("--out-dir", an.out_dir, "Output directory")->required();
  c_an->add_option("--threshold", an.threshold, "Keep features with |r| >= threshold, in (0,1]")
      ->capture_default_str();
  c_an->add_option("--features", an_features, "Comma-separated feature override (skips the threshold)");

  // train
  TrainOptions tr;
  std::string tr_models = "all";
  std::string tr_features;
  bool tr_unstratified = false;
  auto* c_tr = app.add_subcommand("train", "Grid search, cross-validate and evaluate classifiers");
  c_tr->add_option("--data", tr.data, "Cohort CSV with microcomputer scores")->required();
  c_tr->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
  c_tr->add_option("--models", tr_models, "all, or a comma-separated list of knn,nb,svm,dt,rf")
      ->capture_default_str();
  c_tr->add_option("--out-dir", tr.out_dir, "Output directory")->required();
  c_tr->add_option("--threshold", tr.threshold, "Feature selection threshold, in (0,1]")->capture_default_str();
  c_tr->add_option("--features", tr_features, "Comma-separated feature override (skips the threshold)");
  c_tr->add_option("--cv-folds", tr.cv_folds, "Cross-validation folds")->capture_default_str();
  c_tr->add_flag("--unstratified", tr_unstratified, "Plain random 60/20/20 split");

  // predict
  PredictOptions pr;
  auto* c_pr = app.add_subcommand("predict", "Assign tiers to students with a saved model");
  c_pr->add_option("--model", pr.model, "Model JSON written by train")->required();
  c_pr->add_option("--data", pr.data, "Cohort CSV (microcomputer column optional)")->required();
  c_pr->add_option("--out", pr.out, "Output CSV: student_id,predicted_tier")->required();

  // report
  ReportOptions rp;
  auto* c_rp = app.add_subcommand("report", "Predicted vs actual tier distribution and confusion matrix");
  c_rp->add_option("--predicted", rp.predicted, "CSV student_id,<tier>")->required();
  c_rp->add_option("--actual", rp.actual, "CSV student_id,<tier or score>")->required();
  c_rp->add_option("--out-dir", rp.out_dir, "Output directory")->required();

  // plan
  std::string pl_level;
  bool pl_all = false;
  std::string pl_out;
  std::string pl_templates;
  auto* c_pl = app.add_subcommand("plan", "Tiered instruction plan documents");
  auto* o_level = c_pl->add_option("--level", pl_level, "A, B or C");
  auto* o_all = c_pl->add_flag("--all", pl_all, "All three levels");
  o_level->excludes(o_all);
  c_pl->add_option("--out-dir", pl_out, "Write plan_<level>.txt files here (default: stdout)");
  c_pl->add_option("--plans", pl_templates, "Plan template JSON (default: built-in)");

  // survey
  SurveyOptions sv;
  std::string sv_questions;
  auto* c_sv = app.add_subcommand("survey", "Per-question Likert tallies");
  c_sv->add_option("--responses", sv.responses, "CSV respondent_id,question_id,likert")->required();
  c_sv->add_option("--out", sv.out, "Output CSV")->required();
  c_sv->add_option("--questions", sv_questions, "Comma-separated question ids expected in the output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "edutier: usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*c_gen) {
      if (gen_n < 1) throw UsageError("--n must be a positive integer, got " + std::to_string(gen_n));
      gen.n = static_cast<std::size_t>(gen_n);
      if (!gen_config.empty()) gen.config = gen_config;
      const auto ds = run_generate(gen);
      std::cout << "wrote " << ds.size() << " students to " << gen.out.string() << "\n";
    } else if (*c_an) {
      if (!an_features.empty()) an.features = split_list(an_features);
      const auto res = run_analyze(an);
      print_warnings(res.warnings);
      std::cout << "selected " << res.selection.selected.size() << " feature(s):";
      for (const auto& f : res.selection.selected) std::cout << " " << f.name;
      std::cout << "\n";
    } else if (*c_tr) {
      tr.models = parse_models(tr_models);
      tr.stratified = !tr_unstratified;
      if (!tr_features.empty()) tr.features = split_list(tr_features);
      run_train(tr);
      std::cout << io::read_file(tr.out_dir / "comparison.txt");
    } else if (*c_pr) {
      const auto rows = run_predict(pr);
      std::cout << "wrote " << rows.size() << " predictions to " << pr.out.string() << "\n";
    } else if (*c_rp) {
      const auto cmp = run_report(rp);
      std::cout << comparison_report(cmp);
    } else if (*c_pl) {
      PlanOptions opt;
      if (pl_all) {
        opt.levels = {kAllTiers.begin(), kAllTiers.end()};
      } else if (!pl_level.empty()) {
        const auto t = parse_tier(pl_level);
        if (!t) throw UsageError("--level must be A, B or C, got \"" + pl_level + "\"");
        opt.levels = {*t};
      }
      if (!pl_out.empty()) opt.out_dir = pl_out;
      if (!pl_templates.empty()) opt.templates = pl_templates;
      const auto docs = run_plan(opt);
      if (!opt.out_dir) {
        for (std::size_t i = 0; i < docs.size(); ++i) std::cout << (i ? "\n" : "") << docs[i];
      }
    } else if (*c_sv) {
      if (!sv_questions.empty()) sv.questions = split_list(sv_questions);
      const auto s = run_survey(sv);
      std::cout << "tallied " << s.questions.size() << " question(s) into " << sv.out.string() << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "edutier: usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "edutier: data error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "edutier: internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "edutier: data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "edutier: internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
