#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "edutier/error.hpp"
#include "edutier/evaluation.hpp"
#include "edutier/io.hpp"
#include "edutier/tier.hpp"

namespace edutier {

// ---------------------------------------------------------------------------
// Tiered instruction plans
// ---------------------------------------------------------------------------

struct TierPlan {
  Tier level = Tier::A;
  std::string objective;
  std::string content;
  std::string assignment;

  bool operator==(const TierPlan&) const = default;
};

// Plan texts per tier, indexed by tier_index.
using PlanTemplates = std::array<TierPlan, kTierCount>;

/// The shipped template set (identical to data/tier_plans.json).
inline const PlanTemplates& builtin_plan_templates() {
  static const PlanTemplates kPlans{{
      {Tier::A,
       "Guided by the principles of creativity, develop independent thinking skills, a spirit of "
       "inquiry, and self-driven abilities.",
       "Showcases the latest technology trends and emphasizes the integration of interdisciplinary "
       "knowledge.",
       "Design open-ended questions and promote independent research and self-directed learning."},
      {Tier::B,
       "Follow the principle of integrated application to cultivate the ability to apply knowledge and "
       "problem-solving skills.",
       "In conjunction with case studies, introducing investigative content on top of fundamental "
       "knowledge.",
       "Design projects that combine theory and practice, applying acquired knowledge to solve "
       "real-world problems."},
      {Tier::C,
       "Adhere to the principle of consolidating fundamentals, focusing on the mastery of basic "
       "knowledge and core skills.",
       "Present conceptual content using a variety of media, avoiding complex and abstract theories.",
       "Focus on the practice of basic skills, provide fundamental exercises to reinforce classroom "
       "content."},
  }};
  return kPlans;
}

inline nlohmann::json plan_templates_to_json(const PlanTemplates& plans) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& p : plans) {
    j[tier_name(p.level)] = {
        {"teaching_objective", p.objective}, {"teaching_content", p.content}, {"assignment", p.assignment}};
  }
  return j;
}

/// Reads a template file with one object per level ("A", "B", "C"), each
/// holding non-empty "teaching_objective", "teaching_content" and
/// "assignment" strings.
inline PlanTemplates load_plan_templates(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": not valid JSON: " + e.what());
  }
  PlanTemplates plans;
  for (Tier t : kAllTiers) {
    const auto key = tier_name(t);
    if (!j.contains(key)) throw DataError(path.string() + ": no plan for level " + key);
    const auto& e = j.at(key);
    auto text = [&](const char* field) {
      if (!e.contains(field) || !e.at(field).is_string() || e.at(field).get<std::string>().empty()) {
        throw DataError(path.string() + ": level " + key + " needs a non-empty \"" + field + "\"");
      }
      return e.at(field).get<std::string>();
    };
    plans[tier_index(t)] = {t, text("teaching_objective"), text("teaching_content"), text("assignment")};
  }
  return plans;
}

inline TierPlan generate_plan(Tier level, const PlanTemplates& plans = builtin_plan_templates()) {
  return plans[tier_index(level)];
}

inline std::string plan_document(const TierPlan& p) {
  return "Level " + tier_name(p.level) + "\n" + "Teaching objective: " + p.objective + "\n" +
         "Teaching content: " + p.content + "\n" + "Assignment: " + p.assignment + "\n";
}

// ---------------------------------------------------------------------------
// Predicted vs actual comparison
// ---------------------------------------------------------------------------

/// Integer percentages of `counts`: each rounded half up, then corrected to
/// total 100 by largest remainder. A short total bumps the rounded-down
/// buckets with the largest remainders; an excess takes back from the
/// rounded-up buckets with the smallest. Ties go to the lowest index.
template <std::size_t N>
std::array<int, N> rounded_percentages(const std::array<std::size_t, N>& counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  std::array<int, N> pct{};
  if (n == 0) return pct;
  std::array<std::size_t, N> rem{};  // remainder of 100*c/n, in units of 1/n
  int sum = 0;
  for (std::size_t i = 0; i < N; ++i) {
    rem[i] = (100 * counts[i]) % n;
    pct[i] = static_cast<int>((100 * counts[i]) / n) + (2 * rem[i] >= n ? 1 : 0);
    sum += pct[i];
  }
  std::array<std::size_t, N> order{};
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  if (sum < 100) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; sum < 100; k = (k + 1) % N) {
      if (2 * rem[order[k]] < n) {
        ++pct[order[k]];
        ++sum;
      }
    }
  } else if (sum > 100) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] < rem[b]; });
    for (std::size_t k = 0; sum > 100; k = (k + 1) % N) {
      if (2 * rem[order[k]] >= n && rem[order[k]] != 0) {
        --pct[order[k]];
        --sum;
      }
    }
  }
  return pct;
}

struct CohortComparison {
  std::array<std::size_t, kTierCount> predicted_counts{};
  std::array<std::size_t, kTierCount> actual_counts{};
  std::array<int, kTierCount> predicted_pct{};
  std::array<int, kTierCount> actual_pct{};
  ConfusionMatrix confusion;
};

inline CohortComparison compare_cohorts(std::span<const Tier> predicted, std::span<const Tier> actual) {
  if (predicted.size() != actual.size()) {
    throw DataError("compare_cohorts: " + std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(actual.size()) + " actual results");
  }
  if (predicted.empty()) throw DataError("compare_cohorts: empty cohort");
  CohortComparison c;
  c.confusion = confusion(actual, predicted);
  for (Tier t : kAllTiers) {
    c.predicted_counts[tier_index(t)] = c.confusion.predicted_count(t);
    c.actual_counts[tier_index(t)] = c.confusion.actual_count(t);
  }
  c.predicted_pct = rounded_percentages(c.predicted_counts);
  c.actual_pct = rounded_percentages(c.actual_counts);
  return c;
}

/// Two-row text table (Predicted, Actual) with `count(pct%)` cells under
/// "Level A (80-100)", "Level B (60-79)" and "Level C (<60)".
inline std::string comparison_report(const CohortComparison& c) {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto row = [&](const char* name, const auto& counts, const auto& pct) {
    std::string out = pad(name, 11);
    for (std::size_t i = 0; i < kTierCount; ++i) {
      std::string cell = std::to_string(counts[i]) + "(" + std::to_string(pct[i]) + "%)";
      out += i + 1 < kTierCount ? pad(cell, 18) : cell;
    }
    return out + "\n";
  };
  std::string out = pad("", 11) + pad("Level A (80-100)", 18) + pad("Level B (60-79)", 18) + "Level C (<60)\n";
  out += row("Predicted", c.predicted_counts, c.predicted_pct);
  out += row("Actual", c.actual_counts, c.actual_pct);
  return out;
}

// ---------------------------------------------------------------------------
// Survey tallies
// ---------------------------------------------------------------------------

// Likert levels: 5 strongly agree, 4 agree, 3 neutral, 2 disagree,
// 1 strongly disagree.
inline constexpr std::array<const char*, 5> kLikertNames{"strongly_agree", "agree", "neutral", "disagree",
                                                         "strongly_disagree"};

struct SurveyResponse {
  std::string question_id;
  int likert = 0;
};

struct QuestionSummary {
  std::string question_id;
  std::array<std::size_t, 5> counts{};  // levels 5, 4, 3, 2, 1
  std::array<int, 5> percentages{};
  bool zero_responses = false;

  std::size_t responses() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

struct SurveySummary {
  std::vector<QuestionSummary> questions;
};

/// Per-question tallies. Questions appear in `expected_questions` order,
/// then in order of first appearance; expected questions without answers
/// are kept with `zero_responses` set.
inline SurveySummary aggregate_survey(std::span<const SurveyResponse> responses,
                                      const std::vector<std::string>& expected_questions = {}) {
  if (responses.empty()) throw DataError("survey has no responses");
  SurveySummary s;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const std::string& q) -> QuestionSummary& {
    auto [it, inserted] = index.emplace(q, s.questions.size());
    if (inserted) s.questions.push_back({q, {}, {}, false});
    return s.questions[it->second];
  };
  for (const auto& q : expected_questions) slot(q);
  for (const auto& r : responses) {
    if (r.likert < 1 || r.likert > 5) {
      throw DataError("likert level " + std::to_string(r.likert) + " for question \"" + r.question_id +
                      "\" is outside 1..5");
    }
    ++slot(r.question_id).counts[static_cast<std::size_t>(5 - r.likert)];
  }
  for (auto& q : s.questions) {
    q.zero_responses = q.responses() == 0;
    q.percentages = rounded_percentages(q.counts);
  }
  return s;
}

/// Reads `respondent_id,question_id,likert`. A respondent may answer each
/// question once.
inline std::vector<SurveyResponse> load_survey_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());
  const auto lines = io::read_lines(path);
  if (lines.empty() || lines.front() != "respondent_id,question_id,likert") {
    throw DataError(path.string() + ": header must be \"respondent_id,question_id,likert\"");
  }
  std::vector<SurveyResponse> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t row = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    ++row;
    const auto cells = io::split_csv_line(lines[i]);
    const std::string where = path.string() + ": row " + std::to_string(row);
    if (cells.size() != 3) throw DataError(where + ": expected 3 cells");
    if (cells[0].empty() || cells[1].empty()) throw DataError(where + ": empty respondent or question id");
    double v = 0.0;
    if (!io::parse_double(cells[2], v) || v != std::floor(v)) {
      throw DataError(where + ": likert \"" + cells[2] + "\" is not an integer");
    }
    if (v < 1 || v > 5) throw DataError(where + ": likert " + cells[2] + " is outside 1..5");
    if (!seen.emplace(cells[0], cells[1]).second) {
      throw DataError(where + ": duplicate answer by \"" + cells[0] + "\" to \"" + cells[1] + "\"");
    }
    out.push_back({cells[1], static_cast<int>(v)});
  }
  return out;
}

inline std::string survey_csv(const SurveySummary& s) {
  std::string out = "question_id,responses";
  for (const char* n : kLikertNames) out += std::string(",") + n;
  for (const char* n : kLikertNames) out += std::string(",pct_") + n;
  out += ",zero_responses\n";
  for (const auto& q : s.questions) {
    out += q.question_id + "," + std::to_string(q.responses());
    for (auto c : q.counts) out += "," + std::to_string(c);
    for (auto p : q.percentages) out += "," + std::to_string(p);
    out += q.zero_responses ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace edutier
