#include <gtest/gtest.h>

#include "edutier/correlation.hpp"
#include "edutier/dataset.hpp"
#include "support.hpp"

using namespace edutier;
using namespace testing_support;

namespace {

const std::string kHeader =
    "student_id,gender,language,mathematics,english,pe,database,java,computer_network,study_time,attendance,"
    "microcomputer\n";

fs::path write_csv_text(const std::string& name, const std::string& body) {
  const auto dir = scratch_dir("dataset-" + name);
  const auto p = dir / "cohort.csv";
  io::write_file(p, body);
  return p;
}

std::vector<double> column_of(const Dataset& ds, std::string_view col) {
  std::vector<double> out;
  for (const auto& r : ds.records) out.push_back(*column_value(r, col));
  return out;
}

}  // namespace

TEST(LoadCsv, ThreeValidRows) {
  const auto p = write_csv_text("three", kHeader +
                                             "S1,M,70,80,75,90,66,71,72,8.5,1,77\n"
                                             "S2,F,60,55,65,70,58,49,51,4,5,52\n"
                                             "S3,M,88,92,85,80,90,95,93,12,0,94\n");
  const Dataset ds = load_csv(p);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_TRUE(std::holds_alternative<LoadedFrom>(ds.provenance));
  EXPECT_EQ(std::get<LoadedFrom>(ds.provenance).path, p.string());
  EXPECT_EQ(ds.records[1].student_id, "S2");
  EXPECT_EQ(ds.records[1].gender, Gender::female);
  EXPECT_EQ(ds.records[0].study_time, 8.5);
  EXPECT_EQ(ds.records[2].attendance, 0);
  EXPECT_EQ(ds.records[2].microcomputer, 94.0);
}

TEST(LoadCsv, OutOfRangeCitesRowAndColumn) {
  const auto p = write_csv_text("range", kHeader + "S1,M,70,101,75,90,66,71,72,8.5,1,77\n");
  try {
    load_csv(p);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column \"mathematics\""), std::string::npos) << msg;
  }
}

TEST(LoadCsv, EmptyCellIsMissing) {
  const auto p = write_csv_text("missing", kHeader + "S1,M,70,80,,90,66,71,72,8.5,1,77\n");
  const Dataset ds = load_csv(p);
  EXPECT_FALSE(ds.records[0].english.has_value());
  EXPECT_EQ(validate(ds).missing_count("english"), 1u);
}

TEST(LoadCsv, MissingFileNamesPath) {
  try {
    load_csv("/nonexistent/cohort.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cohort.csv"), std::string::npos);
  }
}

TEST(LoadCsv, HeaderMissingColumnsListed) {
  const auto p = write_csv_text("header", "student_id,gender,language,mathematics\nS1,M,1,2\n");
  try {
    load_csv(p);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("\"java\""), std::string::npos) << msg;
    EXPECT_NE(msg.find("\"attendance\""), std::string::npos) << msg;
  }
}

TEST(LoadCsv, RejectsBadCells) {
  EXPECT_THROW(load_csv(write_csv_text("gender", kHeader + "S1,X,70,80,75,90,66,71,72,8.5,1,77\n")), DataError);
  EXPECT_THROW(load_csv(write_csv_text("num", kHeader + "S1,M,70,eighty,75,90,66,71,72,8.5,1,77\n")), DataError);
  EXPECT_THROW(load_csv(write_csv_text("late", kHeader + "S1,M,70,80,75,90,66,71,72,8.5,1.5,77\n")), DataError);
  EXPECT_THROW(load_csv(write_csv_text("neg", kHeader + "S1,M,70,80,75,90,66,71,72,-1,1,77\n")), DataError);
  EXPECT_THROW(load_csv(write_csv_text("cells", kHeader + "S1,M,70,80\n")), DataError);
  EXPECT_THROW(load_csv(write_csv_text("dup", kHeader + "S1,M,70,80,75,90,66,71,72,8,1,77\n"
                                                       "S1,F,70,80,75,90,66,71,72,8,1,77\n")),
               DataError);
}

TEST(LoadCsv, TargetColumnOptional) {
  std::string header = kHeader.substr(0, kHeader.size() - std::string(",microcomputer\n").size()) + "\n";
  const auto p = write_csv_text("notarget", header + "S1,M,70,80,75,90,66,71,72,8.5,1\n");
  const Dataset ds = load_csv(p);
  EXPECT_FALSE(ds.has_target_column);
  EXPECT_FALSE(ds.records[0].microcomputer.has_value());
  EXPECT_EQ(to_csv(ds), io::read_file(p));
}

TEST(LoadCsv, WriteThenLoadIsIdentity) {
  auto cfg = default_generator_config();
  cfg.n = 300;
  cfg.missing_rate = 0.1;
  const Dataset ds = generate_synthetic(cfg);
  const auto p = scratch_dir("roundtrip") / "c.csv";
  write_csv(ds, p);
  const Dataset back = load_csv(p);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.records[i], ds.records[i]) << i;
  EXPECT_EQ(to_csv(back), to_csv(ds));
}

TEST(Generate, EmptyCohort) {
  auto cfg = default_generator_config();
  cfg.n = 0;
  const Dataset ds = generate_synthetic(cfg);
  EXPECT_TRUE(ds.empty());
  EXPECT_TRUE(std::holds_alternative<SyntheticFrom>(ds.provenance));
}

TEST(Generate, DeterministicBytes) {
  const auto cfg = default_generator_config();
  EXPECT_EQ(to_csv(generate_synthetic(cfg)), to_csv(generate_synthetic(cfg)));
  auto other = cfg;
  other.seed = 43;
  EXPECT_NE(to_csv(generate_synthetic(cfg)), to_csv(generate_synthetic(other)));
}

TEST(Generate, ProvenanceCarriesSeedAndDigest) {
  const auto cfg = default_generator_config();
  const Dataset ds = generate_synthetic(cfg);
  const auto& prov = std::get<SyntheticFrom>(ds.provenance);
  EXPECT_EQ(prov.seed, 42u);
  EXPECT_EQ(prov.config_digest, config_digest(cfg));
  EXPECT_EQ(prov.config_digest.size(), 64u);
}

TEST(Generate, RecordsSatisfyInvariants) {
  const Dataset ds = generate_synthetic(default_generator_config());
  ASSERT_EQ(ds.size(), 2000u);
  const auto report = validate(ds);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.missing_count("microcomputer"), 0u);
  // roughly 2% of the 9 numeric feature cells are masked
  const double rate = static_cast<double>(report.total_missing()) / (2000.0 * 9.0);
  EXPECT_NEAR(rate, 0.02, 0.005);
  std::set<std::string> ids;
  for (const auto& r : ds.records) ids.insert(r.student_id);
  EXPECT_EQ(ids.size(), ds.size());
}

// Correlations over the complete cases, checked with the two-pass formula.
TEST(Generate, DefaultCohortCorrelationStructure) {
  auto cfg = default_generator_config();
  cfg.missing_rate = 0.0;
  const Dataset ds = generate_synthetic(cfg);
  const auto target = column_of(ds, "microcomputer");
  EXPECT_GE(pearson_two_pass(column_of(ds, "java"), target), 0.60);
  EXPECT_LT(pearson_two_pass(column_of(ds, "attendance"), target), 0.0);
  for (const char* positive : {"mathematics", "database", "java", "computer_network", "study_time"}) {
    EXPECT_GT(pearson_two_pass(column_of(ds, positive), target), 0.0) << positive;
  }
}

TEST(Validate, CleanDataHasNoIssues) {
  Dataset ds;
  ds.records = {full_record("a"), full_record("b")};
  const auto r = validate(ds);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.issue_count(), 0u);
  EXPECT_EQ(r.total_missing(), 0u);
}

TEST(Validate, CountsMissingStudyTime) {
  Dataset ds;
  ds.records = {full_record("a"), full_record("b")};
  ds.records[1].study_time.reset();
  const auto r = validate(ds);
  EXPECT_EQ(r.missing_count("study_time"), 1u);
  EXPECT_EQ(r.total_missing(), 1u);
  EXPECT_TRUE(r.ok());
}

TEST(Validate, ReportsDuplicateIds) {
  Dataset ds;
  ds.records = {full_record("dup"), full_record("x"), full_record("dup")};
  const auto r = validate(ds);
  ASSERT_EQ(r.duplicate_ids.size(), 1u);
  EXPECT_EQ(r.duplicate_ids[0], "dup");
  EXPECT_FALSE(r.ok());
}

TEST(Validate, ReportsRangeViolations) {
  Dataset ds;
  ds.records = {full_record("a"), full_record("b")};
  ds.records[1].pe = 120;
  ds.records[0].attendance = -1;
  const auto r = validate(ds);
  ASSERT_EQ(r.range_violations.size(), 2u);
  EXPECT_EQ(r.range_violations[0].row, 1u);
  EXPECT_EQ(r.range_violations[0].column, "attendance");
  EXPECT_EQ(r.range_violations[1].row, 2u);
  EXPECT_EQ(r.range_violations[1].column, "pe");
}

TEST(GeneratorConfig, ShippedFileMatchesBuiltIn) {
  const auto shipped = nlohmann::json::parse(io::read_file(source_path("data/generator_default.json")));
  EXPECT_EQ(shipped, config_to_json(default_generator_config()));
  EXPECT_EQ(config_digest(config_from_json(shipped)), config_digest(default_generator_config()));
}

TEST(GeneratorConfig, JsonRoundTrip) {
  auto cfg = default_generator_config();
  cfg.n = 17;
  cfg.seed = 99;
  const auto back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_EQ(to_csv(generate_synthetic(back)), to_csv(generate_synthetic(cfg)));
}

TEST(GeneratorConfig, RejectsWrongSigns) {
  auto cfg = default_generator_config();
  for (auto& t : cfg.target.terms) {
    if (t.column == "attendance") t.weight = 1.0;
  }
  EXPECT_THROW(check_config(cfg), DataError);
  auto bad_rate = default_generator_config();
  bad_rate.missing_rate = 1.5;
  EXPECT_THROW(check_config(bad_rate), DataError);
}
