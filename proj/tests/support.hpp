#pragma once

// helpers shared by the test binaries: scratch dirs, random matrices,
// reference formulas written independently of the library, and a CLI runner

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "edutier/classifiers.hpp"
#include "edutier/dataset.hpp"
#include "edutier/io.hpp"
#include "edutier/preprocess.hpp"
#include "edutier/rng.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace edutier;

// Fresh directory under the build tree's temp area, emptied on creation.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "edutier-tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline fs::path source_path(const std::string& rel) { return fs::path(EDUTIER_SOURCE_DIR) / rel; }

// Straight two-pass product-moment correlation.
inline double pearson_two_pass(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Random labelled matrix with values in [0,1].
inline FeatureMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, std::size_t classes = 3) {
  FeatureMatrix m;
  m.rows = rows;
  for (std::size_t c = 0; c < cols; ++c) m.column_names.push_back("f" + std::to_string(c));
  for (std::size_t i = 0; i < rows * cols; ++i) m.values.push_back(rng.uniform());
  for (std::size_t r = 0; r < rows; ++r) {
    m.row_ids.push_back("r" + std::to_string(r));
    m.labels.push_back(tier_from_index(rng.below(classes)));
  }
  return m;
}

// Same, but labels depend on the first column so models have signal.
inline FeatureMatrix signal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  auto m = random_matrix(rng, rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = m.values[r * cols] + 0.2 * (rng.uniform() - 0.5);
    m.labels[r] = s > 0.66 ? Tier::A : (s > 0.33 ? Tier::B : Tier::C);
  }
  return m;
}

inline FeatureMatrix matrix_from(const std::vector<std::vector<double>>& rows, const std::vector<Tier>& labels) {
  FeatureMatrix m;
  m.rows = rows.size();
  for (std::size_t c = 0; c < rows.at(0).size(); ++c) m.column_names.push_back("f" + std::to_string(c));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    m.values.insert(m.values.end(), rows[r].begin(), rows[r].end());
    m.row_ids.push_back("r" + std::to_string(r));
  }
  m.labels = labels;
  return m;
}

inline StudentRecord full_record(const std::string& id, double score = 70.0) {
  StudentRecord r;
  r.student_id = id;
  r.language = 70;
  r.mathematics = 70;
  r.english = 70;
  r.pe = 70;
  r.database = 70;
  r.java = 70;
  r.computer_network = 70;
  r.study_time = 8;
  r.attendance = 2;
  r.microcomputer = score;
  return r;
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline CliResult run_cli(const std::vector<std::string>& args) {
  std::string cmd = shell_quote(EDUTIER_CLI);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " 2>&1";
  CliResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

// Every regular file under `root`, keyed by relative path, with contents.
inline std::vector<std::pair<std::string, std::string>> snapshot_tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out.emplace_back(fs::relative(e.path(), root).generic_string(), io::read_file(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testing_support
