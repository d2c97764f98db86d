#pragma once

// Dataset recipes: how a CSV (or the synthetic generator) becomes X, Y, S.
//
//   name = adult
//   source = csv                    # or synthetic
//   csv = adult.csv                 # relative to the data dir
//   task = classification           # or regression
//   target = income
//   target_map = {">50K": 1, "<=50K": 0}
//   sensitive = sex
//   sensitive_map = {Male: 1, Female: 0}
//   sensitive_threshold = 25        # alternative to a map: value > 25 -> 1
//   numeric = [age, hours_per_week]
//   categorical = [workclass, race]
//   filter = {race: [African-American, Caucasian]}
//   filter_any = {Race_White: [1], Race_Black: [1]}
//   normalize = standardize         # X columns; or none
//   standardize_target = false      # scale Y to unit variance before fitting
//   standardize_sensitive = false
//   drop_first = true               # one-hot reference level
//
// S = 1 marks the privileged group (the DI denominator) and Y = 1 the
// favorable outcome.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpls/data.hpp"
#include "fairpls/types.hpp"

namespace fairpls {

class KvConfig;

enum class Task { classification, regression };
const char* task_name(Task t);
Task parse_task(const std::string& s);

struct Recipe {
  std::string name;
  std::string source = "csv";
  std::string csv;
  std::string synthetic;  // optional params file for source = synthetic
  Task task = Task::classification;
  std::string target;
  ColumnRule target_rule;
  std::string sensitive;
  ColumnRule sensitive_rule;
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;
  std::map<std::string, std::set<std::string>> filter;
  std::map<std::string, std::set<std::string>> filter_any;
  Normalization normalization = Normalization::standardize;
  bool standardize_target = false;
  bool standardize_sensitive = false;
  bool drop_first = true;
  std::string base_dir;  // directory of the recipe file
};

Recipe recipe_from_config(const KvConfig& cfg);
Recipe load_recipe(const std::string& path);

// Data root: FAIRPLS_DATA_DIR, else the build-time default.
std::string default_data_dir();

struct PreparedData {
  std::string name;
  Task task = Task::classification;
  Matrix x_raw;  // encoded, not centered
  std::vector<std::string> x_names;
  Vector y;  // raw target (0/1 for classification)
  Vector s;  // 0/1 sensitive indicator
  Normalization normalization = Normalization::standardize;
  bool standardize_target = false;
  bool standardize_sensitive = false;

  Index rows() const { return x_raw.rows(); }
  std::vector<int> groups() const;
  std::vector<int> labels() const;  // y as 0/1; throws for regression
};

// seed overrides the synthetic generator seed when set.
PreparedData prepare(const Recipe& recipe, std::optional<std::uint64_t> seed = std::nullopt);

// Centered blocks for the rows in `rows`, with statistics from those rows only.
struct CenteredBlocks {
  CenteredMatrix X, Y, S;
};
CenteredBlocks center_rows(const PreparedData& data, const std::vector<std::size_t>& rows);
// Evaluation rows centered with statistics fitted elsewhere.
CenteredBlocks center_like(const CenteredBlocks& fitted, const PreparedData& data,
                           const std::vector<std::size_t>& rows);

}  // namespace fairpls
