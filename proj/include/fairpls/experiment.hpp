#pragma once

// Experiment harness: representation runs (A), downstream prediction runs (B),
// k selection, baselines and the runtime benchmark.
//
// Experiment config keys (key = value files, see config.hpp):
//   recipe = recipes/adult.kv        # relative to the config file
//   target / sensitive / task        # optional overrides of the recipe
//   method = fair-pls                # pls | fair-pls | eo-fair-pls | kernel-fair-pls | vanilla
//   eta_grid = [0, 1, 2, 10]
//   k = 3                            # or cv-select
//   k_max = 10                       # candidate range for cv-select
//   k_folds = 7
//   n_splits = 3
//   train_fraction = 0.7
//   seed = 0
//   tau = 0.5                        # vanilla threshold
//   tau_grid = [0.1, 0.4, 0.8]      # compare
//   kernel_x = {kind: rbf, bandwidth: median}
//   kernel_s = linear
//   learning_rate / max_iter / tol / restarts   # gradient ascent
//   ridge = 0                        # EO ridge on C_YY
//   lambda = 1e-6                    # GLM ridge
//   threads = 1

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpls/fair_pls.hpp"
#include "fairpls/kernel.hpp"
#include "fairpls/metrics.hpp"
#include "fairpls/recipe.hpp"

namespace fairpls {

class KvConfig;

enum class Method { pls, fair_pls, eo_fair_pls, kernel_fair_pls, vanilla };
const char* method_name(Method m);
Method parse_method(const std::string& s);

struct ExperimentConfig {
  std::string recipe_path;
  std::string target;     // overrides the recipe when non-empty
  std::string sensitive;  // idem
  std::optional<Task> task;
  std::vector<double> eta_grid{0.0};
  int k = 2;
  bool k_cv = false;
  int k_max = 10;
  int k_folds = 7;
  int n_splits = 3;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  Method method = Method::fair_pls;
  double tau = 0.5;
  std::vector<double> tau_grid{0.1, 0.4, 0.8};
  KernelSpec kernel_x = KernelSpec::rbf_median();
  KernelSpec kernel_s = KernelSpec::linear();
  GdParams gd;
  double ridge = 0.0;
  double glm_lambda = 1e-6;
  int threads = 1;
  bool allow_large_n = false;
  std::string out_dir = ".";

  void validate() const;
};

ExperimentConfig experiment_config_from(const KvConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);

// Recipe with the config's target/sensitive/task overrides applied.
PreparedData load_experiment_data(const ExperimentConfig& cfg);

inline constexpr Index kMaxKernelRows = 20000;

struct ResultRow {
  std::string dataset;
  std::string method;
  double eta = 0.0;
  int k = 0;
  int fold = 0;
  std::uint64_t split_seed = 0;
  std::string model = "none";  // downstream predictor: none | lr
  FairnessReport report;
  double wall_time_ms = 0.0;
  std::string status = "ok";
};

// Metric columns in output order; values not defined for a row are NaN.
const std::vector<std::string>& report_columns();
std::vector<double> report_values(const FairnessReport& r);

struct ResultTable {
  std::vector<ResultRow> rows;
};

struct SummaryRow {
  std::string dataset, method, model;
  double eta = 0.0;
  int k = 0;
  int n_ok = 0;
  int n_failed = 0;
  std::vector<double> mean, std;  // aligned with report_columns()
};

// Groups by (dataset, method, model, eta, k) in first-seen order; std uses n - 1.
std::vector<SummaryRow> summarize(const ResultTable& table);

// Fitted representation on training rows; scores() evaluates it on any rows.
struct Representation {
  Method method = Method::fair_pls;
  CenteredBlocks fit_blocks;
  PlsModel pls;
  FairPlsModel fair;
  KernelFairPlsModel kernel;
  std::vector<Index> selected;  // vanilla: kept component indices
  Matrix loadings;              // empty when reconstruction is undefined

  Matrix scores(const CenteredMatrix& X) const;
  int k() const;
};

Representation fit_representation(const ExperimentConfig& cfg, const PreparedData& data,
                                  const std::vector<std::size_t>& train, double eta, int k);

ResultTable run_experiment_a(const ExperimentConfig& cfg, const PreparedData& data);
ResultTable run_experiment_b(const ExperimentConfig& cfg, const PreparedData& data);

struct KSelection {
  double eta = 0.0;
  int k = 1;
  std::vector<double> objective;  // CV mean objective for k = 1..k_max
};
std::vector<KSelection> select_k(const ExperimentConfig& cfg, const PreparedData& data);

struct BenchRow {
  Index n = 0, d = 0;
  int k = 0;
  std::string method;
  int repeats = 0;
  double median_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
};
std::vector<BenchRow> run_benchmark(const std::vector<std::pair<Index, Index>>& sizes, int k, int repeats,
                                    std::uint64_t seed = 0, double eta = 1.0);

struct CompareRow {
  std::string method;  // vanilla | fair-pls | external
  double param = 0.0;  // tau or eta
  int fold = 0;
  int n_components = 0;
  double cov2_target = 0.0;
  double cov2_sensitive = 0.0;
  bool empty = false;  // no component selected
};
// external: optional n x r representation aligned with the dataset rows.
std::vector<CompareRow> compare_baselines(const ExperimentConfig& cfg, const PreparedData& data,
                                          const Matrix* external = nullptr);

// Cov² of a representation against target and sensitive blocks, on centered columns.
std::pair<double, double> score_representation(const Matrix& T, const Matrix& Y, const Matrix& S);

// Output writers. Result CSVs never contain timings (timings.csv does), so
// reruns with the same config and seed are byte-identical.
void write_results(const std::string& out_dir, const std::string& stem, const ResultTable& table);
void write_selection(const std::string& path, const std::vector<KSelection>& sel);
void write_bench(const std::string& path, const std::vector<BenchRow>& rows);
void write_compare(const std::string& path, const std::vector<CompareRow>& rows);

struct AuditReport {
  int groups_checked = 0;
  int mismatches = 0;
  std::vector<std::string> messages;
  bool ok() const { return mismatches == 0 && groups_checked > 0; }
};
// Recomputes every summary mean/std from the per-row CSV next to it.
AuditReport self_audit(const std::string& out_dir, const std::string& stem);

// Refits the first split/fold after overwriting every test row with sentinel
// values and checks that all fitted parameters are bit-identical.
AuditReport leakage_check(const ExperimentConfig& cfg, const PreparedData& data);

}  // namespace fairpls
