#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"
#include "fairpls/experiment.hpp"
#include "fairpls/serialize.hpp"
#include "test_util.hpp"

using namespace fairpls;
namespace fs = std::filesystem;

namespace {

PreparedData synthetic_data(std::uint64_t seed = 0) {
  return prepare(load_recipe(default_config_dir() + "/recipes/synthetic.kv"), seed);
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.recipe_path = default_config_dir() + "/recipes/synthetic.kv";
  c.eta_grid = {0.0, 1.0};
  c.k = 2;
  c.n_splits = 3;
  c.k_folds = 3;
  c.gd.max_iter = 500;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("fairpls_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Two-group data whose features ignore the group label.
PreparedData independent_groups(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PreparedData d;
  d.name = "indep";
  d.task = Task::classification;
  d.x_raw = tu::randn(600, 4, rng);
  Vector lin = d.x_raw.col(0) - d.x_raw.col(1) + 0.5 * tu::randn(600, 1, rng).col(0);
  d.y.resize(600);
  d.s.resize(600);
  for (Index i = 0; i < 600; ++i) {
    d.y(i) = lin(i) > 0 ? 1 : 0;
    d.s(i) = static_cast<double>(rng() % 2);
  }
  for (int j = 0; j < 4; ++j) d.x_names.push_back("f" + std::to_string(j));
  return d;
}

}  // namespace

TEST(Recipe, SyntheticRecipeLoads) {
  PreparedData d = synthetic_data();
  EXPECT_EQ(d.rows(), 1000);
  EXPECT_EQ(d.x_raw.cols(), 7);
  EXPECT_EQ(d.task, Task::regression);
  EXPECT_NEAR(d.s.sum(), 500.0, 0.0);
}

TEST(Recipe, RejectsBadDefinitions) {
  EXPECT_THROW(recipe_from_config(KvConfig::parse("source = csv\ncsv = a.csv\ntarget = y\nsensitive = y\nnumeric = [a]\n")),
               Error);
  EXPECT_THROW(recipe_from_config(KvConfig::parse("csv = a.csv\ntarget = y\nsensitive = s\nnumeric = [a, a]\n")), Error);
  EXPECT_THROW(recipe_from_config(KvConfig::parse(
                   "csv = a.csv\ntarget = y\nsensitive = s\nnumeric = [a]\nsensitive_map = {a: 1}\nsensitive_threshold = 3\n")),
               Error);
}

TEST(Config, ExperimentKeysAndValidation) {
  KvConfig kv = KvConfig::parse("recipe = recipes/synthetic.kv\neta_grid = [0, 2]\nk = cv-select\nk_folds = 4\nmethod = eo-fair-pls\n");
  ExperimentConfig c = experiment_config_from(kv);
  EXPECT_TRUE(c.k_cv);
  EXPECT_EQ(c.k_folds, 4);
  EXPECT_EQ(c.method, Method::eo_fair_pls);
  EXPECT_EQ(c.eta_grid, (std::vector<double>{0, 2}));
  EXPECT_TRUE(fs::exists(c.recipe_path));
  ExperimentConfig bad = c;
  bad.eta_grid = {};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.eta_grid = {-1};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.k_folds = 1;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(parse_method("pca"), Error);
}

TEST(ExperimentA, RowCountsAndEtaZeroMatchesPls) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  ResultTable t = run_experiment_a(c, d);
  ASSERT_EQ(t.rows.size(), 6u);
  for (const auto& r : t.rows) EXPECT_EQ(r.status, "ok");
  EXPECT_EQ(summarize(t).size(), 2u);

  ExperimentConfig p = c;
  p.method = Method::pls;
  p.eta_grid = {0.0};
  ResultTable tp = run_experiment_a(p, d);
  for (int s = 0; s < 3; ++s) {
    const auto& fair = t.rows[static_cast<std::size_t>(s)].report;
    const auto& pls = tp.rows[static_cast<std::size_t>(s)].report;
    EXPECT_NEAR(fair.cov2_rep_sensitive, pls.cov2_rep_sensitive, 1e-6 * std::max(1.0, pls.cov2_rep_sensitive));
  }
}

TEST(ExperimentA, DeterministicAcrossRunsAndThreads) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  fs::path a = scratch("det_a"), b = scratch("det_b");
  write_results(a.string(), "run", run_experiment_a(c, d));
  c.threads = 4;
  write_results(b.string(), "run", run_experiment_a(c, d));
  for (const char* f : {"run_results.csv", "run_summary.csv", "run_results.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  AuditReport audit = self_audit(a.string(), "run");
  EXPECT_TRUE(audit.ok());
  EXPECT_EQ(audit.groups_checked, 2);
}

TEST(ExperimentA, SelfAuditDetectsTampering) {
  PreparedData d = synthetic_data();
  fs::path a = scratch("tamper");
  write_results(a.string(), "run", run_experiment_a(base_config(), d));
  std::string csv = slurp(a / "run_results.csv");
  // bump one metric value in the first data row
  const auto line = csv.find('\n') + 1;
  const auto last = csv.find('\n', line);
  std::string row = csv.substr(line, last - line);
  const auto comma = row.find(",ok,") + 4;
  const auto next = row.find(',', comma);
  row.replace(comma, next - comma, "123.5");
  csv.replace(line, last - line, row);
  std::ofstream(a / "run_results.csv") << csv;
  EXPECT_FALSE(self_audit(a.string(), "run").ok());
}

TEST(ExperimentA, LeakageCheckPasses) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  EXPECT_TRUE(leakage_check(c, d).ok());
  c.k_cv = true;
  c.k_max = 4;
  c.method = Method::pls;
  EXPECT_TRUE(leakage_check(c, d).ok());
}

TEST(ExperimentB, IndependentSensitiveIsInert) {
  PreparedData d = independent_groups(3);
  ExperimentConfig c = base_config();
  c.k_folds = 7;
  c.eta_grid = {0.0, 1.0};
  auto sum = summarize(run_experiment_b(c, d));
  ASSERT_EQ(sum.size(), 2u);
  const auto& cols = report_columns();
  const auto di = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), "di") - cols.begin());
  EXPECT_NEAR(sum[0].mean[di], sum[1].mean[di], 0.05);
  EXPECT_EQ(sum[0].n_ok, 7);
}

TEST(ExperimentB, PerRowErrorsAreRecorded) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  c.k = 50;  // more components than features
  ResultTable t = run_experiment_a(c, d);
  for (const auto& r : t.rows) EXPECT_NE(r.status, "ok");
  EXPECT_EQ(summarize(t)[0].n_failed, 3);
}

TEST(SelectK, DuplicatedFeaturesDoNotChangeK) {
  PreparedData d = synthetic_data(2);
  ExperimentConfig c = base_config();
  c.method = Method::pls;
  c.k_max = 7;
  c.eta_grid = {0.0};
  const int k_plain = select_k(c, d)[0].k;
  PreparedData dup = d;
  dup.x_raw.conservativeResize(Eigen::NoChange, 8);
  dup.x_raw.col(7) = d.x_raw.col(2);
  dup.x_names.push_back("x3_copy");
  dup.normalization = Normalization::none;
  d.normalization = Normalization::none;
  const int k_ref = select_k(c, d)[0].k;
  c.k_max = 8;
  EXPECT_EQ(select_k(c, dup)[0].k, k_ref);
  EXPECT_GE(k_plain, 1);
}

TEST(SelectK, TiesGoToSmallerK) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  c.eta_grid = {0.0, 10.0};
  c.k_max = 5;
  auto sel = select_k(c, d);
  ASSERT_EQ(sel.size(), 2u);
  for (const auto& s : sel) {
    ASSERT_EQ(s.objective.size(), 5u);
    const double best = *std::max_element(s.objective.begin(), s.objective.end());
    EXPECT_EQ(s.objective[static_cast<std::size_t>(s.k - 1)], best);
    for (int k = 1; k < s.k; ++k) EXPECT_LT(s.objective[static_cast<std::size_t>(k - 1)], best);
  }
}

TEST(Compare, HighTauKeepsAllAndExternalMatchesOwnScores) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  c.k = 3;
  c.k_folds = 2;
  c.tau_grid = {0.99};
  c.eta_grid = {0.5};
  // external = fold-0 fair-pls scores on all rows
  auto folds = split_folds(static_cast<std::size_t>(d.rows()), 2, c.seed);
  Representation rep = fit_representation(c, d, folds[0].train, 0.5, 3);
  std::vector<std::size_t> all(static_cast<std::size_t>(d.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Matrix ext = rep.scores(center_like(rep.fit_blocks, d, all).X);
  auto rows = compare_baselines(c, d, &ext);
  const CompareRow *van = nullptr, *fair = nullptr, *external = nullptr;
  for (const auto& r : rows)
    if (r.fold == 0) (r.method == "vanilla" ? van : r.method == "fair-pls" ? fair : external) = &r;
  ASSERT_TRUE(van && fair && external);
  EXPECT_EQ(van->n_components, 3);
  EXPECT_NEAR(external->cov2_target, fair->cov2_target, 1e-10);
  EXPECT_NEAR(external->cov2_sensitive, fair->cov2_sensitive, 1e-10);

  Matrix short_ext = Matrix::Zero(5, 2);
  EXPECT_THROW(compare_baselines(c, d, &short_ext), Error);
}

TEST(Compare, VanillaAtTauOneMatchesPls) {
  PreparedData d = synthetic_data();
  ExperimentConfig c = base_config();
  c.k = 3;
  c.method = Method::vanilla;
  c.tau = 0.999999;
  auto folds = split_folds(static_cast<std::size_t>(d.rows()), 3, 0);
  Representation v = fit_representation(c, d, folds[0].train, 0, 3);
  c.method = Method::pls;
  Representation p = fit_representation(c, d, folds[0].train, 0, 3);
  CenteredBlocks te = center_like(p.fit_blocks, d, folds[0].test);
  EXPECT_EQ(v.k(), 3);
  // every component kept: the representation is the standard PLS projection X W
  EXPECT_LE((v.scores(te.X) - te.X.values() * p.pls.W).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Benchmark, CountsAndShape) {
  auto rows = run_benchmark({{200, 10}}, 2, 5);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.repeats, 5);
    EXPECT_LE(r.min_ms, r.median_ms);
    EXPECT_LE(r.median_ms, r.max_ms);
  }
}

TEST(Serialize, RoundTripAllModelKinds) {
  auto in = tu::random_instance(30, 4, 1, 1);
  std::vector<AnyModel> models{nipals_fit(in.X, in.Y, 2), fair_pls_fit(in.X, in.Y, in.S, 2, 1.0),
                               kfpls_fit(in.X, in.Y, in.S.values(), 2, 1.0, KernelSpec::rbf(1.5), KernelSpec::linear())};
  std::mt19937_64 rng(2);
  Matrix fresh = tu::randn(3, 4, rng);
  for (const auto& m : models) {
    std::stringstream ss;
    write_model(ss, m);
    AnyModel back = read_model(ss);
    EXPECT_STREQ(model_kind(back), model_kind(m));
    EXPECT_EQ(transform_any(back, fresh), transform_any(m, fresh)) << model_kind(m);
  }
  std::stringstream bad("fairpls-model 1\nkind nonsense\n");
  EXPECT_THROW(read_model(bad), Error);
}

TEST(Serialize, NumericCsvRoundTrip) {
  fs::path dir = scratch("csv");
  Matrix m(2, 2);
  m << 1.0 / 3, -2e-300, 5, 1e20;
  write_numeric_csv((dir / "m.csv").string(), m, {"a", "b"});
  NamedMatrix back = read_numeric_csv((dir / "m.csv").string());
  EXPECT_EQ(back.values, m);
  EXPECT_EQ(back.names, (std::vector<std::string>{"a", "b"}));
}
