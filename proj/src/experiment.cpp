#include "fairpls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"
#include "fairpls/glm.hpp"
#include "fairpls/serialize.hpp"

namespace fairpls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class T>
std::vector<T> run_tasks(std::size_t count, int threads, const std::function<T(std::size_t)>& task) {
  std::vector<T> out(count);
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = task(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) out[i] = task(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Matrix centered_cols(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return m;
  return m.rowwise() - m.colwise().mean();
}

std::string error_status(const std::exception& e) {
  if (const auto* fe = dynamic_cast<const Error*>(&e)) return std::string("error: ") + error_kind_name(fe->kind()) + ": " + e.what();
  return std::string("error: ") + e.what();
}

FairnessReport nan_report() {
  FairnessReport r;
  r.cov2_rep_target = r.cov2_rep_sensitive = r.reconstruction_error = kNaN;
  r.di = r.di_ci_lo = r.di_ci_hi = r.ks = r.eopp = r.accuracy = r.mse = kNaN;
  return r;
}

std::vector<int> take_labels(const std::vector<int>& v, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_num(const std::string& s) {
  if (s == "nan") return kNaN;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "bad number '" + s + "' in result file");
  }
}

std::string num(double v) { return std::isnan(v) ? "nan" : format_double(v); }

KernelSpec resolve_for(const KernelSpec& spec, const Matrix& X, std::uint64_t seed) {
  return resolve_kernel(spec, X, seed);
}

// Model-selection objective on held-out rows.
double k_objective(const Matrix& T, const CenteredBlocks& b, double eta) {
  auto [cy, cs] = score_representation(T, b.Y.values(), b.S.values());
  return cy - eta * cs;
}

int best_k(const std::vector<double>& obj) {
  int best = 0;
  for (std::size_t i = 1; i < obj.size(); ++i)
    if (obj[i] > obj[static_cast<std::size_t>(best)] + 1e-12 * std::max(1.0, std::abs(obj[static_cast<std::size_t>(best)])))
      best = static_cast<int>(i);
  return best + 1;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::pls: return "pls";
    case Method::fair_pls: return "fair-pls";
    case Method::eo_fair_pls: return "eo-fair-pls";
    case Method::kernel_fair_pls: return "kernel-fair-pls";
    case Method::vanilla: return "vanilla";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::pls, Method::fair_pls, Method::eo_fair_pls, Method::kernel_fair_pls, Method::vanilla})
    if (s == method_name(m)) return m;
  throw Error(ErrorKind::invalid_argument,
              "unknown method '" + s + "' (expected pls, fair-pls, eo-fair-pls, kernel-fair-pls or vanilla)");
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::invalid_argument, m); };
  if (eta_grid.empty()) bad("eta_grid must not be empty");
  for (double e : eta_grid)
    if (!(e >= 0) || !std::isfinite(e)) bad("eta values must be finite and >= 0");
  if (k_folds < 2) bad("k_folds must be >= 2");
  if (n_splits < 1) bad("n_splits must be >= 1");
  if (!k_cv && k < 1) bad("k must be >= 1");
  if (k_max < 1) bad("k_max must be >= 1");
  if (!(train_fraction > 0 && train_fraction < 1)) bad("train_fraction must lie in (0, 1)");
  if (!(tau > 0 && tau < 1)) bad("tau must lie in (0, 1)");
  for (double t : tau_grid)
    if (!(t > 0 && t < 1)) bad("tau_grid values must lie in (0, 1)");
  if (threads < 1) bad("threads must be >= 1");
  if (!(ridge >= 0)) bad("ridge must be >= 0");
  if (!(glm_lambda >= 0)) bad("lambda must be >= 0");
  gd.validate();
}

ExperimentConfig experiment_config_from(const KvConfig& cfg) {
  ExperimentConfig c;
  if (!cfg.has("recipe")) throw Error(ErrorKind::invalid_argument, "experiment config needs a recipe");
  std::string recipe = cfg.at("recipe").as_string();
  namespace fs = std::filesystem;
  if (!fs::path(recipe).is_absolute()) {
    fs::path near = fs::path(cfg.base_dir()) / recipe;
    recipe = fs::exists(near) ? near.string() : (fs::path(default_config_dir()) / recipe).string();
  }
  c.recipe_path = recipe;
  c.target = cfg.get_string("target", "");
  c.sensitive = cfg.get_string("sensitive", "");
  if (cfg.has("task")) c.task = parse_task(cfg.at("task").as_string());
  if (cfg.has("eta_grid")) c.eta_grid = cfg.at("eta_grid").as_doubles();
  if (cfg.has("k")) {
    const std::string k = cfg.at("k").as_string();
    if (k == "cv-select")
      c.k_cv = true;
    else
      c.k = static_cast<int>(cfg.at("k").as_int());
  }
  c.k_max = static_cast<int>(cfg.get_int("k_max", c.k_max));
  c.k_folds = static_cast<int>(cfg.get_int("k_folds", c.k_folds));
  c.n_splits = static_cast<int>(cfg.get_int("n_splits", c.n_splits));
  c.train_fraction = cfg.get_double("train_fraction", c.train_fraction);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  c.method = parse_method(cfg.get_string("method", method_name(c.method)));
  c.tau = cfg.get_double("tau", c.tau);
  if (cfg.has("tau_grid")) c.tau_grid = cfg.at("tau_grid").as_doubles();
  if (cfg.has("kernel_x")) c.kernel_x = kernel_spec_from_value(cfg.at("kernel_x"));
  if (cfg.has("kernel_s")) c.kernel_s = kernel_spec_from_value(cfg.at("kernel_s"));
  c.gd.learning_rate = cfg.get_double("learning_rate", c.gd.learning_rate);
  c.gd.max_iter = static_cast<int>(cfg.get_int("max_iter", c.gd.max_iter));
  c.gd.tol = cfg.get_double("tol", c.gd.tol);
  c.gd.restarts = static_cast<int>(cfg.get_int("restarts", c.gd.restarts));
  c.gd.seed = c.seed;
  c.ridge = cfg.get_double("ridge", c.ridge);
  c.glm_lambda = cfg.get_double("lambda", c.glm_lambda);
  c.threads = static_cast<int>(cfg.get_int("threads", c.threads));
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) { return experiment_config_from(KvConfig::load(path)); }

PreparedData load_experiment_data(const ExperimentConfig& cfg) {
  Recipe r = load_recipe(cfg.recipe_path);
  if (!cfg.target.empty()) r.target = cfg.target;
  if (!cfg.sensitive.empty()) r.sensitive = cfg.sensitive;
  if (cfg.task) r.task = *cfg.task;
  return prepare(r);
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"cov2_target", "cov2_sensitive", "reconstruction_error",
                                                "di", "di_ci_lo", "di_ci_hi", "ks", "eopp", "accuracy", "mse"};
  return cols;
}

std::vector<double> report_values(const FairnessReport& r) {
  return {r.cov2_rep_target, r.cov2_rep_sensitive, r.reconstruction_error, r.di, r.di_ci_lo, r.di_ci_hi,
          r.ks, r.eopp, r.accuracy, r.mse};
}

std::vector<SummaryRow> summarize(const ResultTable& table) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<std::vector<double>>> cols;
  auto key_of = [](const ResultRow& r) {
    return std::make_tuple(r.dataset, r.method, r.model, r.eta, r.k);
  };
  std::map<decltype(key_of(table.rows.front())), std::size_t> index;
  const std::size_t m = report_columns().size();
  for (const auto& r : table.rows) {
    auto key = key_of(r);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      SummaryRow s;
      s.dataset = r.dataset;
      s.method = r.method;
      s.model = r.model;
      s.eta = r.eta;
      s.k = r.k;
      out.push_back(s);
      cols.emplace_back(m);
    }
    SummaryRow& s = out[it->second];
    if (r.status != "ok") {
      ++s.n_failed;
      continue;
    }
    ++s.n_ok;
    const auto vals = report_values(r.report);
    for (std::size_t j = 0; j < m; ++j)
      if (std::isfinite(vals[j])) cols[it->second][j].push_back(vals[j]);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    out[g].mean.assign(m, kNaN);
    out[g].std.assign(m, kNaN);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& v = cols[g][j];
      if (v.empty()) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      out[g].mean[j] = mean;
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out[g].std[j] = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
    }
  }
  return out;
}

Matrix Representation::scores(const CenteredMatrix& X) const {
  switch (method) {
    case Method::pls: return transform(pls, X);
    case Method::fair_pls:
    case Method::eo_fair_pls: return transform(fair, X);
    case Method::kernel_fair_pls: return kfpls_transform(kernel, X.values());
    case Method::vanilla: {
      Matrix out(X.rows(), static_cast<Index>(selected.size()));
      for (std::size_t j = 0; j < selected.size(); ++j)
        out.col(static_cast<Index>(j)) = X.values() * pls.W.col(selected[j]);
      return out;
    }
  }
  return {};
}

int Representation::k() const {
  switch (method) {
    case Method::pls:
    case Method::vanilla: return static_cast<int>(pls.k());
    case Method::fair_pls:
    case Method::eo_fair_pls: return static_cast<int>(fair.k());
    case Method::kernel_fair_pls: return static_cast<int>(kernel.k());
  }
  return 0;
}

Representation fit_representation(const ExperimentConfig& cfg, const PreparedData& data,
                                  const std::vector<std::size_t>& train, double eta, int k) {
  Representation rep;
  rep.method = cfg.method;
  rep.fit_blocks = center_rows(data, train);
  const auto& b = rep.fit_blocks;
  switch (cfg.method) {
    case Method::pls:
      rep.pls = nipals_fit(b.X, b.Y, k);
      rep.loadings = rep.pls.P;
      break;
    case Method::fair_pls:
      rep.fair = fair_pls_fit(b.X, b.Y, b.S, k, eta, cfg.gd);
      rep.loadings = rep.fair.Gamma;
      break;
    case Method::eo_fair_pls:
      rep.fair = eo_fair_pls_fit(b.X, b.Y, b.S, k, eta, cfg.gd, cfg.ridge);
      rep.loadings = rep.fair.Gamma;
      break;
    case Method::kernel_fair_pls: {
      if (static_cast<Index>(train.size()) > kMaxKernelRows && !cfg.allow_large_n)
        throw Error(ErrorKind::invalid_argument, "kernel fit on " + std::to_string(train.size()) +
                                                     " rows needs O(n^2) memory; limit is " +
                                                     std::to_string(kMaxKernelRows) + " without --allow-large-n");
      const KernelSpec kx = resolve_for(cfg.kernel_x, b.X.values(), cfg.seed);
      const KernelSpec ks = resolve_for(cfg.kernel_s, b.S.values(), cfg.seed);
      rep.kernel = kfpls_fit(b.X, b.Y, b.S.values(), k, eta, kx, ks, cfg.gd);
      break;
    }
    case Method::vanilla: {
      std::vector<int> groups;
      groups.reserve(train.size());
      for (auto r : train) groups.push_back(data.s(static_cast<Index>(r)) > 0.5 ? 1 : 0);
      VanillaResult v = vanilla_fair_pls(b.X, b.Y, groups, k, cfg.tau);
      rep.pls = std::move(v.pls);
      for (std::size_t j = 0; j < v.selected.size(); ++j)
        if (v.selected[j]) rep.selected.push_back(static_cast<Index>(j));
      break;
    }
  }
  return rep;
}

namespace {

int select_k_on(const ExperimentConfig& cfg, const PreparedData& data, const std::vector<std::size_t>& rows,
                double eta, std::vector<double>* objective_out) {
  const int k_max = std::min<int>(cfg.k_max, static_cast<int>(data.x_raw.cols()));
  std::vector<double> total(static_cast<std::size_t>(k_max), 0.0);
  auto folds = split_folds(rows.size(), static_cast<std::size_t>(cfg.k_folds), cfg.seed);
  for (const auto& f : folds) {
    std::vector<std::size_t> tr, te;
    for (auto i : f.train) tr.push_back(rows[i]);
    for (auto i : f.test) te.push_back(rows[i]);
    if (cfg.method == Method::vanilla) {
      for (int kk = 1; kk <= k_max; ++kk) {
        Representation rep = fit_representation(cfg, data, tr, eta, kk);
        CenteredBlocks test = center_like(rep.fit_blocks, data, te);
        total[static_cast<std::size_t>(kk - 1)] += k_objective(rep.scores(test.X), test, eta);
      }
      continue;
    }
    // Components are extracted greedily, so the k-component model is a prefix of the k_max one.
    Representation rep = fit_representation(cfg, data, tr, eta, k_max);
    CenteredBlocks test = center_like(rep.fit_blocks, data, te);
    const Matrix T = rep.scores(test.X);
    for (int kk = 1; kk <= std::min<int>(k_max, static_cast<int>(T.cols())); ++kk)
      total[static_cast<std::size_t>(kk - 1)] += k_objective(T.leftCols(kk), test, eta);
  }
  for (double& v : total) v /= static_cast<double>(folds.size());
  if (objective_out) *objective_out = total;
  return best_k(total);
}

struct EvalTask {
  double eta;
  int fold;
  std::uint64_t split_seed;
  Fold split;
};

ResultRow evaluate(const ExperimentConfig& cfg, const PreparedData& data, const EvalTask& t, bool downstream) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRow row;
  row.dataset = data.name;
  row.method = method_name(cfg.method);
  row.eta = t.eta;
  row.k = cfg.k;
  row.fold = t.fold;
  row.split_seed = t.split_seed;
  row.model = downstream ? "lr" : "none";
  row.report = nan_report();
  try {
    int k = cfg.k;
    if (cfg.k_cv) k = select_k_on(cfg, data, t.split.train, t.eta, nullptr);
    row.k = k;
    Representation rep = fit_representation(cfg, data, t.split.train, t.eta, k);
    CenteredBlocks test = center_like(rep.fit_blocks, data, t.split.test);
    const Matrix T = rep.scores(test.X);
    auto [cy, cs] = score_representation(T, test.Y.values(), test.S.values());
    row.report.cov2_rep_target = cy;
    row.report.cov2_rep_sensitive = cs;
    if (rep.loadings.size() > 0) row.report.reconstruction_error = reconstruction_error(test.X.values(), T, rep.loadings);

    if (downstream) {
      const Matrix T_train = rep.scores(rep.fit_blocks.X);
      const Vector y_train = take_rows(data.y, t.split.train);
      const Vector y_test = take_rows(data.y, t.split.test);
      const auto s_test = take_labels(data.groups(), t.split.test);
      const GlmFamily fam = data.task == Task::classification ? GlmFamily::logistic : GlmFamily::linear;
      const GlmModel glm = glm_fit(T_train, y_train, fam, cfg.glm_lambda);
      const Vector pred = glm_predict(glm, T);
      std::vector<double> pv(pred.data(), pred.data() + pred.size());
      row.report.ks = ks_statistic(pv, s_test);
      if (data.task == Task::classification) {
        const auto yhat = to_labels(pred);
        const auto ytrue = take_labels(data.labels(), t.split.test);
        double hit = 0;
        for (std::size_t i = 0; i < yhat.size(); ++i) hit += yhat[i] == ytrue[i];
        row.report.accuracy = hit / static_cast<double>(yhat.size());
        try {
          DisparateImpact di = disparate_impact(yhat, s_test);
          if (!di.degenerate) {
            row.report.di = di.di;
            row.report.di_ci_lo = di.ci_lo;
            row.report.di_ci_hi = di.ci_hi;
          } else {
            row.report.di = row.report.di_ci_lo = row.report.di_ci_hi = 0.0;
          }
        } catch (const Error&) {
          // no positive predictions in s = 1: DI left undefined
        }
        try {
          row.report.eopp = eopp_ratio(yhat, ytrue, s_test);
        } catch (const Error&) {
        }
      } else {
        row.report.mse = (pred - y_test).squaredNorm() / static_cast<double>(y_test.size());
      }
    }
  } catch (const std::exception& e) {
    row.status = error_status(e);
  }
  row.wall_time_ms = elapsed_ms(t0);
  return row;
}

ResultTable run_tasks_table(const ExperimentConfig& cfg, const PreparedData& data, std::vector<EvalTask> tasks,
                            bool downstream) {
  ResultTable table;
  table.rows = run_tasks<ResultRow>(tasks.size(), cfg.threads,
                                    [&](std::size_t i) { return evaluate(cfg, data, tasks[i], downstream); });
  return table;
}

}  // namespace

ResultTable run_experiment_a(const ExperimentConfig& cfg, const PreparedData& data) {
  cfg.validate();
  std::vector<EvalTask> tasks;
  for (double eta : cfg.eta_grid)
    for (int s = 0; s < cfg.n_splits; ++s) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
      tasks.push_back({eta, s, seed, split_train_test(static_cast<std::size_t>(data.rows()), cfg.train_fraction, seed)});
    }
  return run_tasks_table(cfg, data, std::move(tasks), false);
}

ResultTable run_experiment_b(const ExperimentConfig& cfg, const PreparedData& data) {
  cfg.validate();
  const auto folds = split_folds(static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(cfg.k_folds), cfg.seed);
  std::vector<EvalTask> tasks;
  for (double eta : cfg.eta_grid)
    for (std::size_t f = 0; f < folds.size(); ++f) tasks.push_back({eta, static_cast<int>(f), cfg.seed, folds[f]});
  return run_tasks_table(cfg, data, std::move(tasks), true);
}

std::vector<KSelection> select_k(const ExperimentConfig& cfg, const PreparedData& data) {
  cfg.validate();
  std::vector<std::size_t> all(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return run_tasks<KSelection>(cfg.eta_grid.size(), cfg.threads, [&](std::size_t i) {
    KSelection s;
    s.eta = cfg.eta_grid[i];
    s.k = select_k_on(cfg, data, all, s.eta, &s.objective);
    return s;
  });
}

std::vector<BenchRow> run_benchmark(const std::vector<std::pair<Index, Index>>& sizes, int k, int repeats,
                                    std::uint64_t seed, double eta) {
  if (repeats < 1) throw Error(ErrorKind::invalid_argument, "repeats must be >= 1");
  std::vector<BenchRow> out;
  for (auto [n, d] : sizes) {
    if (n < 4 || d < 1 || k > d) throw Error(ErrorKind::invalid_argument, "benchmark sizes need n >= 4 and 1 <= k <= d");
    // Two equal groups, shifted in the first coordinate; Y linear in X plus noise.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix X(n, d);
    Vector s(n), y(n);
    Vector beta(d);
    for (Index j = 0; j < d; ++j) beta(j) = normal(rng);
    for (Index i = 0; i < n; ++i) {
      s(i) = i < n / 2 ? 0.0 : 1.0;
      for (Index j = 0; j < d; ++j) X(i, j) = normal(rng) + (j == 0 ? 2.0 * s(i) : 0.0);
    }
    y = X * beta;
    for (Index i = 0; i < n; ++i) y(i) += normal(rng);
    const CenteredMatrix Xc = CenteredMatrix::fit(X), Yc = CenteredMatrix::fit(Matrix(y)), Sc = CenteredMatrix::fit(Matrix(s));
    GdParams gd;
    gd.seed = seed;
    auto time_it = [&](const std::string& name, const std::function<void()>& fn) {
      fn();  // warm-up
      std::vector<double> ms;
      for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        ms.push_back(elapsed_ms(t0));
      }
      std::sort(ms.begin(), ms.end());
      const std::size_t mid = ms.size() / 2;
      BenchRow row;
      row.n = n;
      row.d = d;
      row.k = k;
      row.method = name;
      row.repeats = repeats;
      row.median_ms = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
      row.min_ms = ms.front();
      row.max_ms = ms.back();
      out.push_back(row);
    };
    time_it("pls", [&] { (void)nipals_fit(Xc, Yc, k); });
    time_it("fair-pls", [&] { (void)fair_pls_fit(Xc, Yc, Sc, k, eta, gd); });
  }
  return out;
}

std::pair<double, double> score_representation(const Matrix& T, const Matrix& Y, const Matrix& S) {
  if (T.rows() != Y.rows() || T.rows() != S.rows())
    throw Error(ErrorKind::dimension_mismatch, "representation, target and sensitive rows differ");
  if (T.cols() == 0) return {0.0, 0.0};
  const Matrix Tc = centered_cols(T);
  return {cov2(Tc, centered_cols(Y)), cov2(Tc, centered_cols(S))};
}

std::vector<CompareRow> compare_baselines(const ExperimentConfig& cfg, const PreparedData& data, const Matrix* external) {
  cfg.validate();
  if (external && external->rows() != data.rows())
    throw Error(ErrorKind::invalid_argument, "external representation has " + std::to_string(external->rows()) +
                                                 " rows, dataset has " + std::to_string(data.rows()));
  if (external && !external->allFinite())
    throw Error(ErrorKind::invalid_argument, "external representation contains non-finite values");
  const auto folds = split_folds(static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(cfg.k_folds), cfg.seed);
  struct Job {
    Method method;
    double param;
    std::size_t fold;
  };
  std::vector<Job> jobs;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (double tau : cfg.tau_grid) jobs.push_back({Method::vanilla, tau, f});
    for (double eta : cfg.eta_grid) jobs.push_back({Method::fair_pls, eta, f});
  }
  auto rows = run_tasks<CompareRow>(jobs.size(), cfg.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    ExperimentConfig c = cfg;
    c.method = j.method;
    if (j.method == Method::vanilla) c.tau = j.param;
    Representation rep = fit_representation(c, data, folds[j.fold].train, j.method == Method::vanilla ? 0.0 : j.param, cfg.k);
    CenteredBlocks test = center_like(rep.fit_blocks, data, folds[j.fold].test);
    const Matrix T = rep.scores(test.X);
    CompareRow r;
    r.method = method_name(j.method);
    r.param = j.param;
    r.fold = static_cast<int>(j.fold);
    r.n_components = static_cast<int>(T.cols());
    r.empty = T.cols() == 0;
    std::tie(r.cov2_target, r.cov2_sensitive) = score_representation(T, test.Y.values(), test.S.values());
    return r;
  });
  if (external) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      CenteredBlocks fit = center_rows(data, folds[f].train);
      CenteredBlocks test = center_like(fit, data, folds[f].test);
      const Matrix T = take_rows(*external, folds[f].test);
      CompareRow r;
      r.method = "external";
      r.fold = static_cast<int>(f);
      r.n_components = static_cast<int>(T.cols());
      r.empty = T.cols() == 0;
      std::tie(r.cov2_target, r.cov2_sensitive) = score_representation(T, test.Y.values(), test.S.values());
      rows.push_back(r);
    }
  }
  return rows;
}

void write_results(const std::string& out_dir, const std::string& stem, const ResultTable& table) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto& cols = report_columns();
  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(out_dir) / name);
    if (!os) throw Error(ErrorKind::io, "cannot write " + (fs::path(out_dir) / name).string());
    return os;
  };
  {
    std::ofstream os = open(stem + "_results.csv");
    os << "dataset,method,model,eta,k,fold,split_seed,status";
    for (const auto& c : cols) os << ',' << c;
    os << '\n';
    for (const auto& r : table.rows) {
      os << csv_field(r.dataset) << ',' << r.method << ',' << r.model << ',' << num(r.eta) << ',' << r.k << ','
         << r.fold << ',' << r.split_seed << ',' << csv_field(r.status);
      for (double v : report_values(r.report)) os << ',' << num(v);
      os << '\n';
    }
  }
  {
    std::ofstream os = open(stem + "_timings.csv");
    os << "dataset,method,model,eta,k,fold,wall_time_ms\n";
    for (const auto& r : table.rows)
      os << csv_field(r.dataset) << ',' << r.method << ',' << r.model << ',' << num(r.eta) << ',' << r.k << ','
         << r.fold << ',' << num(r.wall_time_ms) << '\n';
  }
  const auto summary = summarize(table);
  {
    std::ofstream os = open(stem + "_summary.csv");
    os << "dataset,method,model,eta,k,n_ok,n_failed";
    for (const auto& c : cols) os << ',' << c << "_mean," << c << "_std";
    os << '\n';
    for (const auto& s : summary) {
      os << csv_field(s.dataset) << ',' << s.method << ',' << s.model << ',' << num(s.eta) << ',' << s.k << ','
         << s.n_ok << ',' << s.n_failed;
      for (std::size_t j = 0; j < cols.size(); ++j) os << ',' << num(s.mean[j]) << ',' << num(s.std[j]);
      os << '\n';
    }
  }
  {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) {
      nlohmann::ordered_json j;
      j["dataset"] = r.dataset;
      j["method"] = r.method;
      j["model"] = r.model;
      j["eta"] = r.eta;
      j["k"] = r.k;
      j["fold"] = r.fold;
      j["split_seed"] = r.split_seed;
      j["status"] = r.status;
      const auto vals = report_values(r.report);
      for (std::size_t c = 0; c < cols.size(); ++c) j[cols[c]] = vals[c];
      rows.push_back(std::move(j));
    }
    nlohmann::ordered_json sums = nlohmann::ordered_json::array();
    for (const auto& s : summary) {
      nlohmann::ordered_json j;
      j["dataset"] = s.dataset;
      j["method"] = s.method;
      j["model"] = s.model;
      j["eta"] = s.eta;
      j["k"] = s.k;
      j["n_ok"] = s.n_ok;
      j["n_failed"] = s.n_failed;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        j[cols[c] + "_mean"] = s.mean[c];
        j[cols[c] + "_std"] = s.std[c];
      }
      sums.push_back(std::move(j));
    }
    std::ofstream os = open(stem + "_results.json");
    os << nlohmann::ordered_json{{"rows", rows}, {"summary", sums}}.dump(1) << '\n';
  }
}

void write_selection(const std::string& path, const std::vector<KSelection>& sel) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  os << "eta,k_candidate,cv_objective,selected\n";
  for (const auto& s : sel)
    for (std::size_t i = 0; i < s.objective.size(); ++i)
      os << num(s.eta) << ',' << i + 1 << ',' << num(s.objective[i]) << ',' << (static_cast<int>(i) + 1 == s.k) << '\n';
}

void write_bench(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  os << "n,d,k,method,repeats,median_ms,min_ms,max_ms\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.d << ',' << r.k << ',' << r.method << ',' << r.repeats << ',' << num(r.median_ms) << ','
       << num(r.min_ms) << ',' << num(r.max_ms) << '\n';
}

void write_compare(const std::string& path, const std::vector<CompareRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot write " + path);
  os << "method,param,fold,n_components,cov2_target,cov2_sensitive,empty\n";
  for (const auto& r : rows)
    os << r.method << ',' << num(r.param) << ',' << r.fold << ',' << r.n_components << ',' << num(r.cov2_target) << ','
       << num(r.cov2_sensitive) << ',' << (r.empty ? 1 : 0) << '\n';
}

AuditReport self_audit(const std::string& out_dir, const std::string& stem) {
  namespace fs = std::filesystem;
  AuditReport rep;
  const auto rows = read_csv_rows((fs::path(out_dir) / (stem + "_results.csv")).string());
  const auto sums = read_csv_rows((fs::path(out_dir) / (stem + "_summary.csv")).string());
  const auto& cols = report_columns();
  if (rows.empty() || sums.empty()) throw Error(ErrorKind::parse, "empty result files");
  const std::size_t want = 8 + cols.size();
  ResultTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != want) throw Error(ErrorKind::parse, "results row " + std::to_string(i) + " has wrong field count");
    ResultRow r;
    r.dataset = f[0];
    r.method = f[1];
    r.model = f[2];
    r.eta = parse_num(f[3]);
    r.k = std::stoi(f[4]);
    r.fold = std::stoi(f[5]);
    r.status = f[7];
    double* dst[] = {&r.report.cov2_rep_target, &r.report.cov2_rep_sensitive, &r.report.reconstruction_error,
                     &r.report.di, &r.report.di_ci_lo, &r.report.di_ci_hi, &r.report.ks, &r.report.eopp,
                     &r.report.accuracy, &r.report.mse};
    for (std::size_t c = 0; c < cols.size(); ++c) *dst[c] = parse_num(f[8 + c]);
    table.rows.push_back(std::move(r));
  }
  const auto recomputed = summarize(table);
  if (recomputed.size() != sums.size() - 1) {
    ++rep.mismatches;
    rep.messages.push_back("summary has " + std::to_string(sums.size() - 1) + " groups, rows imply " +
                           std::to_string(recomputed.size()));
    return rep;
  }
  auto same = [](double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
  };
  for (std::size_t g = 0; g < recomputed.size(); ++g) {
    const auto& f = sums[g + 1];
    const auto& s = recomputed[g];
    ++rep.groups_checked;
    std::string where = s.method + " eta=" + num(s.eta) + " k=" + std::to_string(s.k) + " model=" + s.model;
    if (f.size() != 7 + 2 * cols.size() || f[1] != s.method || f[2] != s.model || !same(parse_num(f[3]), s.eta) ||
        std::stoi(f[4]) != s.k || std::stoi(f[5]) != s.n_ok || std::stoi(f[6]) != s.n_failed) {
      ++rep.mismatches;
      rep.messages.push_back("group key or counts differ at " + where);
      continue;
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!same(parse_num(f[7 + 2 * c]), s.mean[c]) || !same(parse_num(f[8 + 2 * c]), s.std[c])) {
        ++rep.mismatches;
        rep.messages.push_back(cols[c] + " mean/std differ at " + where);
      }
    }
  }
  return rep;
}

AuditReport leakage_check(const ExperimentConfig& cfg, const PreparedData& data) {
  AuditReport rep;
  const double eta = cfg.eta_grid.back();
  const Fold split = split_train_test(static_cast<std::size_t>(data.rows()), cfg.train_fraction, cfg.seed);
  PreparedData poisoned = data;
  for (auto r : split.test) {
    poisoned.x_raw.row(static_cast<Index>(r)).setConstant(1e6);
    poisoned.y(static_cast<Index>(r)) = data.task == Task::classification ? 1.0 - data.y(static_cast<Index>(r)) : 1e6;
    poisoned.s(static_cast<Index>(r)) = 1.0 - data.s(static_cast<Index>(r));
  }
  auto fit_all = [&](const PreparedData& d) {
    int k = cfg.k;
    if (cfg.k_cv) k = select_k_on(cfg, d, split.train, eta, nullptr);
    Representation r = fit_representation(cfg, d, split.train, eta, k);
    const Matrix T = r.scores(r.fit_blocks.X);
    const GlmModel glm = glm_fit(T, take_rows(d.y, split.train),
                                 d.task == Task::classification ? GlmFamily::logistic : GlmFamily::linear,
                                 cfg.glm_lambda);
    Vector coef(glm.coefficients.size() + 1);
    coef << glm.intercept, glm.coefficients;
    return std::make_tuple(k, r, T, coef);
  };
  auto [k0, r0, t0, c0] = fit_all(data);
  auto [k1, r1, t1, c1] = fit_all(poisoned);
  auto check = [&](const std::string& what, bool equal) {
    ++rep.groups_checked;
    if (!equal) {
      ++rep.mismatches;
      rep.messages.push_back(what + " changed when test rows were poisoned");
    }
  };
  check("selected k", k0 == k1);
  check("X centering means", r0.fit_blocks.X.col_means() == r1.fit_blocks.X.col_means());
  check("X centering scales", r0.fit_blocks.X.col_scales() == r1.fit_blocks.X.col_scales());
  check("Y/S centering", r0.fit_blocks.Y.col_means() == r1.fit_blocks.Y.col_means() &&
                             r0.fit_blocks.S.col_means() == r1.fit_blocks.S.col_means());
  check("training scores", t0.rows() == t1.rows() && t0.cols() == t1.cols() && t0 == t1);
  check("downstream coefficients", c0 == c1);
  return rep;
}

}  // namespace fairpls
