// fairpls command-line harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"
#include "fairpls/experiment.hpp"
#include "fairpls/serialize.hpp"

namespace fs = std::filesystem;
using namespace fairpls;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int threads = 0;
  bool allow_large_n = false;
};

void emit_error(const std::string& kind, const std::string& message, std::optional<std::size_t> row = {},
                std::optional<std::size_t> col = {}) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  if (row) j["row"] = *row;
  if (col) j["column"] = *col;
  std::cerr << j.dump() << '\n';
}

ExperimentConfig load_cfg(const std::string& path, const Globals& g) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.gd.seed = *g.seed;
  }
  if (g.threads > 0) cfg.threads = g.threads;
  cfg.allow_large_n = g.allow_large_n;
  cfg.out_dir = g.out_dir;
  return cfg;
}

std::string out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

std::string ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return path;
}

void print_summary(const ResultTable& table) {
  const auto cols = report_columns();
  for (const auto& s : summarize(table)) {
    std::cout << s.method << " eta=" << s.eta << " k=" << s.k << " model=" << s.model << " ok=" << s.n_ok
              << " failed=" << s.n_failed;
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (!std::isnan(s.mean[j])) std::cout << ' ' << cols[j] << '=' << s.mean[j];
    std::cout << '\n';
  }
}

std::vector<std::pair<Index, Index>> parse_sizes(const std::string& spec) {
  std::vector<std::pair<Index, Index>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw Error(ErrorKind::invalid_argument, "size '" + item + "' must look like NxD");
    out.emplace_back(std::stoll(item.substr(0, x)), std::stoll(item.substr(x + 1)));
  }
  if (out.empty()) throw Error(ErrorKind::invalid_argument, "no benchmark sizes given");
  return out;
}

AnyModel fit_any(const ExperimentConfig& cfg, const PreparedData& data, double eta, int k) {
  std::vector<std::size_t> all(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Representation rep = fit_representation(cfg, data, all, eta, k);
  switch (cfg.method) {
    case Method::pls:
    case Method::vanilla: return rep.pls;
    case Method::fair_pls:
    case Method::eo_fair_pls: return rep.fair;
    case Method::kernel_fair_pls: return rep.kernel;
  }
  return rep.pls;
}

// Rebuilds the model's raw input layout from a numeric CSV with named columns.
Matrix design_for(const CenteringStats& st, const NamedMatrix& in) {
  Matrix raw = Matrix::Zero(in.values.rows(), st.input_cols);
  for (Index c = 0; c < st.output_cols(); ++c) {
    const auto& name = st.names[static_cast<std::size_t>(c)];
    auto it = std::find(in.names.begin(), in.names.end(), name);
    if (it == in.names.end()) throw Error(ErrorKind::invalid_argument, "input CSV lacks column '" + name + "'");
    raw.col(st.kept[static_cast<std::size_t>(c)]) = in.values.col(it - in.names.begin());
  }
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairpls: fair partial least squares toolkit"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (0 = config value)");
  app.add_flag("--allow-large-n", g.allow_large_n, "Allow kernel fits above 20000 rows");

  std::string config, recipe, model_path, input, output, method = "fair-pls", predictions, external, params, stem,
                                                   sizes = "5000x50";
  double eta = 0.0;
  int k = 2, repeats = 5, fold = -1, k_folds = 7;
  bool leakage = false, export_design = false;

  auto* fit = app.add_subcommand("fit", "Fit a representation on a whole dataset and save the model");
  fit->add_option("--config", config, "Experiment config (method, gd, kernels)");
  fit->add_option("--recipe", recipe, "Dataset recipe (when no config is given)");
  fit->add_option("--method", method, "Method when no config is given");
  fit->add_option("--eta", eta, "Fairness weight");
  fit->add_option("--k", k, "Components");
  fit->add_option("--model", model_path, "Model file (default <out-dir>/model.txt)");
  fit->add_flag("--export-design", export_design, "Also write the encoded design to <out-dir>/design.csv");

  auto* tr = app.add_subcommand("transform", "Project rows with a saved model");
  tr->add_option("--model", model_path, "Model file")->required();
  tr->add_option("--input", input, "Numeric CSV with the model's design columns")->required();
  tr->add_option("--output", output, "Scores CSV (default <out-dir>/scores.csv)");

  auto* ev = app.add_subcommand("eval", "Score external predictions (row_id, yhat) against a recipe");
  ev->add_option("--recipe", recipe, "Dataset recipe")->required();
  ev->add_option("--predictions", predictions, "CSV with row_id,yhat")->required();
  ev->add_option("--fold", fold, "Require row_ids to equal this fold's test rows");
  ev->add_option("--k-folds", k_folds, "Fold count used with --fold");

  auto* ea = app.add_subcommand("experiment-a", "Representation metrics over eta and random splits");
  ea->add_option("--config", config)->required();
  auto* eb = app.add_subcommand("experiment-b", "Downstream GLM metrics over eta and CV folds");
  eb->add_option("--config", config)->required();
  auto* sk = app.add_subcommand("select-k", "Cross-validated choice of k per eta");
  sk->add_option("--config", config)->required();
  auto* be = app.add_subcommand("bench", "Median fit times for pls and fair-pls");
  be->add_option("--sizes", sizes, "Comma list of NxD");
  be->add_option("--k", k, "Components")->default_val(3);
  be->add_option("--repeats", repeats, "Timed runs per cell");
  be->add_option("--eta", eta, "Fairness weight")->default_val(1.0);
  auto* cmp = app.add_subcommand("compare", "Vanilla thresholds vs fair-pls eta grid");
  cmp->add_option("--config", config)->required();
  cmp->add_option("--external", external, "Representation CSV aligned with dataset rows");
  auto* sg = app.add_subcommand("synth-gen", "Write the two-group synthetic dataset");
  sg->add_option("--params", params, "Synthetic params file (default configs/synthetic_defaults.kv)");
  sg->add_option("--output", output, "CSV path (default <out-dir>/synthetic.csv)");
  auto* au = app.add_subcommand("self-audit", "Recompute summaries from per-row CSVs; optional leakage check");
  au->add_option("--stem", stem, "experiment_a or experiment_b")->default_val("experiment_a");
  au->add_flag("--leakage", leakage, "Poison test rows and verify fitted parameters are unchanged");
  au->add_option("--config", config, "Experiment config for --leakage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*fit) {
      ExperimentConfig cfg;
      if (!config.empty()) {
        cfg = load_cfg(config, g);
      } else {
        if (recipe.empty()) throw Error(ErrorKind::invalid_argument, "fit needs --config or --recipe");
        cfg.recipe_path = recipe;
        cfg.method = parse_method(method);
        if (g.seed) cfg.seed = cfg.gd.seed = *g.seed;
        cfg.allow_large_n = g.allow_large_n;
      }
      const PreparedData data = load_experiment_data(cfg);
      AnyModel m = fit_any(cfg, data, eta, k);
      const std::string path = model_path.empty() ? out_path(g, "model.txt") : ensure_parent(model_path);
      save_model(path, m);
      if (export_design) write_numeric_csv(out_path(g, "design.csv"), data.x_raw, data.x_names);
      std::cout << "saved " << model_kind(m) << " model to " << path << '\n';
    } else if (*tr) {
      const AnyModel m = load_model(model_path);
      const NamedMatrix in = read_numeric_csv(input);
      const CenteredMatrix Xc = apply_centering(model_stats(m), design_for(model_stats(m), in));
      const Matrix T = transform_any(m, Xc.values());
      std::vector<std::string> names;
      for (Index j = 0; j < T.cols(); ++j) names.push_back("t" + std::to_string(j + 1));
      const std::string path = output.empty() ? out_path(g, "scores.csv") : ensure_parent(output);
      write_numeric_csv(path, T, names);
      std::cout << "wrote " << T.rows() << " x " << T.cols() << " scores to " << path << '\n';
    } else if (*ev) {
      const PreparedData data = prepare(load_recipe(recipe));
      const NamedMatrix p = read_numeric_csv(predictions);
      if (p.names.size() != 2 || p.names[0] != "row_id" || p.names[1] != "yhat")
        throw Error(ErrorKind::invalid_argument, "predictions CSV must have columns row_id,yhat");
      std::vector<std::size_t> rows;
      for (Index i = 0; i < p.values.rows(); ++i) {
        const double id = p.values(i, 0);
        if (id < 0 || id >= static_cast<double>(data.rows()) || id != std::floor(id))
          throw Error(ErrorKind::invalid_argument, "row_id " + format_double(id) + " is not a dataset row");
        rows.push_back(static_cast<std::size_t>(id));
      }
      if (fold >= 0) {
        const auto folds = split_folds(static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(k_folds),
                                       g.seed.value_or(0));
        if (fold >= k_folds) throw Error(ErrorKind::invalid_argument, "--fold out of range");
        auto sorted = rows;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != folds[static_cast<std::size_t>(fold)].test)
          throw Error(ErrorKind::invalid_argument, "row_ids do not match the test rows of fold " + std::to_string(fold));
      }
      std::vector<int> s;
      std::vector<double> yhat;
      for (Index i = 0; i < p.values.rows(); ++i) {
        s.push_back(data.groups()[rows[static_cast<std::size_t>(i)]]);
        yhat.push_back(p.values(i, 1));
      }
      nlohmann::ordered_json j;
      j["rows"] = rows.size();
      j["ks"] = ks_statistic(yhat, s);
      if (data.task == Task::classification) {
        const auto all_labels = data.labels();
        std::vector<int> labels, y;
        double hit = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          labels.push_back(yhat[i] > 0.5 ? 1 : 0);
          y.push_back(all_labels[rows[i]]);
          hit += labels.back() == y.back();
        }
        j["accuracy"] = hit / static_cast<double>(rows.size());
        const DisparateImpact di = disparate_impact(labels, s);
        j["di"] = di.di;
        j["di_ci_lo"] = di.ci_lo;
        j["di_ci_hi"] = di.ci_hi;
        j["di_degenerate"] = di.degenerate;
        j["eopp"] = eopp_ratio(labels, y, s);
      } else {
        double se = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const double e = yhat[i] - data.y(static_cast<Index>(rows[i]));
          se += e * e;
        }
        j["mse"] = se / static_cast<double>(rows.size());
      }
      std::ofstream(out_path(g, "eval.json")) << j.dump(1) << '\n';
      std::cout << j.dump(1) << '\n';
    } else if (*ea || *eb) {
      const ExperimentConfig cfg = load_cfg(config, g);
      const PreparedData data = load_experiment_data(cfg);
      const ResultTable t = *ea ? run_experiment_a(cfg, data) : run_experiment_b(cfg, data);
      const std::string st = *ea ? "experiment_a" : "experiment_b";
      write_results(g.out_dir, st, t);
      print_summary(t);
    } else if (*sk) {
      const ExperimentConfig cfg = load_cfg(config, g);
      const auto sel = select_k(cfg, load_experiment_data(cfg));
      write_selection(out_path(g, "select_k.csv"), sel);
      for (const auto& s : sel) std::cout << "eta=" << s.eta << " k=" << s.k << '\n';
    } else if (*be) {
      const auto rows = run_benchmark(parse_sizes(sizes), k, repeats, g.seed.value_or(0), eta);
      write_bench(out_path(g, "bench.csv"), rows);
      for (std::size_t i = 0; i + 1 < rows.size(); i += 2)
        std::cout << "n=" << rows[i].n << " d=" << rows[i].d << " pls_ms=" << rows[i].median_ms
                  << " fair_pls_ms=" << rows[i + 1].median_ms
                  << " ratio=" << rows[i + 1].median_ms / rows[i].median_ms << '\n';
    } else if (*cmp) {
      const ExperimentConfig cfg = load_cfg(config, g);
      const PreparedData data = load_experiment_data(cfg);
      std::optional<Matrix> ext;
      if (!external.empty()) ext = read_numeric_csv(external).values;
      const auto rows = compare_baselines(cfg, data, ext ? &*ext : nullptr);
      write_compare(out_path(g, "compare.csv"), rows);
      std::cout << "wrote " << rows.size() << " comparison rows\n";
    } else if (*sg) {
      SyntheticParams p = params.empty() ? default_synthetic_params() : synthetic_params_from_config(KvConfig::load(params));
      if (g.seed) p.seed = *g.seed;
      const Dataset ds = gen_synthetic(p);
      Matrix m(static_cast<Index>(ds.rows()), static_cast<Index>(ds.cols()));
      std::vector<std::string> names;
      for (std::size_t c = 0; c < ds.cols(); ++c) {
        names.push_back(ds.columns()[c].name);
        for (std::size_t r = 0; r < ds.rows(); ++r) m(static_cast<Index>(r), static_cast<Index>(c)) = ds.columns()[c].values[r];
      }
      const std::string path = output.empty() ? out_path(g, "synthetic.csv") : ensure_parent(output);
      write_numeric_csv(path, m, names);
      std::cout << "wrote " << ds.rows() << " rows to " << path << '\n';
    } else if (*au) {
      AuditReport rep;
      if (leakage) {
        if (config.empty()) throw Error(ErrorKind::invalid_argument, "--leakage needs --config");
        const ExperimentConfig cfg = load_cfg(config, g);
        rep = leakage_check(cfg, load_experiment_data(cfg));
      } else {
        rep = self_audit(g.out_dir, stem);
      }
      for (const auto& m : rep.messages) std::cout << m << '\n';
      std::cout << (rep.ok() ? "audit passed" : "audit FAILED") << " (" << rep.groups_checked << " checks, "
                << rep.mismatches << " mismatches)\n";
      if (!rep.ok()) {
        emit_error("audit_failed", std::to_string(rep.mismatches) + " mismatches");
        return 3;
      }
    }
  } catch (const ParseError& e) {
    emit_error(error_kind_name(e.kind()), e.what(), e.row(), e.column());
    return 2;
  } catch (const Error& e) {
    emit_error(error_kind_name(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 2;
  }
  return 0;
}
