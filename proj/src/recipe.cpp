#include "fairpls/recipe.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"

#ifndef FAIRPLS_DEFAULT_DATA_DIR
#define FAIRPLS_DEFAULT_DATA_DIR "data"
#endif

namespace fairpls {

const char* task_name(Task t) { return t == Task::classification ? "classification" : "regression"; }

Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw Error(ErrorKind::invalid_argument, "unknown task '" + s + "' (expected classification or regression)");
}

std::string default_data_dir() {
  if (const char* env = std::getenv("FAIRPLS_DATA_DIR"); env && *env) return env;
  return FAIRPLS_DEFAULT_DATA_DIR;
}

namespace {

std::map<std::string, std::set<std::string>> token_sets(const KvValue& v, const std::string& key) {
  if (!v.is_map()) throw Error(ErrorKind::invalid_argument, key + " must be a map of column -> [values]");
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [col, vals] : v.as_map()) {
    auto list = vals.is_list() ? vals.as_strings() : std::vector<std::string>{vals.as_string()};
    out[col] = std::set<std::string>(list.begin(), list.end());
  }
  return out;
}

ColumnRule label_rule(const KvConfig& cfg, const std::string& prefix) {
  const bool has_map = cfg.has(prefix + "_map");
  const bool has_cut = cfg.has(prefix + "_threshold");
  if (has_map && has_cut) throw Error(ErrorKind::invalid_argument, prefix + "_map and " + prefix + "_threshold are exclusive");
  if (has_cut) return ColumnRule::greater_than(cfg.at(prefix + "_threshold").as_double());
  if (!has_map) return ColumnRule::passthrough();
  const KvValue& m = cfg.at(prefix + "_map");
  if (!m.is_map()) throw Error(ErrorKind::invalid_argument, prefix + "_map must be a map");
  std::map<std::string, double> levels;
  for (const auto& [tok, val] : m.as_map()) levels[tok] = val.as_double();
  return ColumnRule::binary(std::move(levels));
}

std::string resolve_path(const std::string& p, const std::string& root) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(root) / p).string();
}

}  // namespace

Recipe recipe_from_config(const KvConfig& cfg) {
  Recipe r;
  r.name = cfg.get_string("name", "dataset");
  r.source = cfg.get_string("source", "csv");
  if (r.source != "csv" && r.source != "synthetic")
    throw Error(ErrorKind::invalid_argument, "recipe source must be csv or synthetic, got '" + r.source + "'");
  r.csv = cfg.get_string("csv", "");
  r.synthetic = cfg.get_string("synthetic", "");
  r.task = parse_task(cfg.get_string("task", "classification"));
  r.target = cfg.get_string("target", r.source == "synthetic" ? "y" : "");
  r.sensitive = cfg.get_string("sensitive", r.source == "synthetic" ? "s" : "");
  if (r.target.empty() || r.sensitive.empty())
    throw Error(ErrorKind::invalid_argument, "recipe needs target and sensitive columns");
  r.target_rule = label_rule(cfg, "target");
  r.sensitive_rule = label_rule(cfg, "sensitive");
  if (cfg.has("numeric")) r.numeric = cfg.at("numeric").as_strings();
  if (cfg.has("categorical")) r.categorical = cfg.at("categorical").as_strings();
  if (r.source == "synthetic" && r.numeric.empty() && r.categorical.empty())
    for (int j = 1; j <= 7; ++j) r.numeric.push_back("x" + std::to_string(j));
  if (r.numeric.empty() && r.categorical.empty()) throw Error(ErrorKind::invalid_argument, "recipe has no feature columns");
  if (cfg.has("filter")) r.filter = token_sets(cfg.at("filter"), "filter");
  if (cfg.has("filter_any")) r.filter_any = token_sets(cfg.at("filter_any"), "filter_any");
  const std::string norm = cfg.get_string("normalize", "standardize");
  if (norm == "standardize")
    r.normalization = Normalization::standardize;
  else if (norm == "none")
    r.normalization = Normalization::none;
  else
    throw Error(ErrorKind::invalid_argument, "normalize must be standardize or none, got '" + norm + "'");
  r.standardize_target = cfg.get_bool("standardize_target", false);
  r.standardize_sensitive = cfg.get_bool("standardize_sensitive", false);
  r.drop_first = cfg.get_bool("drop_first", true);
  r.base_dir = cfg.base_dir();

  std::vector<std::string> all = r.numeric;
  all.insert(all.end(), r.categorical.begin(), r.categorical.end());
  std::vector<std::string> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::invalid_argument, "a feature column is listed twice");
  for (const auto& c : all)
    if (c == r.target || c == r.sensitive)
      throw Error(ErrorKind::invalid_argument, "column '" + c + "' cannot be both a feature and the target/sensitive column");
  if (r.target == r.sensitive) throw Error(ErrorKind::invalid_argument, "target and sensitive columns must differ");
  return r;
}

Recipe load_recipe(const std::string& path) { return recipe_from_config(KvConfig::load(path)); }

std::vector<int> PreparedData::groups() const {
  std::vector<int> g(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) g[static_cast<std::size_t>(i)] = s(i) > 0.5 ? 1 : 0;
  return g;
}

std::vector<int> PreparedData::labels() const {
  if (task != Task::classification) throw Error(ErrorKind::invalid_argument, "labels() needs a classification task");
  std::vector<int> l(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) l[static_cast<std::size_t>(i)] = y(i) > 0.5 ? 1 : 0;
  return l;
}

PreparedData prepare(const Recipe& r, std::optional<std::uint64_t> seed) {
  Dataset ds;
  EncodingSpec spec;
  spec.normalization = r.normalization;
  for (const auto& c : r.numeric) spec.rules.emplace_back(c, ColumnRule::passthrough());
  for (const auto& c : r.categorical) spec.rules.emplace_back(c, ColumnRule::one_hot(r.drop_first));
  spec.rules.emplace_back(r.target, r.target_rule);
  spec.rules.emplace_back(r.sensitive, r.sensitive_rule);

  if (r.source == "synthetic") {
    SyntheticParams p = r.synthetic.empty()
                            ? default_synthetic_params()
                            : synthetic_params_from_config(KvConfig::load(resolve_path(r.synthetic, r.base_dir)));
    if (seed) p.seed = *seed;
    ds = gen_synthetic(p);
    std::vector<std::string> names;
    for (const auto& [n, rule] : spec.rules) names.push_back(n);
    ds = ds.select(names);
  } else {
    if (r.csv.empty()) throw Error(ErrorKind::invalid_argument, "recipe '" + r.name + "' has no csv path");
    spec.row_filter = r.filter;
    spec.row_filter_any = r.filter_any;
    ds = load_csv(resolve_path(r.csv, default_data_dir()), spec);
  }

  PreparedData out;
  out.name = r.name;
  out.task = r.task;
  out.normalization = r.normalization;
  out.standardize_target = r.standardize_target;
  out.standardize_sensitive = r.standardize_sensitive;

  std::vector<std::string> feats = r.numeric;
  feats.insert(feats.end(), r.categorical.begin(), r.categorical.end());
  RawDesign raw = encode(ds.select(feats), spec);
  out.x_raw = std::move(raw.values);
  out.x_names = std::move(raw.names);

  const auto& tc = ds.column(r.target).values;
  const auto& sc = ds.column(r.sensitive).values;
  out.y = Eigen::Map<const Vector>(tc.data(), static_cast<Index>(tc.size()));
  out.s = Eigen::Map<const Vector>(sc.data(), static_cast<Index>(sc.size()));
  for (Index i = 0; i < out.s.size(); ++i)
    if (out.s(i) != 0.0 && out.s(i) != 1.0)
      throw Error(ErrorKind::invalid_argument, "sensitive column '" + r.sensitive + "' must map to 0/1");
  if (out.task == Task::classification)
    for (Index i = 0; i < out.y.size(); ++i)
      if (out.y(i) != 0.0 && out.y(i) != 1.0)
        throw Error(ErrorKind::invalid_argument, "classification target '" + r.target + "' must map to 0/1");
  const double s1 = out.s.sum();
  if (s1 == 0.0 || s1 == static_cast<double>(out.s.size()))
    throw Error(ErrorKind::invalid_argument, "sensitive column '" + r.sensitive + "' has a single group");
  return out;
}

CenteredBlocks center_rows(const PreparedData& d, const std::vector<std::size_t>& rows) {
  CenteredBlocks b;
  b.X = CenteredMatrix::fit(take_rows(d.x_raw, rows), d.normalization, d.x_names);
  b.Y = CenteredMatrix::fit(Matrix(take_rows(d.y, rows)),
                            d.standardize_target ? Normalization::standardize : Normalization::none, {"y"});
  b.S = CenteredMatrix::fit(Matrix(take_rows(d.s, rows)),
                            d.standardize_sensitive ? Normalization::standardize : Normalization::none, {"s"});
  if (b.Y.cols() != 1) throw Error(ErrorKind::degenerate, "target is constant on the fitting rows");
  if (b.S.cols() != 1) throw Error(ErrorKind::degenerate, "sensitive attribute is constant on the fitting rows");
  return b;
}

CenteredBlocks center_like(const CenteredBlocks& f, const PreparedData& d, const std::vector<std::size_t>& rows) {
  CenteredBlocks b;
  b.X = apply_centering(f.X.stats(), take_rows(d.x_raw, rows));
  b.Y = apply_centering(f.Y.stats(), Matrix(take_rows(d.y, rows)));
  b.S = apply_centering(f.S.stats(), Matrix(take_rows(d.s, rows)));
  return b;
}

}  // namespace fairpls
