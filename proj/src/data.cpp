#include "fairpls/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"

#ifndef FAIRPLS_DEFAULT_CONFIG_DIR
#define FAIRPLS_DEFAULT_CONFIG_DIR "configs"
#endif

namespace fairpls {

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw Error(ErrorKind::invalid_argument, "dataset needs at least one column");
  auto len = [](const Column& c) {
    return c.kind == ColumnKind::categorical ? c.codes.size() : c.values.size();
  };
  n_ = len(columns_.front());
  for (const auto& c : columns_) {
    if (len(c) != n_)
      throw Error(ErrorKind::dimension_mismatch, "column '" + c.name + "' has " + std::to_string(len(c)) +
                                                     " values, expected " + std::to_string(n_));
    if (c.kind == ColumnKind::categorical)
      for (int code : c.codes)
        if (code < 0 || static_cast<std::size_t>(code) >= c.levels.size())
          throw Error(ErrorKind::invalid_argument, "column '" + c.name + "' has a code outside its level set");
  }
  if (n_ < 2) throw Error(ErrorKind::invalid_argument, "dataset needs at least 2 rows");
}

const Column& Dataset::column(const std::string& name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw Error(ErrorKind::invalid_argument, "no column named '" + name + "'");
}

bool Dataset::has_column(const std::string& name) const {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
  std::vector<Column> out;
  for (const auto& n : names) out.push_back(column(n));
  return Dataset(std::move(out));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  std::vector<Column> out;
  for (const auto& c : columns_) {
    Column s;
    s.name = c.name;
    s.kind = c.kind;
    s.levels = c.levels;
    for (std::size_t r : rows) {
      if (r >= n_) throw Error(ErrorKind::invalid_argument, "row index out of range");
      if (c.kind == ColumnKind::categorical)
        s.codes.push_back(c.codes[r]);
      else
        s.values.push_back(c.values[r]);
    }
    out.push_back(std::move(s));
  }
  return Dataset(std::move(out));
}

const ColumnRule* EncodingSpec::find(const std::string& name) const {
  for (const auto& [n, r] : rules)
    if (n == name) return &r;
  return nullptr;
}

EncodingSpec EncodingSpec::restricted(const std::vector<std::string>& names) const {
  EncodingSpec out;
  out.normalization = normalization;
  for (const auto& n : names) {
    const ColumnRule* r = find(n);
    if (!r) throw Error(ErrorKind::invalid_argument, "no encoding rule for column '" + n + "'");
    out.rules.emplace_back(n, *r);
  }
  return out;
}

namespace {

// RFC 4180 style record splitter. Returns false at end of input.
bool next_record(const std::string& text, std::size_t& pos, std::vector<std::string>& fields,
                 std::size_t& line) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
        ++pos;
        continue;
      }
      if (c == '\n') ++line;
      field += c;
      ++pos;
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      ++pos;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started = false;
      ++pos;
      continue;
    }
    if (c == '\r' || c == '\n') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      ++line;
      fields.push_back(std::move(field));
      return true;
    }
    field += c;
    field_started = true;
    ++pos;
  }
  if (quoted) throw ParseError("unterminated quoted field", line, fields.size() + 1);
  ++line;
  fields.push_back(std::move(field));
  return true;
}

std::string trim_copy(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?" || s == "null";
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(const std::string& text, const EncodingSpec& schema) {
  std::size_t pos = 0;
  std::size_t line = 1;
  std::vector<std::string> header;
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF) pos = 3;  // UTF-8 BOM
  if (!next_record(text, pos, header, line)) throw ParseError("missing header row", 1, 1);
  for (auto& h : header) h = trim_copy(h);

  auto header_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::invalid_argument, "column '" + name + "' not found in CSV header");
    return static_cast<std::size_t>(it - header.begin());
  };

  struct Slot {
    std::size_t src;
    const ColumnRule* rule;
    Column col;
    std::vector<std::string> tokens;
  };
  std::vector<Slot> slots;
  for (const auto& [name, rule] : schema.rules) {
    Slot s{header_index(name), &rule, {}, {}};
    s.col.name = name;
    s.col.kind = rule.kind == ColumnRule::Kind::one_hot       ? ColumnKind::categorical
                 : rule.kind == ColumnRule::Kind::passthrough ? ColumnKind::numeric
                                                              : ColumnKind::binary;
    slots.push_back(std::move(s));
  }
  std::vector<std::pair<std::size_t, const std::set<std::string>*>> filters;
  for (const auto& [name, allowed] : schema.row_filter) filters.emplace_back(header_index(name), &allowed);
  std::vector<std::pair<std::size_t, const std::set<std::string>*>> any_filters;
  for (const auto& [name, allowed] : schema.row_filter_any) any_filters.emplace_back(header_index(name), &allowed);

  std::vector<std::string> fields;
  while (true) {
    std::size_t row_line = line;
    if (!next_record(text, pos, fields, line)) break;
    if (fields.size() == 1 && trim_copy(fields[0]).empty()) continue;
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()),
                       row_line, std::min(fields.size(), header.size()) + 1);
    bool keep = true;
    for (const auto& [idx, allowed] : filters)
      if (!allowed->count(trim_copy(fields[idx]))) keep = false;
    if (keep && !any_filters.empty())
      keep = std::any_of(any_filters.begin(), any_filters.end(),
                         [&](const auto& f) { return f.second->count(trim_copy(fields[f.first])) > 0; });
    if (!keep) continue;
    for (auto& s : slots) {
      std::string tok = trim_copy(fields[s.src]);
      switch (s.rule->kind) {
        case ColumnRule::Kind::passthrough:
        case ColumnRule::Kind::threshold: {
          double v = 0.0;
          if (is_missing_token(tok)) throw ParseError("missing value in numeric column '" + s.col.name + "'", row_line, s.src + 1);
          if (!parse_double(tok, v))
            throw ParseError("non-numeric token '" + tok + "' in column '" + s.col.name + "'", row_line, s.src + 1);
          if (s.rule->kind == ColumnRule::Kind::threshold) v = v > s.rule->cut ? 1.0 : 0.0;
          s.col.values.push_back(v);
          break;
        }
        case ColumnRule::Kind::one_hot:
          if (tok.empty()) throw ParseError("missing value in categorical column '" + s.col.name + "'", row_line, s.src + 1);
          s.tokens.push_back(std::move(tok));
          break;
        case ColumnRule::Kind::binary_map: {
          auto it = s.rule->level_map.find(tok);
          if (it == s.rule->level_map.end())
            throw ParseError("unknown level '" + tok + "' under binary map for column '" + s.col.name + "'", row_line,
                             s.src + 1);
          s.col.values.push_back(it->second);
          break;
        }
      }
    }
  }

  std::vector<Column> cols;
  for (auto& s : slots) {
    if (s.rule->kind == ColumnRule::Kind::one_hot) {
      std::vector<std::string> levels = s.tokens;
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      s.col.codes.reserve(s.tokens.size());
      for (const auto& t : s.tokens)
        s.col.codes.push_back(static_cast<int>(std::lower_bound(levels.begin(), levels.end(), t) - levels.begin()));
      s.col.levels = std::move(levels);
    }
    cols.push_back(std::move(s.col));
  }
  return Dataset(std::move(cols));
}

Dataset load_csv(const std::string& path, const EncodingSpec& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

RawDesign encode(const Dataset& ds, const EncodingSpec& spec) {
  RawDesign out;
  std::vector<Vector> cols;
  for (const auto& c : ds.columns()) {
    const ColumnRule* rule = spec.find(c.name);
    if (!rule) throw Error(ErrorKind::invalid_argument, "no encoding rule for column '" + c.name + "'");
    const Index n = static_cast<Index>(ds.rows());
    if (rule->kind == ColumnRule::Kind::one_hot) {
      if (c.kind != ColumnKind::categorical)
        throw Error(ErrorKind::invalid_argument, "one-hot rule on non-categorical column '" + c.name + "'");
      for (std::size_t l = rule->drop_first ? 1 : 0; l < c.levels.size(); ++l) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = c.codes[i] == static_cast<int>(l) ? 1.0 : 0.0;
        cols.push_back(std::move(v));
        out.names.push_back(c.name + "=" + c.levels[l]);
      }
    } else {
      if (c.kind == ColumnKind::categorical)
        throw Error(ErrorKind::invalid_argument, "categorical column '" + c.name + "' needs a one-hot rule");
      cols.push_back(Eigen::Map<const Vector>(c.values.data(), n));
      out.names.push_back(c.name);
    }
  }
  out.values.resize(static_cast<Index>(ds.rows()), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Index>(j)) = cols[j];
  return out;
}

CenteredMatrix CenteredMatrix::fit(const Matrix& raw, Normalization norm, std::vector<std::string> names) {
  const Index n = raw.rows(), p = raw.cols();
  if (n < 2) throw Error(ErrorKind::invalid_argument, "centering needs at least 2 rows");
  if (p < 1) throw Error(ErrorKind::invalid_argument, "centering needs at least 1 column");
  if (!names.empty() && static_cast<Index>(names.size()) != p)
    throw Error(ErrorKind::dimension_mismatch, "column name count does not match matrix width");
  if (!raw.allFinite()) throw Error(ErrorKind::invalid_argument, "matrix has non-finite entries");

  CenteredMatrix out;
  Vector means = raw.colwise().mean();
  std::vector<Index> kept;
  std::vector<double> scales;
  for (Index j = 0; j < p; ++j) {
    double scale = 1.0;
    if (norm == Normalization::standardize) {
      scale = std::sqrt((raw.col(j).array() - means(j)).square().sum() / static_cast<double>(n));
      if (!(scale > 1e-12 * std::max(1.0, std::abs(means(j))))) {
        out.warnings_.push_back("dropped zero-variance column '" + (names.empty() ? std::to_string(j) : names[j]) + "'");
        continue;
      }
    }
    kept.push_back(j);
    scales.push_back(scale);
  }
  if (kept.empty()) throw Error(ErrorKind::degenerate, "every column has zero variance");

  CenteringStats& st = out.stats_;
  st.input_cols = p;
  st.kept = kept;
  st.normalization = norm;
  st.means.resize(static_cast<Index>(kept.size()));
  st.scales = Eigen::Map<const Vector>(scales.data(), static_cast<Index>(scales.size()));
  out.values_.resize(n, static_cast<Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    Index j = kept[c];
    st.means(static_cast<Index>(c)) = means(j);
    st.names.push_back(names.empty() ? "c" + std::to_string(j) : names[j]);
    out.values_.col(static_cast<Index>(c)) = (raw.col(j).array() - means(j)) / scales[c];
  }
  out.centered_ = true;
  return out;
}

CenteredMatrix CenteredMatrix::from_centered(Matrix values) {
  const Index n = values.rows(), d = values.cols();
  if (n < 2 || d < 1) throw Error(ErrorKind::invalid_argument, "centered matrix needs n >= 2 and d >= 1");
  CenteredMatrix out;
  out.stats_.input_cols = d;
  out.stats_.kept.resize(static_cast<std::size_t>(d));
  std::iota(out.stats_.kept.begin(), out.stats_.kept.end(), Index{0});
  out.stats_.means = Vector::Zero(d);
  out.stats_.scales = Vector::Ones(d);
  for (Index j = 0; j < d; ++j) out.stats_.names.push_back("c" + std::to_string(j));
  out.values_ = std::move(values);
  out.centered_ = true;
  require_centered(out, "matrix");
  return out;
}

CenteredMatrix CenteredMatrix::from_stats(const CenteringStats& stats, Matrix values) {
  if (values.cols() != stats.output_cols())
    throw Error(ErrorKind::dimension_mismatch, "values do not match centering stats");
  CenteredMatrix out;
  out.stats_ = stats;
  out.values_ = std::move(values);
  out.centered_ = true;
  return out;
}

CenteredMatrix encode_center(const Dataset& ds, const EncodingSpec& spec) {
  RawDesign raw = encode(ds, spec);
  return CenteredMatrix::fit(raw.values, spec.normalization, raw.names);
}

CenteredMatrix apply_centering(const CenteringStats& stats, const Matrix& raw) {
  if (raw.cols() != stats.input_cols)
    throw Error(ErrorKind::dimension_mismatch, "apply_centering: expected " + std::to_string(stats.input_cols) +
                                                   " columns, got " + std::to_string(raw.cols()));
  Matrix out(raw.rows(), stats.output_cols());
  for (Index c = 0; c < stats.output_cols(); ++c)
    out.col(c) = (raw.col(stats.kept[static_cast<std::size_t>(c)]).array() - stats.means(c)) / stats.scales(c);
  return CenteredMatrix::from_stats(stats, std::move(out));
}

void require_centered(const CenteredMatrix& m, const char* what) {
  if (!m.centered()) throw Error(ErrorKind::not_centered, std::string(what) + " is not centered");
  if (m.rows() < 2 || m.cols() < 1) throw Error(ErrorKind::invalid_argument, std::string(what) + " is empty");
  const double scale = m.values().cwiseAbs().maxCoeff();
  const double worst = m.values().colwise().mean().cwiseAbs().maxCoeff();
  if (worst > 1e-8 * scale)
    throw Error(ErrorKind::not_centered, std::string(what) + " has column mean " + std::to_string(worst) +
                                             "; center it on the fitting rows first");
}

std::string default_config_dir() {
  if (const char* env = std::getenv("FAIRPLS_CONFIG_DIR"); env && *env) return env;
  return FAIRPLS_DEFAULT_CONFIG_DIR;
}

namespace {

Vector vector_from(const KvValue& v, Index expected, const std::string& key) {
  std::vector<double> xs = v.as_doubles();
  if (static_cast<Index>(xs.size()) != expected)
    throw Error(ErrorKind::invalid_argument, key + " needs " + std::to_string(expected) + " entries");
  return Eigen::Map<Vector>(xs.data(), expected);
}

Matrix matrix_from(const KvValue& v, Index d, const std::string& key) {
  const auto& rows = v.as_list();
  if (static_cast<Index>(rows.size()) != d) throw Error(ErrorKind::invalid_argument, key + " needs " + std::to_string(d) + " rows");
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) m.row(i) = vector_from(rows[static_cast<std::size_t>(i)], d, key).transpose();
  return m;
}

// Symmetric square root factor; rejects non-symmetric or indefinite input.
Matrix psd_factor(const Matrix& C, const char* what) {
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorKind::invalid_argument, std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(C);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw Error(ErrorKind::invalid_argument, std::string(what) + " is not positive semidefinite (min eigenvalue " +
                                                 std::to_string(es.eigenvalues().minCoeff()) + ")");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

SyntheticParams synthetic_params_from_config(const KvConfig& cfg) {
  constexpr Index d = 7;
  SyntheticParams p;
  p.n_per_group = static_cast<int>(cfg.get_int("n_per_group", 500));
  p.mean_0 = vector_from(cfg.at("mean_0"), d, "mean_0");
  p.mean_1 = vector_from(cfg.at("mean_1"), d, "mean_1");
  p.cov_0 = matrix_from(cfg.at("cov_0"), d, "cov_0");
  p.cov_1 = matrix_from(cfg.at("cov_1"), d, "cov_1");
  p.target_coeffs_0 = vector_from(cfg.at("target_coeffs_0"), d, "target_coeffs_0");
  p.target_coeffs_1 = vector_from(cfg.at("target_coeffs_1"), d, "target_coeffs_1");
  p.noise_sd_0 = cfg.get_double("noise_sd_0", 1.0);
  p.noise_sd_1 = cfg.get_double("noise_sd_1", 1.0);
  p.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  return p;
}

SyntheticParams default_synthetic_params() {
  return synthetic_params_from_config(KvConfig::load(default_config_dir() + "/synthetic_defaults.kv"));
}

Dataset gen_synthetic(const SyntheticParams& p) {
  constexpr Index d = 7;
  if (p.n_per_group < 1) throw Error(ErrorKind::invalid_argument, "n_per_group must be positive");
  if (p.mean_0.size() != d || p.mean_1.size() != d || p.target_coeffs_0.size() != d || p.target_coeffs_1.size() != d ||
      p.cov_0.rows() != d || p.cov_0.cols() != d || p.cov_1.rows() != d || p.cov_1.cols() != d)
    throw Error(ErrorKind::dimension_mismatch, "synthetic parameters must be 7-dimensional");
  if (p.noise_sd_0 < 0 || p.noise_sd_1 < 0) throw Error(ErrorKind::invalid_argument, "noise sd must be >= 0");
  const Matrix L[2] = {psd_factor(p.cov_0, "cov_0"), psd_factor(p.cov_1, "cov_1")};
  const Vector* mean[2] = {&p.mean_0, &p.mean_1};
  const Vector* coef[2] = {&p.target_coeffs_0, &p.target_coeffs_1};
  const double noise[2] = {p.noise_sd_0, p.noise_sd_1};

  const std::size_t n = 2 * static_cast<std::size_t>(p.n_per_group);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(static_cast<Index>(n), d);
  Vector y(static_cast<Index>(n)), s(static_cast<Index>(n));
  Vector z(d);
  Index row = 0;
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < p.n_per_group; ++i, ++row) {
      for (Index j = 0; j < d; ++j) z(j) = normal(rng);
      Vector x = *mean[g] + L[g] * z;
      X.row(row) = x.transpose();
      y(row) = coef[g]->dot(x) + noise[g] * normal(rng);
      s(row) = g;
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Column> cols(d + 2);
  for (Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)] = {"x" + std::to_string(j + 1), ColumnKind::numeric, {}, {}, {}};
  cols[d] = {"y", ColumnKind::numeric, {}, {}, {}};
  cols[d + 1] = {"s", ColumnKind::binary, {}, {}, {}};
  for (std::size_t r : perm) {
    for (Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)].values.push_back(X(static_cast<Index>(r), j));
    cols[d].values.push_back(y(static_cast<Index>(r)));
    cols[d + 1].values.push_back(s(static_cast<Index>(r)));
  }
  return Dataset(std::move(cols));
}

std::vector<Fold> split_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2 || k_folds > n)
    throw Error(ErrorKind::invalid_argument, "k_folds must lie in [2, n]; got k=" + std::to_string(k_folds) +
                                                 " for n=" + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % k_folds);
  std::vector<Fold> folds(k_folds);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k_folds; ++f)
      (static_cast<std::size_t>(fold_of[i]) == f ? folds[f].test : folds[f].train).push_back(i);
  return folds;
}

Fold split_train_test(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::invalid_argument, "need at least 2 rows to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorKind::invalid_argument, "train fraction must lie in (0, 1)");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Fold f;
  f.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  f.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(f.train.begin(), f.train.end());
  std::sort(f.test.begin(), f.test.end());
  return f;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

Vector take_rows(const Vector& v, const std::vector<std::size_t>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(static_cast<Index>(rows[i]));
  return out;
}

}  // namespace fairpls
