#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairpls/types.hpp"

namespace fairpls {

enum class ColumnKind { numeric, categorical, binary };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> values;       // numeric / binary (0 or 1)
  std::vector<int> codes;           // categorical: index into levels
  std::vector<std::string> levels;  // categorical: sorted level set
};

// Typed, immutable, column-major table.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  Dataset select(const std::vector<std::string>& names) const;
  Dataset subset(const std::vector<std::size_t>& rows) const;

 private:
  std::vector<Column> columns_;
  std::size_t n_ = 0;
};

enum class Normalization { none, standardize };

struct ColumnRule {
  // threshold: numeric token > cut maps to 1, otherwise 0.
  enum class Kind { passthrough, one_hot, binary_map, threshold };
  Kind kind = Kind::passthrough;
  bool drop_first = true;
  std::map<std::string, double> level_map;  // binary_map: raw token -> 0/1
  double cut = 0.0;

  static ColumnRule passthrough() { return {}; }
  static ColumnRule one_hot(bool drop_first = true) { return {Kind::one_hot, drop_first, {}, 0.0}; }
  static ColumnRule binary(std::map<std::string, double> m) { return {Kind::binary_map, true, std::move(m), 0.0}; }
  static ColumnRule greater_than(double cut) { return {Kind::threshold, true, {}, cut}; }
};

struct EncodingSpec {
  // Output order follows this list. CSV columns without a rule are not loaded.
  std::vector<std::pair<std::string, ColumnRule>> rules;
  Normalization normalization = Normalization::none;
  // Rows whose raw token in the named column is not in the set are skipped at load time.
  std::map<std::string, std::set<std::string>> row_filter;
  // When non-empty, a row is kept only if at least one named column matches its set.
  std::map<std::string, std::set<std::string>> row_filter_any;

  const ColumnRule* find(const std::string& name) const;
  EncodingSpec restricted(const std::vector<std::string>& names) const;
};

Dataset load_csv(const std::string& path, const EncodingSpec& schema);
Dataset parse_csv(const std::string& text, const EncodingSpec& schema);

struct RawDesign {
  Matrix values;
  std::vector<std::string> names;
};

// One-hot expansion without centering.
RawDesign encode(const Dataset& ds, const EncodingSpec& spec);

struct CenteringStats {
  Index input_cols = 0;       // raw columns expected by apply_centering
  std::vector<Index> kept;    // raw column behind each output column
  Vector means;
  Vector scales;
  std::vector<std::string> names;
  Normalization normalization = Normalization::none;

  Index output_cols() const { return static_cast<Index>(kept.size()); }
};

class CenteredMatrix {
 public:
  CenteredMatrix() = default;

  // Centers (and optionally scales) raw columns. Zero-variance columns are
  // dropped under standardization, with a warning.
  static CenteredMatrix fit(const Matrix& raw, Normalization norm = Normalization::none,
                            std::vector<std::string> names = {});
  // Adopts values that are already column-centered (means recorded as 0, scales 1).
  static CenteredMatrix from_centered(Matrix values);
  static CenteredMatrix from_stats(const CenteringStats& stats, Matrix values);

  const Matrix& values() const { return values_; }
  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  const Vector& col_means() const { return stats_.means; }
  const Vector& col_scales() const { return stats_.scales; }
  const CenteringStats& stats() const { return stats_; }
  bool centered() const { return centered_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  Matrix values_;
  CenteringStats stats_;
  bool centered_ = false;
  std::vector<std::string> warnings_;
};

CenteredMatrix encode_center(const Dataset& ds, const EncodingSpec& spec);
CenteredMatrix apply_centering(const CenteringStats& stats, const Matrix& raw);

// Throws not_centered unless every column mean is negligible against the entries.
void require_centered(const CenteredMatrix& m, const char* what);

struct SyntheticParams {
  int n_per_group = 500;
  Vector mean_0, mean_1;
  Matrix cov_0, cov_1;
  Vector target_coeffs_0, target_coeffs_1;
  double noise_sd_0 = 1.0;
  double noise_sd_1 = 1.0;
  std::uint64_t seed = 0;
};

class KvConfig;
SyntheticParams synthetic_params_from_config(const KvConfig& cfg);
// Reads configs/synthetic_defaults.kv (FAIRPLS_CONFIG_DIR overrides the location).
SyntheticParams default_synthetic_params();
std::string default_config_dir();

// Columns x1..x7 (numeric), y (numeric), s (binary, group label).
Dataset gen_synthetic(const SyntheticParams& params);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Fold> split_folds(std::size_t n, std::size_t k_folds, std::uint64_t seed);
Fold split_train_test(std::size_t n, double train_fraction, std::uint64_t seed);

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows);
Vector take_rows(const Vector& v, const std::vector<std::size_t>& rows);

}  // namespace fairpls
