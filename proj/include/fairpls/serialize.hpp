#pragma once

// Portable text format for fitted models:
//
//   fairpls-model 1
//   kind fair-pls
//   scalar eta 1
//   string mode demographic-parity
//   matrix W 8 3
//   <8 lines of 3 values, %.17g>
//   strings warnings 0
//   trace 0 <restart> <iterations> <halvings> <converged> <residual> <len>
//   <len values>
//   end
//
// Vectors are written as `vector NAME len` followed by one line of values.

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "fairpls/fair_pls.hpp"
#include "fairpls/kernel.hpp"
#include "fairpls/pls.hpp"

namespace fairpls {

using AnyModel = std::variant<PlsModel, FairPlsModel, KernelFairPlsModel>;

void write_model(std::ostream& os, const AnyModel& model);
AnyModel read_model(std::istream& is);
void save_model(const std::string& path, const AnyModel& model);
AnyModel load_model(const std::string& path);

const char* model_kind(const AnyModel& model);
const CenteringStats& model_stats(const AnyModel& model);
// Scores for rows already preprocessed with model_stats().
Matrix transform_any(const AnyModel& model, const Matrix& X_centered);

// Numeric CSV with a header row.
struct NamedMatrix {
  Matrix values;
  std::vector<std::string> names;
};
NamedMatrix read_numeric_csv(const std::string& path);
void write_numeric_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& names);
std::string format_double(double v);

}  // namespace fairpls
