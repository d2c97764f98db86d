#pragma once

#include <vector>

#include "fairpls/data.hpp"
#include "fairpls/fair_pls.hpp"
#include "fairpls/pls.hpp"
#include "fairpls/types.hpp"

namespace fairpls {

double cov2(const Matrix& T, const Matrix& Z);

// Relative trace error of X - scores * loadings'.
double reconstruction_error(const Matrix& X, const Matrix& scores, const Matrix& loadings);
double reconstruction_error(const CenteredMatrix& X, const PlsModel& model);
double reconstruction_error(const CenteredMatrix& X, const FairPlsModel& model);

struct DisparateImpact {
  double di = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool degenerate = false;  // p0 = 0: CI collapses to [0, 0]
};

DisparateImpact disparate_impact(const std::vector<int>& yhat, const std::vector<int>& s,
                                 double alpha = 0.05);

double ks_statistic(const std::vector<double>& yhat, const std::vector<int>& s);

double eopp_ratio(const std::vector<int>& yhat, const std::vector<int>& y, const std::vector<int>& s);

struct FairnessReport {
  double cov2_rep_target = 0.0;
  double cov2_rep_sensitive = 0.0;
  double reconstruction_error = 0.0;
  double di = 0.0;
  double di_ci_lo = 0.0;
  double di_ci_hi = 0.0;
  double ks = 0.0;
  double eopp = 0.0;
  double accuracy = 0.0;
  double mse = 0.0;
};

std::vector<int> to_labels(const Vector& v);

}  // namespace fairpls
