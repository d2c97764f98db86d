#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpls/data.hpp"
#include "fairpls/types.hpp"

namespace fairpls {

struct NipalsOptions {
  double tol = 1e-9;
  int max_iter = 500;
};

struct PlsModel {
  Matrix W;  // d x k weights
  Matrix P;  // d x k loadings
  Matrix C;  // m x k target weights
  Vector b;  // inner regression scalars
  Matrix T;  // n x k training scores
  Matrix U;  // n x k target scores
  CenteringStats x_stats;
  std::vector<int> iterations;
  std::vector<std::string> warnings;

  Index k() const { return W.cols(); }
};

PlsModel nipals_fit(const CenteredMatrix& X, const CenteredMatrix& Y, int k,
                    const NipalsOptions& opts = {});

// Replays the training deflation sequence on new rows.
Matrix transform(const PlsModel& model, const Matrix& X_new);
Matrix transform(const PlsModel& model, const CenteredMatrix& X_new);
Matrix reconstruct(const PlsModel& model, const Matrix& scores);

struct EigenPair {
  Vector vector;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Leading eigenpair of a symmetric PSD matrix. Starts from e_1 and, with a
// seeded random vector as a second start, keeps the larger eigenvalue.
// Non-convergence is reported through `converged` and `residual`.
EigenPair power_iteration(const Matrix& M, double tol = 1e-12, int max_iter = 20000,
                          std::uint64_t seed = 0);

// Flip sign so the first entry with |x| > 1e-12 * ||x||_inf is positive.
// Returns +1 or -1, the applied factor.
double canonical_sign(const Vector& w);

}  // namespace fairpls
