#pragma once

#include <string>
#include <vector>

#include "fairpls/types.hpp"

namespace fairpls {

enum class GlmFamily { logistic, linear };

struct GlmModel {
  Vector coefficients;
  double intercept = 0.0;
  GlmFamily family = GlmFamily::linear;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // penalized negative log-likelihood per IRLS iterate
  std::vector<std::string> warnings;
};

GlmModel glm_fit(const Matrix& T, const Vector& y, GlmFamily family, double lambda = 1e-6,
                 double tol = 1e-8, int max_iter = 100);

Vector glm_predict(const GlmModel& model, const Matrix& T_new);

}  // namespace fairpls
