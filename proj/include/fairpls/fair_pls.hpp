#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpls/data.hpp"
#include "fairpls/pls.hpp"
#include "fairpls/types.hpp"

namespace fairpls {

enum class FairnessMode { demographic_parity, equality_of_odds };
enum class GradientMode { analytic, finite_difference };

const char* fairness_mode_name(FairnessMode mode);
FairnessMode parse_fairness_mode(const std::string& s);

struct GdParams {
  double learning_rate = 0.05;
  int max_iter = 2000;
  double tol = 1e-9;
  int restarts = 3;
  std::uint64_t seed = 0;
  GradientMode gradient = GradientMode::analytic;

  void validate() const;
};

struct ComponentTrace {
  std::vector<double> objective;  // accepted iterates of the winning restart
  int restart = 0;
  int iterations = 0;
  int halvings = 0;
  bool converged = false;
  double residual = 0.0;  // ||Mw - (w'Mw) w|| at the final iterate, scaled like the objective
};

struct FairPlsModel {
  Matrix W;      // d x k unit weights
  Matrix Gamma;  // d x k loadings
  Matrix T;      // n x k training scores
  double eta = 0.0;
  double ridge = 0.0;  // EO only
  FairnessMode mode = FairnessMode::demographic_parity;
  CenteringStats x_stats;
  std::vector<ComponentTrace> traces;
  std::vector<std::string> warnings;

  Index k() const { return W.cols(); }
};

struct ObjectiveValue {
  double value = 0.0;
  Vector grad;
};

ObjectiveValue fpls_objective_grad(const Vector& w, const CenteredMatrix& X, const CenteredMatrix& Y,
                                   const CenteredMatrix& S, double eta);

FairPlsModel fair_pls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S,
                          int k, double eta, const GdParams& gd = {});

// Closed-form regime: leading eigenvectors of X_h' M M' X_h with M M' = YY' - eta SS'.
FairPlsModel eigen_regime_fit(const CenteredMatrix& X, const CenteredMatrix& Y,
                              const CenteredMatrix& S, int k, double eta);

// Upper end of the eta range where YY' - eta SS' stays PSD by the eigenvalue bound.
double eigen_regime_bound(const CenteredMatrix& Y, const CenteredMatrix& S);

// C_{Xw,S|Y} as a 1 x q matrix.
Matrix conditional_cross_cov(const Vector& scores, const CenteredMatrix& S, const CenteredMatrix& Y,
                             double ridge);

// S with its linear prediction from Y removed, R = S - Y (C_YY + ridge I)^-1 C_YS.
Matrix eo_residual(const CenteredMatrix& S, const CenteredMatrix& Y, double ridge);

ObjectiveValue eo_objective_grad(const Vector& w, const CenteredMatrix& X, const CenteredMatrix& Y,
                                 const CenteredMatrix& S, double eta, double ridge,
                                 GradientMode mode = GradientMode::analytic);

FairPlsModel eo_fair_pls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S,
                             int k, double eta, const GdParams& gd = {}, double ridge = 0.0);

Matrix transform(const FairPlsModel& model, const Matrix& X_new);
Matrix transform(const FairPlsModel& model, const CenteredMatrix& X_new);
Matrix reconstruct(const FairPlsModel& model, const Matrix& scores);

double correlation_ratio(const Vector& t, const std::vector<int>& groups);

struct VanillaResult {
  Matrix scores;  // n x (#selected), columns of the PLS representation X W
  std::vector<bool> selected;
  Vector ratios;
  PlsModel pls;
};

VanillaResult vanilla_fair_pls(const CenteredMatrix& X, const CenteredMatrix& Y,
                               const std::vector<int>& groups, int k, double tau);

}  // namespace fairpls
