#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpls/data.hpp"
#include "fairpls/fair_pls.hpp"
#include "fairpls/types.hpp"

namespace fairpls {

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  std::optional<double> bandwidth;  // rbf only; empty means median heuristic

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double sigma) { return {KernelKind::rbf, sigma}; }
  static KernelSpec rbf_median() { return {KernelKind::rbf, std::nullopt}; }

  bool resolved() const { return kind == KernelKind::linear || bandwidth.has_value(); }
  std::string to_string() const;
};

class KvValue;
KernelSpec kernel_spec_from_value(const KvValue& v);

Matrix gram(const Matrix& Xa, const Matrix& Xb, const KernelSpec& kernel);

double median_heuristic(const Matrix& X, std::uint64_t seed = 0);
KernelSpec resolve_kernel(const KernelSpec& kernel, const Matrix& X, std::uint64_t seed = 0);

struct GramCentering {
  Vector col_means;  // column means of the training Gram
  double grand_mean = 0.0;

  // Centers a cross Gram K(new, train) consistently with the training centering.
  Matrix apply(const Matrix& K_cross) const;
};

struct CenteredGram {
  Matrix K;
  GramCentering stats;
};

CenteredGram center_gram(const Matrix& K);

double hsic(const Matrix& Kx, const Matrix& Ks);

struct DataFingerprint {
  Index rows = 0;
  Index cols = 0;
  std::uint64_t checksum = 0;

  static DataFingerprint of(const Matrix& X);
  bool operator==(const DataFingerprint&) const = default;
};

struct KernelFairPlsModel {
  Matrix A;        // n x k dual coefficients
  Matrix T;        // n x k scores K_h alpha_h
  Matrix Tau;      // n x k unit scores used for deflation
  Matrix KTau;     // n x k, K_h tau_h
  Vector score_norms;
  Vector tau_k_tau;
  double eta = 0.0;
  KernelSpec kernel_x;
  KernelSpec kernel_s;
  Matrix train_x;
  GramCentering centering;
  CenteringStats x_stats;
  DataFingerprint fingerprint;
  std::vector<ComponentTrace> traces;
  std::vector<std::string> warnings;

  Index k() const { return A.cols(); }
};

KernelFairPlsModel kfpls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const Matrix& S_raw,
                             int k, double eta, const KernelSpec& kernel_x,
                             const KernelSpec& kernel_s, const GdParams& gd = {});

Matrix kfpls_transform(const KernelFairPlsModel& model, const Matrix& X_new);

// K_h for h = 1..k+1 on the training data (diagnostics and tests).
std::vector<Matrix> kfpls_deflation_sequence(const KernelFairPlsModel& model);

}  // namespace fairpls
