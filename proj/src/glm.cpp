#include "fairpls/glm.hpp"

#include <algorithm>
#include <cmath>

#include "fairpls/error.hpp"

namespace fairpls {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix with_intercept(const Matrix& T) {
  Matrix Z(T.rows(), T.cols() + 1);
  Z.col(0).setOnes();
  Z.rightCols(T.cols()) = T;
  return Z;
}

// Penalized negative log-likelihood; the intercept (theta(0)) is not penalized.
double logistic_objective(const Matrix& Z, const Vector& y, const Vector& theta, double lambda) {
  const Vector eta = Z * theta;
  double nll = 0.0;
  for (Index i = 0; i < y.size(); ++i) nll += softplus(eta(i)) - y(i) * eta(i);
  return nll + 0.5 * lambda * theta.tail(theta.size() - 1).squaredNorm();
}

}  // namespace

GlmModel glm_fit(const Matrix& T, const Vector& y, GlmFamily family, double lambda, double tol, int max_iter) {
  const Index n = T.rows(), k = T.cols();
  if (y.size() != n) throw Error(ErrorKind::dimension_mismatch, "glm_fit: T and y have different lengths");
  if (n <= k) throw Error(ErrorKind::invalid_argument, "glm_fit needs n > k");
  if (!(lambda >= 0)) throw Error(ErrorKind::invalid_argument, "glm_fit: lambda must be >= 0");
  if (!(tol > 0) || max_iter < 1) throw Error(ErrorKind::invalid_argument, "glm_fit: tol and max_iter must be positive");
  if (!T.allFinite() || !y.allFinite()) throw Error(ErrorKind::invalid_argument, "glm_fit: non-finite input");

  GlmModel model;
  model.family = family;
  model.lambda = lambda;
  const Matrix Z = with_intercept(T);
  Vector pen = Vector::Constant(k + 1, lambda);
  pen(0) = 0.0;

  auto solve = [&](const Matrix& H, const Vector& rhs) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-13 * top))
      throw Error(ErrorKind::singular, "glm_fit: singular system (rank-deficient scores); use lambda > 0");
    return Vector(H.ldlt().solve(rhs));
  };

  if (family == GlmFamily::linear) {
    Matrix H = Z.transpose() * Z;
    H.diagonal() += pen;
    Vector theta = solve(H, Z.transpose() * y);
    model.intercept = theta(0);
    model.coefficients = theta.tail(k);
    model.iterations = 1;
    model.converged = true;
    return model;
  }

  for (Index i = 0; i < n; ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw Error(ErrorKind::invalid_argument, "glm_fit: logistic family needs 0/1 targets");

  Vector theta = Vector::Zero(k + 1);
  double obj = logistic_objective(Z, y, theta, lambda);
  model.objective.push_back(obj);
  for (int it = 0; it < max_iter; ++it) {
    const Vector eta = Z * theta;
    Vector p(n), w(n);
    for (Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = std::max(p(i) * (1 - p(i)), 1e-12);
    }
    Vector grad = Z.transpose() * (p - y) + pen.cwiseProduct(theta);
    Matrix H = Z.transpose() * w.asDiagonal() * Z;
    H.diagonal() += pen;
    Vector step;
    try {
      step = solve(H, grad);
    } catch (const Error&) {
      model.warnings.push_back("IRLS Hessian became singular (likely separation); returning last iterate");
      break;
    }
    double scale = 1.0;
    Vector next = theta - step;
    double next_obj = logistic_objective(Z, y, next, lambda);
    int halvings = 0;
    while (next_obj > obj && halvings < 30) {
      scale *= 0.5;
      next = theta - scale * step;
      next_obj = logistic_objective(Z, y, next, lambda);
      ++halvings;
    }
    if (next_obj > obj) {
      model.warnings.push_back("IRLS could not decrease the objective; returning last iterate");
      break;
    }
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    obj = next_obj;
    model.objective.push_back(obj);
    model.iterations = it + 1;
    if (change <= tol) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged && model.warnings.empty())
    model.warnings.push_back("IRLS did not converge in " + std::to_string(max_iter) + " iterations (possible separation)");
  model.intercept = theta(0);
  model.coefficients = theta.tail(k);
  return model;
}

Vector glm_predict(const GlmModel& model, const Matrix& T_new) {
  if (T_new.cols() != model.coefficients.size())
    throw Error(ErrorKind::dimension_mismatch, "glm_predict: expected " + std::to_string(model.coefficients.size()) +
                                                   " columns, got " + std::to_string(T_new.cols()));
  Vector eta = (T_new * model.coefficients).array() + model.intercept;
  if (model.family == GlmFamily::linear) return eta;
  for (Index i = 0; i < eta.size(); ++i) eta(i) = sigmoid(eta(i));
  return eta;
}

}  // namespace fairpls
