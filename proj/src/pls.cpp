#include "fairpls/pls.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fairpls/error.hpp"

namespace fairpls {

double canonical_sign(const Vector& w) {
  if (w.size() == 0) return 1.0;
  const double cut = 1e-12 * w.cwiseAbs().maxCoeff();
  for (Index i = 0; i < w.size(); ++i)
    if (std::abs(w(i)) > cut) return w(i) < 0 ? -1.0 : 1.0;
  return 1.0;
}

PlsModel nipals_fit(const CenteredMatrix& X, const CenteredMatrix& Y, int k, const NipalsOptions& opts) {
  require_centered(X, "X");
  require_centered(Y, "Y");
  const Index n = X.rows(), d = X.cols(), m = Y.cols();
  if (Y.rows() != n) throw Error(ErrorKind::dimension_mismatch, "X and Y have different row counts");
  if (k < 1 || k > std::min(n, d))
    throw Error(ErrorKind::invalid_argument, "k must lie in [1, min(n, d)] = [1, " + std::to_string(std::min(n, d)) + "]");
  if (!(opts.tol > 0) || opts.max_iter < 1) throw Error(ErrorKind::invalid_argument, "tol and max_iter must be positive");

  PlsModel model;
  model.x_stats = X.stats();
  Matrix E = X.values();
  Matrix F = Y.values();
  const double initial = E.norm();
  std::vector<Vector> W, P, C, T, U;
  std::vector<double> B;

  for (int h = 0; h < k; ++h) {
    if (E.norm() <= 1e-12 * initial) {
      model.warnings.push_back("residual X is numerically null after " + std::to_string(h) + " components");
      break;
    }
    Index start = 0;
    F.colwise().squaredNorm().maxCoeff(&start);
    Vector u = F.col(start);
    if (u.squaredNorm() == 0.0) {
      model.warnings.push_back("residual Y is null after " + std::to_string(h) + " components");
      break;
    }
    Vector w, t, c, t_old;
    double tt = 0.0;
    bool converged = false, degenerate = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      w = E.transpose() * u / u.squaredNorm();
      const double wn = w.norm();
      if (wn == 0.0) {
        degenerate = true;
        break;
      }
      w /= wn;
      t = E * w;
      tt = t.squaredNorm();
      if (tt == 0.0) {
        degenerate = true;
        break;
      }
      c = F.transpose() * t / tt;
      c.normalize();
      u = F * c;
      if (it > 0 && (t - t_old).norm() <= opts.tol * t.norm()) {
        converged = true;
        ++it;
        break;
      }
      t_old = t;
    }
    if (degenerate) {
      model.warnings.push_back("component " + std::to_string(h + 1) + " is degenerate (t't = 0); stopped with " +
                               std::to_string(h) + " components");
      break;
    }
    if (!converged)
      model.warnings.push_back("component " + std::to_string(h + 1) + " did not converge in " +
                               std::to_string(opts.max_iter) + " iterations");
    const double sgn = canonical_sign(w);
    w *= sgn;
    t *= sgn;
    c *= sgn;
    u *= sgn;
    Vector p = E.transpose() * t / tt;
    const double b = u.dot(t) / tt;
    E.noalias() -= t * p.transpose();
    F.noalias() -= b * t * c.transpose();
    W.push_back(w);
    P.push_back(p);
    C.push_back(c);
    T.push_back(t);
    U.push_back(u);
    B.push_back(b);
    model.iterations.push_back(it);
  }

  const Index kk = static_cast<Index>(W.size());
  model.W.resize(d, kk);
  model.P.resize(d, kk);
  model.C.resize(m, kk);
  model.T.resize(n, kk);
  model.U.resize(n, kk);
  model.b.resize(kk);
  for (Index h = 0; h < kk; ++h) {
    const auto i = static_cast<std::size_t>(h);
    model.W.col(h) = W[i];
    model.P.col(h) = P[i];
    model.C.col(h) = C[i];
    model.T.col(h) = T[i];
    model.U.col(h) = U[i];
    model.b(h) = B[i];
  }
  return model;
}

Matrix transform(const PlsModel& model, const Matrix& X_new) {
  if (X_new.cols() != model.W.rows())
    throw Error(ErrorKind::dimension_mismatch, "transform: model has d=" + std::to_string(model.W.rows()) +
                                                   ", input has " + std::to_string(X_new.cols()) + " columns");
  Matrix E = X_new;
  Matrix T(X_new.rows(), model.k());
  for (Index h = 0; h < model.k(); ++h) {
    Vector t = E * model.W.col(h);
    T.col(h) = t;
    E.noalias() -= t * model.P.col(h).transpose();
  }
  return T;
}

Matrix transform(const PlsModel& model, const CenteredMatrix& X_new) { return transform(model, X_new.values()); }

Matrix reconstruct(const PlsModel& model, const Matrix& scores) {
  if (scores.cols() != model.k())
    throw Error(ErrorKind::dimension_mismatch, "reconstruct: expected " + std::to_string(model.k()) + " score columns");
  return scores * model.P.transpose();
}

namespace {

EigenPair power_run(const Matrix& M, Vector v, double tol, int max_iter) {
  EigenPair r;
  v.normalize();
  for (int it = 1; it <= max_iter; ++it) {
    Vector y = M * v;
    const double lambda = v.dot(y);
    r.vector = v;
    r.value = lambda;
    r.residual = (y - lambda * v).norm();
    r.iterations = it;
    if (r.residual <= tol * std::max(lambda, 0.0)) {
      r.converged = true;
      break;
    }
    const double yn = y.norm();
    if (yn == 0.0) {
      // v is in the null space; M v = 0 so (v, 0) is an exact eigenpair.
      r.converged = true;
      break;
    }
    v = y / yn;
  }
  if (r.value < 0) r.value = 0.0;
  return r;
}

}  // namespace

EigenPair power_iteration(const Matrix& M, double tol, int max_iter, std::uint64_t seed) {
  const Index d = M.rows();
  if (d == 0 || M.cols() != d) throw Error(ErrorKind::invalid_argument, "power_iteration needs a non-empty square matrix");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorKind::invalid_argument, "power_iteration needs a symmetric matrix");
  if (!(tol > 0) || max_iter < 1) throw Error(ErrorKind::invalid_argument, "tol and max_iter must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_vec = [&]() {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v(i) = normal(rng);
    return v;
  };

  Vector e1 = Vector::Unit(d, 0);
  if ((M * e1).norm() <= 1e-14 * M.norm()) e1 = random_vec();
  EigenPair best = power_run(M, e1, tol, max_iter);
  if (d > 1) {
    EigenPair alt = power_run(M, random_vec(), tol, max_iter);
    if (alt.value > best.value * (1 + 1e-12) || (!best.converged && alt.converged && alt.value >= best.value))
      best = alt;
  }
  const double sgn = canonical_sign(best.vector);
  best.vector *= sgn;
  return best;
}

}  // namespace fairpls
