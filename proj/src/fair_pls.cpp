#include "fairpls/fair_pls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "fairpls/error.hpp"

namespace fairpls {

const char* fairness_mode_name(FairnessMode mode) {
  return mode == FairnessMode::demographic_parity ? "demographic-parity" : "equality-of-odds";
}

FairnessMode parse_fairness_mode(const std::string& s) {
  if (s == "demographic-parity" || s == "dp") return FairnessMode::demographic_parity;
  if (s == "equality-of-odds" || s == "eo") return FairnessMode::equality_of_odds;
  throw Error(ErrorKind::invalid_argument, "unknown fairness mode '" + s + "'");
}

void GdParams::validate() const {
  if (!(learning_rate > 0) || max_iter < 1 || !(tol > 0) || restarts < 1)
    throw Error(ErrorKind::invalid_argument, "gradient parameters must be positive (learning_rate, max_iter, tol, restarts)");
}

namespace {

void check_rows(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S) {
  if (Y.rows() != X.rows() || S.rows() != X.rows())
    throw Error(ErrorKind::dimension_mismatch, "X, Y and S must have the same number of rows");
}

// f(w) = (|A'w|^2 - eta |B'w|^2) / n^2 with A = X_h'Y and B = X_h'Z.
struct QuadForm {
  Matrix A;
  Matrix B;
  double eta = 0.0;
  double inv_n2 = 1.0;

  double value(const Vector& w) const {
    double v = (A.transpose() * w).squaredNorm();
    if (eta != 0.0) v -= eta * (B.transpose() * w).squaredNorm();
    return v * inv_n2;
  }
  Vector apply(const Vector& w) const {
    Vector r = A * (A.transpose() * w);
    if (eta != 0.0) r.noalias() -= eta * (B * (B.transpose() * w));
    return r * inv_n2;
  }
  double scale() const { return (A.squaredNorm() + eta * B.squaredNorm()) * inv_n2; }
};

template <class F>
Vector central_difference(const F& f, const Vector& w, double h = 1e-6) {
  Vector g(w.size());
  Vector p = w;
  for (Index i = 0; i < w.size(); ++i) {
    const double wi = p(i);
    p(i) = wi + h;
    const double fp = f(p);
    p(i) = wi - h;
    const double fm = f(p);
    p(i) = wi;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

struct Ascent {
  Vector w;
  double value = 0.0;
  ComponentTrace trace;
};

Ascent ascend(const QuadForm& q, Vector w, const GdParams& gd) {
  Ascent r;
  w.normalize();
  double f = q.value(w);
  r.trace.objective.push_back(f);
  const double scale = std::max(q.scale(), std::numeric_limits<double>::min());
  const double stat_tol = std::sqrt(gd.tol) * scale;
  const double eps_max = gd.learning_rate * 1e6;
  double eps = gd.learning_rate;
  for (int it = 0; it < gd.max_iter; ++it) {
    Vector g = gd.gradient == GradientMode::analytic
                   ? Vector(2.0 * q.apply(w))
                   : central_difference([&](const Vector& v) { return q.value(v); }, w);
    bool accepted = false;
    Vector wn;
    double fn = f;
    for (int halving = 0; halving <= 30; ++halving) {
      wn = w + eps * g;
      const double nn = wn.norm();
      if (nn > 0) {
        wn /= nn;
        fn = q.value(wn);
        if (fn >= f) {
          accepted = true;
          break;
        }
      }
      if (halving == 30) break;
      eps *= 0.5;
      ++r.trace.halvings;
    }
    if (!accepted) break;  // no ascent left at working precision
    const double change = fn - f;
    w = wn;
    f = fn;
    r.trace.objective.push_back(f);
    r.trace.iterations = it + 1;
    const double residual = (q.apply(w) - f * w).norm();
    if (change <= gd.tol * std::max(std::abs(f), 1e-12 * scale) && residual <= stat_tol) {
      r.trace.converged = true;
      break;
    }
    eps = std::min(2 * eps, eps_max);
  }
  r.trace.residual = (q.apply(w) - f * w).norm();
  if (!r.trace.converged && r.trace.residual <= stat_tol) r.trace.converged = true;
  r.w = w;
  r.value = f;
  return r;
}

Vector leading_left_singular(const Matrix& A) {
  if (A.cols() == 1) return A.col(0);
  EigenPair ep = power_iteration(A.transpose() * A, 1e-12, 20000, 7);
  return A * ep.vector;
}

// Shared deflation loop for the demographic-parity and equality-of-odds fits.
FairPlsModel fit_penalized(const CenteredMatrix& X, const CenteredMatrix& Y, const Matrix& Z, int k, double eta,
                           const GdParams& gd, FairnessMode mode) {
  gd.validate();
  const Index n = X.rows(), d = X.cols();
  if (k < 1 || k > std::min(n, d))
    throw Error(ErrorKind::invalid_argument, "k must lie in [1, min(n, d)] = [1, " + std::to_string(std::min(n, d)) + "]");
  if (!(eta >= 0) || !std::isfinite(eta)) throw Error(ErrorKind::invalid_argument, "eta must be finite and >= 0");

  FairPlsModel model;
  model.eta = eta;
  model.mode = mode;
  model.x_stats = X.stats();
  Matrix Xh = X.values();
  const double initial = Xh.norm();
  std::vector<Vector> W, G, T;
  std::mt19937_64 rng(gd.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int h = 0; h < k; ++h) {
    if (Xh.norm() <= 1e-12 * initial) {
      model.warnings.push_back("residual X is numerically null after " + std::to_string(h) + " components");
      break;
    }
    QuadForm q;
    q.inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    q.eta = eta;
    q.A = Xh.transpose() * Y.values();
    q.B = Xh.transpose() * Z;

    std::vector<Vector> starts;
    starts.push_back(Vector::Unit(d, 0));
    if (gd.restarts >= 2) {
      Vector warm = leading_left_singular(q.A);
      starts.push_back(warm.norm() > 0 ? warm : Vector::Unit(d, 0));
    }
    for (int r = 2; r < gd.restarts; ++r) {
      Vector v(d);
      for (Index i = 0; i < d; ++i) v(i) = normal(rng);
      starts.push_back(v);
    }

    Ascent best;
    bool have = false;
    for (std::size_t r = 0; r < starts.size(); ++r) {
      Ascent a = ascend(q, starts[r], gd);
      a.trace.restart = static_cast<int>(r);
      const double tie = 1e-13 * std::max(std::abs(a.value), q.scale());
      if (!have || a.value > best.value + tie) {
        best = std::move(a);
        have = true;
      }
    }
    if (!best.trace.converged)
      model.warnings.push_back("component " + std::to_string(h + 1) + " did not converge; residual " +
                               std::to_string(best.trace.residual));

    Vector w = best.w;
    w *= canonical_sign(w);
    Vector t = Xh * w;
    const double tt = t.squaredNorm();
    if (!(tt > 1e-28 * initial * initial)) {
      model.warnings.push_back("component " + std::to_string(h + 1) + " is degenerate (t't = 0); stopped with " +
                               std::to_string(h) + " components");
      break;
    }
    Vector gamma = Xh.transpose() * t / tt;
    Xh.noalias() -= t * gamma.transpose();
    W.push_back(w);
    G.push_back(gamma);
    T.push_back(t);
    model.traces.push_back(std::move(best.trace));
  }

  const Index kk = static_cast<Index>(W.size());
  model.W.resize(d, kk);
  model.Gamma.resize(d, kk);
  model.T.resize(n, kk);
  for (Index h = 0; h < kk; ++h) {
    model.W.col(h) = W[static_cast<std::size_t>(h)];
    model.Gamma.col(h) = G[static_cast<std::size_t>(h)];
    model.T.col(h) = T[static_cast<std::size_t>(h)];
  }
  return model;
}

Matrix solve_cyy(const Matrix& Y, const Matrix& rhs, double ridge) {
  const double n = static_cast<double>(Y.rows());
  Matrix Cyy = Y.transpose() * Y / n;
  if (!(ridge >= 0)) throw Error(ErrorKind::invalid_argument, "ridge must be >= 0");
  Cyy.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Cyy);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  if (es.eigenvalues().minCoeff() <= 1e-12 * top || top == 0.0)
    throw Error(ErrorKind::singular, "C_YY is singular (min eigenvalue " + std::to_string(es.eigenvalues().minCoeff()) +
                                         "); pass a ridge > 0");
  return Cyy.ldlt().solve(rhs);
}

}  // namespace

ObjectiveValue fpls_objective_grad(const Vector& w, const CenteredMatrix& X, const CenteredMatrix& Y,
                                   const CenteredMatrix& S, double eta) {
  check_rows(X, Y, S);
  if (w.size() != X.cols()) throw Error(ErrorKind::dimension_mismatch, "w does not match the columns of X");
  const double n2 = static_cast<double>(X.rows()) * static_cast<double>(X.rows());
  Vector t = X.values() * w;
  Vector a = Y.values().transpose() * t;
  Vector b = S.values().transpose() * t;
  ObjectiveValue out;
  out.value = (a.squaredNorm() - eta * b.squaredNorm()) / n2;
  out.grad = 2.0 * (X.values().transpose() * (Y.values() * a - eta * (S.values() * b))) / n2;
  return out;
}

FairPlsModel fair_pls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S, int k, double eta,
                          const GdParams& gd) {
  require_centered(X, "X");
  require_centered(Y, "Y");
  require_centered(S, "S");
  check_rows(X, Y, S);
  return fit_penalized(X, Y, S.values(), k, eta, gd, FairnessMode::demographic_parity);
}

namespace {

struct BoundTerms {
  double y_min = 0.0;  // smallest nonzero eigenvalue of YY'
  double s_max = 0.0;  // largest eigenvalue of SS'
};

BoundTerms bound_terms(const CenteredMatrix& Y, const CenteredMatrix& S) {
  // The nonzero spectra of YY' and Y'Y coincide, so stay in the small dimension.
  Eigen::SelfAdjointEigenSolver<Matrix> ey(Y.values().transpose() * Y.values(), Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> es(S.values().transpose() * S.values(), Eigen::EigenvaluesOnly);
  BoundTerms b;
  const double ytop = ey.eigenvalues().maxCoeff();
  b.y_min = ytop;
  for (Index i = 0; i < ey.eigenvalues().size(); ++i)
    if (ey.eigenvalues()(i) > 1e-12 * ytop) b.y_min = std::min(b.y_min, ey.eigenvalues()(i));
  b.s_max = es.eigenvalues().maxCoeff();
  return b;
}

}  // namespace

double eigen_regime_bound(const CenteredMatrix& Y, const CenteredMatrix& S) {
  const BoundTerms b = bound_terms(Y, S);
  if (b.s_max <= 0) return std::numeric_limits<double>::infinity();
  return b.y_min / b.s_max;
}

FairPlsModel eigen_regime_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S, int k,
                              double eta) {
  require_centered(X, "X");
  require_centered(Y, "Y");
  require_centered(S, "S");
  check_rows(X, Y, S);
  const Index n = X.rows(), d = X.cols(), m = Y.cols(), q = S.cols();
  if (k < 1 || k > std::min(n, d))
    throw Error(ErrorKind::invalid_argument, "k must lie in [1, min(n, d)]");
  if (!(eta >= 0)) throw Error(ErrorKind::invalid_argument, "eta must be >= 0");

  const BoundTerms bt = bound_terms(Y, S);
  if (bt.s_max > 0 && eta > bt.y_min / bt.s_max * (1 + 1e-12))
    throw Error(ErrorKind::infeasible, "eta = " + std::to_string(eta) +
                                           " exceeds sigma_min(YY') / sigma_max(SS') with sigma_min = " +
                                           std::to_string(bt.y_min) + " and sigma_max = " + std::to_string(bt.s_max));

  // YY' - eta SS' = U Sigma V' J V Sigma U' from the thin SVD of [Y S].
  Matrix Z(n, m + q);
  Z << Y.values(), S.values();
  Eigen::BDCSVD<Matrix> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Index r = 0;
  while (r < sv.size() && sv(r) > 1e-12 * sv(0)) ++r;
  Matrix U = svd.matrixU().leftCols(r);
  Matrix V = svd.matrixV().leftCols(r);
  Vector J = Vector::Ones(m + q);
  J.tail(q).setConstant(-eta);
  Matrix inner = sv.head(r).asDiagonal() * V.transpose() * J.asDiagonal() * V * sv.head(r).asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> ei(inner);
  const double top = std::max(ei.eigenvalues().maxCoeff(), 0.0);
  if (ei.eigenvalues().minCoeff() < -1e-10 * std::max(top, 1.0))
    throw Error(ErrorKind::infeasible, "YY' - eta SS' has a negative eigenvalue " + std::to_string(ei.eigenvalues().minCoeff()) +
                                           "; the closed form needs it positive semidefinite");
  Matrix M = U * ei.eigenvectors() * ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  FairPlsModel model;
  model.eta = eta;
  model.x_stats = X.stats();
  Matrix Xh = X.values();
  const double initial = Xh.norm();
  std::vector<Vector> W, G, T;
  for (int h = 0; h < k; ++h) {
    if (Xh.norm() <= 1e-12 * initial) {
      model.warnings.push_back("residual X is numerically null after " + std::to_string(h) + " components");
      break;
    }
    Matrix N = Xh.transpose() * M;
    EigenPair ep = power_iteration(N * N.transpose(), 1e-13, 100000, static_cast<std::uint64_t>(h));
    ComponentTrace trace;
    trace.iterations = ep.iterations;
    trace.converged = ep.converged;
    trace.residual = ep.residual;
    trace.objective.push_back(ep.value / (static_cast<double>(n) * static_cast<double>(n)));
    if (!ep.converged)
      model.warnings.push_back("eigenvector " + std::to_string(h + 1) + " did not converge; residual " + std::to_string(ep.residual));
    Vector w = ep.vector;
    Vector t = Xh * w;
    const double tt = t.squaredNorm();
    if (!(tt > 1e-28 * initial * initial)) {
      model.warnings.push_back("component " + std::to_string(h + 1) + " is degenerate (t't = 0)");
      break;
    }
    Vector gamma = Xh.transpose() * t / tt;
    Xh.noalias() -= t * gamma.transpose();
    W.push_back(w);
    G.push_back(gamma);
    T.push_back(t);
    model.traces.push_back(std::move(trace));
  }
  const Index kk = static_cast<Index>(W.size());
  model.W.resize(d, kk);
  model.Gamma.resize(d, kk);
  model.T.resize(n, kk);
  for (Index h = 0; h < kk; ++h) {
    model.W.col(h) = W[static_cast<std::size_t>(h)];
    model.Gamma.col(h) = G[static_cast<std::size_t>(h)];
    model.T.col(h) = T[static_cast<std::size_t>(h)];
  }
  return model;
}

Matrix conditional_cross_cov(const Vector& scores, const CenteredMatrix& S, const CenteredMatrix& Y, double ridge) {
  require_centered(S, "S");
  require_centered(Y, "Y");
  if (scores.size() != S.rows() || Y.rows() != S.rows())
    throw Error(ErrorKind::dimension_mismatch, "scores, S and Y must have the same number of rows");
  const double n = static_cast<double>(S.rows());
  Matrix cxs = scores.transpose() * S.values() / n;
  Matrix cxy = scores.transpose() * Y.values() / n;
  Matrix cys = Y.values().transpose() * S.values() / n;
  return cxs - cxy * solve_cyy(Y.values(), cys, ridge);
}

Matrix eo_residual(const CenteredMatrix& S, const CenteredMatrix& Y, double ridge) {
  if (Y.rows() != S.rows()) throw Error(ErrorKind::dimension_mismatch, "S and Y must have the same number of rows");
  const double n = static_cast<double>(S.rows());
  Matrix cys = Y.values().transpose() * S.values() / n;
  return S.values() - Y.values() * solve_cyy(Y.values(), cys, ridge);
}

ObjectiveValue eo_objective_grad(const Vector& w, const CenteredMatrix& X, const CenteredMatrix& Y,
                                 const CenteredMatrix& S, double eta, double ridge, GradientMode mode) {
  check_rows(X, Y, S);
  if (w.size() != X.cols()) throw Error(ErrorKind::dimension_mismatch, "w does not match the columns of X");
  const Matrix R = eo_residual(S, Y, ridge);
  const double n = static_cast<double>(X.rows());
  auto value = [&](const Vector& v) {
    Vector t = X.values() * v;
    return (Y.values().transpose() * t).squaredNorm() / (n * n) - eta * (R.transpose() * t / n).squaredNorm();
  };
  ObjectiveValue out;
  out.value = value(w);
  if (mode == GradientMode::finite_difference) {
    out.grad = central_difference(value, w);
  } else {
    Vector t = X.values() * w;
    Vector a = Y.values().transpose() * t;
    Vector c = R.transpose() * t;
    out.grad = 2.0 * (X.values().transpose() * (Y.values() * a - eta * (R * c))) / (n * n);
  }
  return out;
}

FairPlsModel eo_fair_pls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const CenteredMatrix& S, int k,
                             double eta, const GdParams& gd, double ridge) {
  require_centered(X, "X");
  require_centered(Y, "Y");
  require_centered(S, "S");
  check_rows(X, Y, S);
  FairPlsModel model = fit_penalized(X, Y, eo_residual(S, Y, ridge), k, eta, gd, FairnessMode::equality_of_odds);
  model.ridge = ridge;
  return model;
}

Matrix transform(const FairPlsModel& model, const Matrix& X_new) {
  if (X_new.cols() != model.W.rows())
    throw Error(ErrorKind::dimension_mismatch, "transform: model has d=" + std::to_string(model.W.rows()) +
                                                   ", input has " + std::to_string(X_new.cols()) + " columns");
  Matrix E = X_new;
  Matrix T(X_new.rows(), model.k());
  for (Index h = 0; h < model.k(); ++h) {
    Vector t = E * model.W.col(h);
    T.col(h) = t;
    E.noalias() -= t * model.Gamma.col(h).transpose();
  }
  return T;
}

Matrix transform(const FairPlsModel& model, const CenteredMatrix& X_new) { return transform(model, X_new.values()); }

Matrix reconstruct(const FairPlsModel& model, const Matrix& scores) {
  if (scores.cols() != model.k())
    throw Error(ErrorKind::dimension_mismatch, "reconstruct: expected " + std::to_string(model.k()) + " score columns");
  return scores * model.Gamma.transpose();
}

double correlation_ratio(const Vector& t, const std::vector<int>& groups) {
  if (static_cast<std::size_t>(t.size()) != groups.size())
    throw Error(ErrorKind::dimension_mismatch, "scores and group labels differ in length");
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& a = acc[groups[i]];
    a.first += t(static_cast<Index>(i));
    a.second += 1;
  }
  if (acc.size() < 2) throw Error(ErrorKind::invalid_argument, "correlation ratio needs at least two groups");
  const double mean = t.mean();
  const double total = (t.array() - mean).square().sum();
  if (!(total > 0)) throw Error(ErrorKind::degenerate, "correlation ratio undefined for zero total variance");
  double between = 0.0;
  for (const auto& [g, a] : acc) {
    const double gm = a.first / static_cast<double>(a.second);
    between += static_cast<double>(a.second) * (gm - mean) * (gm - mean);
  }
  return std::clamp(between / total, 0.0, 1.0);
}

VanillaResult vanilla_fair_pls(const CenteredMatrix& X, const CenteredMatrix& Y, const std::vector<int>& groups, int k,
                               double tau) {
  if (!(tau > 0 && tau < 1)) throw Error(ErrorKind::invalid_argument, "tau must lie in (0, 1)");
  if (groups.size() != static_cast<std::size_t>(X.rows()))
    throw Error(ErrorKind::dimension_mismatch, "group labels do not match the rows of X");
  VanillaResult out;
  out.pls = nipals_fit(X, Y, k);
  const Matrix rep = X.values() * out.pls.W;
  const Index kk = rep.cols();
  out.ratios.resize(kk);
  out.selected.assign(static_cast<std::size_t>(kk), false);
  std::vector<Index> keep;
  for (Index h = 0; h < kk; ++h) {
    out.ratios(h) = correlation_ratio(rep.col(h), groups);
    if (out.ratios(h) < tau) {
      out.selected[static_cast<std::size_t>(h)] = true;
      keep.push_back(h);
    }
  }
  out.scores.resize(rep.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.scores.col(static_cast<Index>(j)) = rep.col(keep[j]);
  return out;
}

}  // namespace fairpls
