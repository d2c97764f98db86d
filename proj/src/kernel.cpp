#include "fairpls/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "fairpls/config.hpp"
#include "fairpls/error.hpp"

namespace fairpls {

std::string KernelSpec::to_string() const {
  if (kind == KernelKind::linear) return "linear";
  if (!bandwidth) return "rbf(median)";
  std::ostringstream os;
  os.precision(17);
  os << "rbf(" << *bandwidth << ")";
  return os.str();
}

KernelSpec kernel_spec_from_value(const KvValue& v) {
  if (v.is_scalar()) {
    const std::string& s = v.as_string();
    if (s == "linear") return KernelSpec::linear();
    if (s == "rbf") return KernelSpec::rbf_median();
    throw Error(ErrorKind::invalid_argument, "unknown kernel '" + s + "'");
  }
  const KvValue* kind = v.find("kind");
  if (!kind) throw Error(ErrorKind::invalid_argument, "kernel map needs a 'kind' entry");
  if (kind->as_string() == "linear") return KernelSpec::linear();
  if (kind->as_string() != "rbf") throw Error(ErrorKind::invalid_argument, "unknown kernel kind '" + kind->as_string() + "'");
  const KvValue* bw = v.find("bandwidth");
  if (!bw || bw->as_string() == "median") return KernelSpec::rbf_median();
  const double sigma = bw->as_double();
  if (!(sigma > 0)) throw Error(ErrorKind::invalid_argument, "rbf bandwidth must be > 0");
  return KernelSpec::rbf(sigma);
}

Matrix gram(const Matrix& Xa, const Matrix& Xb, const KernelSpec& kernel) {
  if (Xa.cols() != Xb.cols())
    throw Error(ErrorKind::dimension_mismatch, "gram: inputs have " + std::to_string(Xa.cols()) + " and " +
                                                   std::to_string(Xb.cols()) + " features");
  if (!kernel.resolved()) throw Error(ErrorKind::invalid_argument, "gram: rbf bandwidth is not resolved");
  Matrix K = Xa * Xb.transpose();
  if (kernel.kind == KernelKind::linear) return K;
  const double sigma = *kernel.bandwidth;
  if (!(sigma > 0)) throw Error(ErrorKind::invalid_argument, "rbf bandwidth must be > 0");
  const Vector na = Xa.rowwise().squaredNorm();
  const Vector nb = Xb.rowwise().squaredNorm();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Index j = 0; j < K.cols(); ++j)
    for (Index i = 0; i < K.rows(); ++i) {
      const double r2 = std::max(na(i) + nb(j) - 2.0 * K(i, j), 0.0);
      K(i, j) = std::exp(-r2 * inv);
    }
  return K;
}

double median_heuristic(const Matrix& X, std::uint64_t seed) {
  const Index n = X.rows();
  if (n < 2) throw Error(ErrorKind::invalid_argument, "median heuristic needs at least 2 rows");
  constexpr Index cap = 2000;
  Matrix sub;
  const Matrix* P = &X;
  if (n > cap) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    sub.resize(cap, X.cols());
    for (Index i = 0; i < cap; ++i) sub.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    P = &sub;
  }
  const Index m = P->rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) dist.push_back((P->row(i) - P->row(j)).norm());
  const std::size_t half = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half), dist.end());
  double med = dist[half];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half));
    med = 0.5 * (med + lower);
  }
  if (!(med > 0))
    throw Error(ErrorKind::degenerate, "median pairwise distance is 0 (rows mostly identical); use a linear kernel");
  return med;
}

KernelSpec resolve_kernel(const KernelSpec& kernel, const Matrix& X, std::uint64_t seed) {
  if (kernel.resolved()) return kernel;
  return KernelSpec::rbf(median_heuristic(X, seed));
}

Matrix GramCentering::apply(const Matrix& K_cross) const {
  if (K_cross.cols() != col_means.size())
    throw Error(ErrorKind::dimension_mismatch, "cross Gram has " + std::to_string(K_cross.cols()) +
                                                   " columns, training Gram had " + std::to_string(col_means.size()));
  Matrix out = K_cross;
  const Vector row_means = K_cross.rowwise().mean();
  out.rowwise() -= col_means.transpose();
  out.colwise() -= row_means;
  out.array() += grand_mean;
  return out;
}

CenteredGram center_gram(const Matrix& K) {
  if (K.rows() != K.cols() || K.rows() == 0) throw Error(ErrorKind::invalid_argument, "center_gram needs a square matrix");
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorKind::invalid_argument, "center_gram needs a symmetric matrix");
  CenteredGram out;
  out.stats.col_means = K.colwise().mean().transpose();
  out.stats.grand_mean = K.mean();
  out.K = K;
  out.K.rowwise() -= out.stats.col_means.transpose();
  out.K.colwise() -= out.stats.col_means;
  out.K.array() += out.stats.grand_mean;
  out.K = 0.5 * (out.K + out.K.transpose()).eval();
  return out;
}

double hsic(const Matrix& Kx, const Matrix& Ks) {
  if (Kx.rows() != Kx.cols() || Ks.rows() != Ks.cols() || Kx.rows() != Ks.rows())
    throw Error(ErrorKind::dimension_mismatch, "hsic needs two square Grams of the same size");
  const double n = static_cast<double>(Kx.rows());
  return (Kx.array() * Ks.array()).sum() / (n * n);
}

DataFingerprint DataFingerprint::of(const Matrix& X) {
  DataFingerprint f;
  f.rows = X.rows();
  f.cols = X.cols();
  std::uint64_t h = 1469598103934665603ULL;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) {
      std::uint64_t bits;
      const double v = X(i, j);
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFFu;
        h *= 1099511628211ULL;
      }
    }
  f.checksum = h;
  return f;
}

namespace {

// f(alpha) = (|Y'K alpha|^2 - eta alpha'K Ks K alpha) / n^2 on {alpha : alpha'K alpha = 1}.
struct DualForm {
  const Matrix* K = nullptr;
  const Matrix* Y = nullptr;
  const Matrix* Ks = nullptr;
  const Matrix* Tau = nullptr;  // previous unit scores, columns
  double eta = 0.0;
  double inv_n2 = 1.0;

  double value_of_scores(const Vector& v) const {
    double f = (Y->transpose() * v).squaredNorm();
    if (eta != 0.0) f -= eta * v.dot(*Ks * v);
    return f * inv_n2;
  }
  // (YY' - eta Ks) v / n^2
  Vector direction(const Vector& v) const {
    Vector g = *Y * (Y->transpose() * v);
    if (eta != 0.0) g.noalias() -= eta * (*Ks * v);
    return g * inv_n2;
  }
  void project(Vector& a) const {
    if (Tau->cols() > 0) a.noalias() -= *Tau * (Tau->transpose() * a);
  }
  // Returns false if alpha lies in the null space of K.
  bool normalize(Vector& a, Vector& v) const {
    project(a);
    v = *K * a;
    const double q = a.dot(v);
    if (!(q > 0)) return false;
    const double s = 1.0 / std::sqrt(q);
    a *= s;
    v *= s;
    return true;
  }
  double residual(const Vector& a, const Vector& v, double f) const {
    Vector r = direction(v) - f * a;
    project(r);
    return std::sqrt(std::max(r.dot(*K * r), 0.0));
  }
};

struct DualAscent {
  Vector alpha;
  Vector scores;
  double value = -std::numeric_limits<double>::infinity();
  bool valid = false;
  ComponentTrace trace;
};

DualAscent dual_ascend(const DualForm& q, Vector a, double scale, const GdParams& gd) {
  DualAscent r;
  Vector v;
  if (!q.normalize(a, v)) return r;
  double f = q.value_of_scores(v);
  r.trace.objective.push_back(f);
  const double stat_tol = std::sqrt(gd.tol) * scale;
  const double eps_max = gd.learning_rate * 1e6;
  double eps = gd.learning_rate;
  for (int it = 0; it < gd.max_iter; ++it) {
    Vector g;
    if (gd.gradient == GradientMode::analytic) {
      g = 2.0 * q.direction(v);
    } else {
      // Finite differences of f along the coordinates of K alpha.
      g.resize(v.size());
      Vector p = v;
      for (Index i = 0; i < v.size(); ++i) {
        const double vi = p(i);
        p(i) = vi + 1e-6;
        const double fp = q.value_of_scores(p);
        p(i) = vi - 1e-6;
        const double fm = q.value_of_scores(p);
        p(i) = vi;
        g(i) = (fp - fm) / 2e-6;
      }
    }
    bool accepted = false;
    Vector an, vn;
    double fn = f;
    for (int halving = 0; halving <= 30; ++halving) {
      an = a + eps * g;
      if (q.normalize(an, vn)) {
        fn = q.value_of_scores(vn);
        if (fn >= f) {
          accepted = true;
          break;
        }
      }
      if (halving == 30) break;
      eps *= 0.5;
      ++r.trace.halvings;
    }
    if (!accepted) break;
    const double change = fn - f;
    a = an;
    v = vn;
    f = fn;
    r.trace.objective.push_back(f);
    r.trace.iterations = it + 1;
    if (change <= gd.tol * std::max(std::abs(f), 1e-12 * scale) && q.residual(a, v, f) <= stat_tol) {
      r.trace.converged = true;
      break;
    }
    eps = std::min(2 * eps, eps_max);
  }
  r.trace.residual = q.residual(a, v, f);
  if (!r.trace.converged && r.trace.residual <= stat_tol) r.trace.converged = true;
  r.alpha = a;
  r.scores = v;
  r.value = f;
  r.valid = true;
  return r;
}

}  // namespace

KernelFairPlsModel kfpls_fit(const CenteredMatrix& X, const CenteredMatrix& Y, const Matrix& S_raw, int k, double eta,
                             const KernelSpec& kernel_x, const KernelSpec& kernel_s, const GdParams& gd) {
  require_centered(X, "X");
  require_centered(Y, "Y");
  gd.validate();
  const Index n = X.rows();
  if (Y.rows() != n || S_raw.rows() != n)
    throw Error(ErrorKind::dimension_mismatch, "X, Y and S must have the same number of rows");
  if (k < 1 || k > n) throw Error(ErrorKind::invalid_argument, "k must lie in [1, n]");
  if (!(eta >= 0) || !std::isfinite(eta)) throw Error(ErrorKind::invalid_argument, "eta must be finite and >= 0");

  KernelFairPlsModel model;
  model.eta = eta;
  model.kernel_x = resolve_kernel(kernel_x, X.values(), gd.seed);
  model.kernel_s = resolve_kernel(kernel_s, S_raw, gd.seed);
  model.train_x = X.values();
  model.x_stats = X.stats();
  model.fingerprint = DataFingerprint::of(X.values());

  CenteredGram cx = center_gram(gram(X.values(), X.values(), model.kernel_x));
  model.centering = cx.stats;
  const Matrix Ks = center_gram(gram(S_raw, S_raw, model.kernel_s)).K;
  Matrix Kh = std::move(cx.K);
  const double initial = Kh.norm();

  Matrix Tau(n, 0);
  std::vector<Vector> A, T, TauCols, KTau;
  std::vector<double> norms, tkt;
  std::mt19937_64 rng(gd.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  for (int h = 0; h < k; ++h) {
    if (Kh.norm() <= 1e-12 * initial) {
      model.warnings.push_back("residual Gram is numerically null after " + std::to_string(h) + " components");
      break;
    }
    DualForm q;
    q.K = &Kh;
    q.Y = &Y.values();
    q.Ks = &Ks;
    q.Tau = &Tau;
    q.eta = eta;
    q.inv_n2 = inv_n2;
    const double scale = std::max((Y.values().transpose() * Kh * Y.values()).trace() * inv_n2 +
                                      eta * (Kh.array() * Ks.array()).sum() * inv_n2,
                                  std::numeric_limits<double>::min());

    std::vector<Vector> starts;
    starts.push_back(Vector::Unit(n, 0));
    if (gd.restarts >= 2) {
      // alpha = Y maps to the cross-covariance direction of the linear case.
      Vector warm = Y.values().cols() == 1 ? Vector(Y.values().col(0)) : Vector(Y.values().rowwise().sum());
      starts.push_back(warm);
    }
    for (int r = 2; r < gd.restarts; ++r) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = normal(rng);
      starts.push_back(v);
    }
    DualAscent best;
    for (std::size_t r = 0; r < starts.size(); ++r) {
      DualAscent a = dual_ascend(q, starts[r], scale, gd);
      if (!a.valid) continue;
      a.trace.restart = static_cast<int>(r);
      const double tie = 1e-13 * std::max(std::abs(a.value), scale);
      if (!best.valid || a.value > best.value + tie) best = std::move(a);
    }
    if (!best.valid) {
      model.warnings.push_back("component " + std::to_string(h + 1) + " has no feasible start; stopped early");
      break;
    }
    if (!best.trace.converged)
      model.warnings.push_back("component " + std::to_string(h + 1) + " did not converge; residual " +
                               std::to_string(best.trace.residual));

    Vector alpha = best.alpha;
    Vector t = best.scores;
    const double sgn = canonical_sign(t);
    alpha *= sgn;
    t *= sgn;
    const double tn = t.norm();
    if (!(tn > 1e-14 * std::sqrt(initial))) {
      model.warnings.push_back("component " + std::to_string(h + 1) + " is degenerate (zero scores)");
      break;
    }
    Vector tau = t / tn;
    Vector ktau = Kh * tau;
    const double c = tau.dot(ktau);
    Kh.noalias() -= tau * ktau.transpose();
    Kh.noalias() -= ktau * tau.transpose();
    Kh.noalias() += c * tau * tau.transpose();
    Kh = 0.5 * (Kh + Kh.transpose()).eval();

    Tau.conservativeResize(n, Tau.cols() + 1);
    Tau.col(Tau.cols() - 1) = tau;
    A.push_back(alpha);
    T.push_back(t);
    KTau.push_back(ktau);
    norms.push_back(tn);
    tkt.push_back(c);
    model.traces.push_back(std::move(best.trace));
  }

  const Index kk = static_cast<Index>(A.size());
  model.A.resize(n, kk);
  model.T.resize(n, kk);
  model.KTau.resize(n, kk);
  model.Tau = Tau;
  model.score_norms.resize(kk);
  model.tau_k_tau.resize(kk);
  for (Index h = 0; h < kk; ++h) {
    const auto i = static_cast<std::size_t>(h);
    model.A.col(h) = A[i];
    model.T.col(h) = T[i];
    model.KTau.col(h) = KTau[i];
    model.score_norms(h) = norms[i];
    model.tau_k_tau(h) = tkt[i];
  }
  return model;
}

Matrix kfpls_transform(const KernelFairPlsModel& model, const Matrix& X_new) {
  if (X_new.cols() != model.train_x.cols())
    throw Error(ErrorKind::dimension_mismatch, "kfpls_transform: model has d=" + std::to_string(model.train_x.cols()) +
                                                   ", input has " + std::to_string(X_new.cols()) + " columns");
  Matrix Kn = model.centering.apply(gram(X_new, model.train_x, model.kernel_x));
  Matrix T(X_new.rows(), model.k());
  for (Index h = 0; h < model.k(); ++h) {
    Vector t = Kn * model.A.col(h);
    T.col(h) = t;
    const Vector s = t / model.score_norms(h);
    const Vector kt = Kn * model.Tau.col(h);
    Kn.noalias() -= kt * model.Tau.col(h).transpose();
    Kn.noalias() -= s * model.KTau.col(h).transpose();
    Kn.noalias() += model.tau_k_tau(h) * s * model.Tau.col(h).transpose();
  }
  return T;
}

std::vector<Matrix> kfpls_deflation_sequence(const KernelFairPlsModel& model) {
  std::vector<Matrix> out;
  Matrix K = center_gram(gram(model.train_x, model.train_x, model.kernel_x)).K;
  out.push_back(K);
  for (Index h = 0; h < model.k(); ++h) {
    const Vector tau = model.Tau.col(h);
    const Vector kt = K * tau;
    const double c = tau.dot(kt);
    K.noalias() -= tau * kt.transpose();
    K.noalias() -= kt * tau.transpose();
    K.noalias() += c * tau * tau.transpose();
    K = 0.5 * (K + K.transpose()).eval();
    out.push_back(K);
  }
  return out;
}

}  // namespace fairpls
