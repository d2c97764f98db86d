#include "fairpls/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "fairpls/error.hpp"

namespace fairpls {

double cov2(const Matrix& T, const Matrix& Z) {
  if (T.rows() != Z.rows()) throw Error(ErrorKind::dimension_mismatch, "cov2: row counts differ");
  if (T.rows() == 0) throw Error(ErrorKind::invalid_argument, "cov2: empty input");
  if (T.cols() == 0 || Z.cols() == 0) return 0.0;
  return (T.transpose() * Z / static_cast<double>(T.rows())).squaredNorm();
}

double reconstruction_error(const Matrix& X, const Matrix& scores, const Matrix& loadings) {
  if (scores.rows() != X.rows() || loadings.rows() != X.cols() || scores.cols() != loadings.cols())
    throw Error(ErrorKind::dimension_mismatch, "reconstruction_error: incompatible shapes");
  const double total = X.squaredNorm();
  if (!(total > 0)) throw Error(ErrorKind::degenerate, "reconstruction_error: X has zero trace");
  if (scores.cols() == 0) return 1.0;
  return (X - scores * loadings.transpose()).squaredNorm() / total;
}

double reconstruction_error(const CenteredMatrix& X, const PlsModel& model) {
  return reconstruction_error(X.values(), transform(model, X.values()), model.P);
}

double reconstruction_error(const CenteredMatrix& X, const FairPlsModel& model) {
  return reconstruction_error(X.values(), transform(model, X.values()), model.Gamma);
}

namespace {

void check_binary(const std::vector<int>& v, const char* what) {
  for (int x : v)
    if (x != 0 && x != 1) throw Error(ErrorKind::invalid_argument, std::string(what) + " must be binary (0/1)");
}

}  // namespace

DisparateImpact disparate_impact(const std::vector<int>& yhat, const std::vector<int>& s, double alpha) {
  if (yhat.size() != s.size()) throw Error(ErrorKind::dimension_mismatch, "disparate_impact: length mismatch");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorKind::invalid_argument, "alpha must lie in (0, 1)");
  check_binary(yhat, "predictions");
  check_binary(s, "groups");
  double n[2] = {0, 0}, pos[2] = {0, 0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    n[s[i]] += 1;
    pos[s[i]] += yhat[i];
  }
  if (n[0] == 0 || n[1] == 0) throw Error(ErrorKind::invalid_argument, "disparate_impact: a group is empty");
  const double p0 = pos[0] / n[0], p1 = pos[1] / n[1];
  if (p1 == 0) throw Error(ErrorKind::degenerate, "disparate_impact undefined: no positive predictions in group s=1");
  DisparateImpact out;
  if (p0 == 0) {
    out.degenerate = true;
    return out;
  }
  out.di = p0 / p1;
  const double v = (1 - p0) / (n[0] * p0) + (1 - p1) / (n[1] * p1);
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1 - alpha / 2);
  out.ci_lo = std::exp(std::log(out.di) - z * std::sqrt(v));
  out.ci_hi = std::exp(std::log(out.di) + z * std::sqrt(v));
  return out;
}

double ks_statistic(const std::vector<double>& yhat, const std::vector<int>& s) {
  if (yhat.size() != s.size()) throw Error(ErrorKind::dimension_mismatch, "ks_statistic: length mismatch");
  check_binary(s, "groups");
  std::vector<double> g[2];
  for (std::size_t i = 0; i < s.size(); ++i) g[s[i]].push_back(yhat[i]);
  if (g[0].empty() || g[1].empty()) throw Error(ErrorKind::invalid_argument, "ks_statistic: a group is empty");
  std::sort(g[0].begin(), g[0].end());
  std::sort(g[1].begin(), g[1].end());
  const double n0 = static_cast<double>(g[0].size()), n1 = static_cast<double>(g[1].size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < g[0].size() || j < g[1].size()) {
    double x;
    if (j >= g[1].size() || (i < g[0].size() && g[0][i] <= g[1][j]))
      x = g[0][i];
    else
      x = g[1][j];
    while (i < g[0].size() && g[0][i] <= x) ++i;
    while (j < g[1].size() && g[1][j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / n0 - static_cast<double>(j) / n1));
  }
  return std::clamp(best, 0.0, 1.0);
}

double eopp_ratio(const std::vector<int>& yhat, const std::vector<int>& y, const std::vector<int>& s) {
  if (yhat.size() != y.size() || y.size() != s.size()) throw Error(ErrorKind::dimension_mismatch, "eopp_ratio: length mismatch");
  check_binary(yhat, "predictions");
  check_binary(y, "labels");
  check_binary(s, "groups");
  double n[2] = {0, 0}, tp[2] = {0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    n[s[i]] += 1;
    tp[s[i]] += yhat[i];
  }
  if (n[0] == 0 || n[1] == 0) throw Error(ErrorKind::invalid_argument, "eopp_ratio: a (group, y=1) stratum is empty");
  if (tp[1] == 0) throw Error(ErrorKind::degenerate, "eopp_ratio undefined: true-positive rate of group s=1 is 0");
  return (tp[0] / n[0]) / (tp[1] / n[1]);
}

std::vector<int> to_labels(const Vector& v) {
  std::vector<int> out(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i) > 0.5 ? 1 : 0;
  return out;
}

}  // namespace fairpls
