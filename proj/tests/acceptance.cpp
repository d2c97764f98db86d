// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion. Exits nonzero on any FAIL not listed
// in the --known-failures file, or when a listed failure no longer occurs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "fairpls/error.hpp"
#include "fairpls/experiment.hpp"
#include "fairpls/fair_pls.hpp"
#include "fairpls/kernel.hpp"
#include "fairpls/metrics.hpp"
#include "fairpls/pls.hpp"
#include "fairpls/recipe.hpp"
#include "test_util.hpp"

using namespace fairpls;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string detail;
  std::vector<std::string> failed_parts;  // sub-checks that failed, for the known-failure list
};

Outcome check(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail), {}}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vector leading_eigvec(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  return es.eigenvectors().col(M.rows() - 1);
}

Vector unit_random(Index d, std::mt19937_64& rng) {
  Vector w = tu::randn(d, 1, rng).col(0);
  return w.normalized();
}

std::string experiment_path(const std::string& name) {
  return default_config_dir() + "/experiments/" + name + ".kv";
}

bool dataset_available(const std::string& name) {
  return std::filesystem::exists(default_data_dir() + "/" + name + ".csv");
}

// Mean of a summary column for (method, model, eta).
double summary_mean(const std::vector<SummaryRow>& rows, const std::string& model, double eta,
                    const std::string& column) {
  const auto& cols = report_columns();
  const auto j = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), column) - cols.begin());
  for (const auto& r : rows)
    if (r.model == model && std::abs(r.eta - eta) < 1e-12) return r.mean[j];
  throw Error(ErrorKind::invalid_argument, "no summary row for " + model + " eta " + std::to_string(eta));
}

Outcome c1_eta_zero() {
  const auto t0 = Clock::now();
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    const Index n = tu::uniform_int(rng, 30, 100), d = tu::uniform_int(rng, 3, 12);
    const int k = tu::uniform_int(rng, 1, 3);
    auto in = tu::random_instance(n, d, 1, seed);
    PlsModel p = nipals_fit(in.X, in.Y, k);
    FairPlsModel f = fair_pls_fit(in.X, in.Y, in.S, k, 0.0);
    worst = std::max(worst, tu::signed_col_err(f.W, p.W));
  }
  const double secs = seconds_since(t0);
  return check(worst <= 1e-5 && secs < 10, fmt("max rel err %.2e (<= 1e-5), %.2f s (< 10)", worst, secs));
}

Vector central_fd(const std::function<double(const Vector&)>& f, const Vector& w, double h) {
  Vector g(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    Vector a = w, b = w;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

Outcome c2_gradients() {
  double worst_dp = 0, worst_eo = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 2000);
    const Index n = tu::uniform_int(rng, 20, 80), d = tu::uniform_int(rng, 2, 10), m = tu::uniform_int(rng, 1, 3);
    auto in = tu::random_instance(n, d, m, seed + 2000);
    const Vector w = unit_random(d, rng);
    const double eta = std::uniform_real_distribution<double>(0, 10)(rng);
    auto dp = [&](const Vector& v) { return fpls_objective_grad(v, in.X, in.Y, in.S, eta).value; };
    auto eo = [&](const Vector& v) { return eo_objective_grad(v, in.X, in.Y, in.S, eta, 0.0).value; };
    worst_dp = std::max(worst_dp, tu::rel_err(fpls_objective_grad(w, in.X, in.Y, in.S, eta).grad, central_fd(dp, w, 1e-6)));
    worst_eo = std::max(worst_eo, tu::rel_err(eo_objective_grad(w, in.X, in.Y, in.S, eta, 0.0).grad, central_fd(eo, w, 1e-6)));
  }
  return check(worst_dp <= 1e-5 && worst_eo <= 1e-5,
               fmt("demographic %.2e, equalized-odds %.2e (<= 1e-5) over 50 instances", worst_dp, worst_eo));
}

Outcome c3_eigen_oracle() {
  double worst_pls = 0, worst_eig = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = tu::random_instance(60, 7, 2, seed + 3000);
    const Matrix& X = in.X.values();
    const Matrix& Y = in.Y.values();
    PlsModel p = nipals_fit(in.X, in.Y, 1);
    worst_pls = std::max(worst_pls, tu::signed_col_err(p.W.col(0), leading_eigvec(X.transpose() * Y * Y.transpose() * X)));

    // S in the span of Y so YY' - eta SS' stays PSD below the bound
    std::mt19937_64 rng(seed + 3000);
    Vector mix = tu::randn(2, 1, rng).col(0);
    CenteredMatrix S = CenteredMatrix::fit(Matrix(Y * mix));
    const double eta = 0.5 * eigen_regime_bound(in.Y, S);
    FairPlsModel e = eigen_regime_fit(in.X, in.Y, S, 1, eta);
    Matrix B = Y * Y.transpose() - eta * S.values() * S.values().transpose();
    worst_eig = std::max(worst_eig, tu::signed_col_err(e.W.col(0), leading_eigvec(X.transpose() * B * X)));
  }
  return check(worst_pls <= 1e-6 && worst_eig <= 1e-6,
               fmt("nipals w1 %.2e, eigen-regime w1 %.2e (<= 1e-6)", worst_pls, worst_eig));
}

Outcome c4_kernel_reduction() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = tu::random_instance(60, 6, 1, seed + 4000);
    const double eta = 0.5 + static_cast<double>(seed);
    FairPlsModel f = fair_pls_fit(in.X, in.Y, in.S, 2, eta);
    KernelFairPlsModel k = kfpls_fit(in.X, in.Y, in.S.values(), 2, eta, KernelSpec::linear(), KernelSpec::linear());
    worst = std::max(worst, tu::signed_col_err(k.T, f.T));
  }
  return check(worst <= 1e-4, fmt("max score rel err %.2e (<= 1e-4)", worst));
}

Outcome c5_monotonicity() {
  std::string detail;
  bool ok = true;
  const std::vector<double> etas{0, 1, 2, 10};

  ExperimentConfig cfg = load_experiment_config(experiment_path("synthetic_a"));
  cfg.eta_grid = etas;
  std::vector<double> mean(etas.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PreparedData data = prepare(load_recipe(cfg.recipe_path), seed);
    cfg.seed = seed;
    auto sum = summarize(run_experiment_a(cfg, data));
    for (std::size_t e = 0; e < etas.size(); ++e) mean[e] += summary_mean(sum, "none", etas[e], "cov2_sensitive") / 5;
  }
  bool mono = true;
  for (std::size_t e = 1; e < etas.size(); ++e) mono = mono && mean[e] <= mean[e - 1];
  const bool small = mean.back() <= 0.1 * mean.front();
  ok = mono && small;
  std::vector<std::string> failed;
  if (!ok) failed.push_back("synthetic");
  detail = fmt("synthetic mean Cov2(T,S) %.4g, %.4g, %.4g, %.4g", mean[0], mean[1], mean[2], mean[3]);
  detail += fmt(" (ratio %.3f <= 0.1", mean.back() / std::max(mean.front(), 1e-300)) + (mono ? ", monotone)" : ", NOT monotone)");

  int loaded = 0;
  for (const char* name : {"adult", "compas", "german", "law", "communities"}) {
    if (!dataset_available(name)) {
      detail += std::string("; ") + name + " skipped (no data)";
      continue;
    }
    ExperimentConfig rc = load_experiment_config(experiment_path(std::string(name) + "_a"));
    rc.eta_grid = {0.0, 10.0};
    auto sum = summarize(run_experiment_a(rc, load_experiment_data(rc)));
    const double r = summary_mean(sum, "none", 10.0, "cov2_sensitive") /
                     std::max(summary_mean(sum, "none", 0.0, "cov2_sensitive"), 1e-300);
    ok = ok && r <= 0.25;
    if (r > 0.25) failed.push_back(name);
    ++loaded;
    // Training-row ratio on the first split, reported only; the verdict uses held-out rows.
    PreparedData rd = load_experiment_data(rc);
    const Fold split = split_train_test(static_cast<std::size_t>(rd.rows()), rc.train_fraction, rc.seed);
    auto train_cov = [&](double eta) {
      Representation rep = fit_representation(rc, rd, split.train, eta, rc.k);
      return score_representation(rep.scores(rep.fit_blocks.X), rep.fit_blocks.Y.values(), rep.fit_blocks.S.values())
          .second;
    };
    const double rt = train_cov(10.0) / std::max(train_cov(0.0), 1e-300);
    detail += std::string("; ") + name + fmt(" eta10/eta0 %.3f (train %.1e)", r, rt);
  }
  detail += fmt("; %g real datasets checked (<= 0.25)", loaded);
  Outcome o = check(ok, detail);
  o.failed_parts = failed;
  return o;
}

Outcome c6_adult_di() {
  if (!dataset_available("adult")) return {Verdict::skip, "adult.csv not available", {}};
  PreparedData data = prepare(load_recipe(default_config_dir() + "/recipes/adult.kv"));
  DisparateImpact di = disparate_impact(data.labels(), data.groups());
  const bool ok = std::abs(di.di - 0.3597) <= 0.02 && std::abs(di.ci_lo - 0.3428) <= 0.02 &&
                  std::abs(di.ci_hi - 0.3765) <= 0.02;
  return check(ok, fmt("DI %.4f (0.3597 +- 0.02), CI [%.4f, %.4f] (+- 0.02 of [0.3428, 0.3765])", di.di, di.ci_lo,
                       di.ci_hi));
}

Outcome c7_vanilla_counts() {
  PreparedData data = prepare(load_recipe(default_config_dir() + "/recipes/synthetic.kv"));
  std::vector<std::size_t> all(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CenteredBlocks b = center_rows(data, all);
  const auto g = data.groups();
  auto count = [&](double tau) {
    auto r = vanilla_fair_pls(b.X, b.Y, g, 7, tau);
    return static_cast<int>(std::count(r.selected.begin(), r.selected.end(), true));
  };
  const int c1 = count(0.1), c4 = count(0.4), c8 = count(0.8);
  const bool ok = data.rows() == 1000 && c1 == 0 && std::abs(c4 - 6) <= 1 && std::abs(c8 - 7) <= 1;
  return check(ok, fmt("%g rows; tau 0.1 -> %g (0), 0.4 -> %g (6 +- 1), 0.8 -> %g (7 +- 1)",
                       static_cast<double>(data.rows()), c1, c4, c8));
}

Outcome c8_correlation_ratio() {
  Vector t(4);
  t << 1, 2, 3, 4;
  const double v = correlation_ratio(t, {0, 0, 1, 1});
  return check(std::abs(v - 0.8) <= 1e-12, fmt("%.15f (0.8 +- 1e-12)", v));
}

Outcome c9_invariants() {
  const auto t0 = Clock::now();
  int failures = 0;
  auto expect = [&](bool c) { failures += c ? 0 : 1; };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 9000);
    const Index n = tu::uniform_int(rng, 15, 80), d = tu::uniform_int(rng, 3, 12);
    const int k = 3;
    auto in = tu::random_instance(n, d, 1, seed + 9000);

    PlsModel p = nipals_fit(in.X, in.Y, k);
    FairPlsModel f = fair_pls_fit(in.X, in.Y, in.S, k, 2.0);
    for (const Matrix* W : {&p.W, &f.W})
      for (Index h = 0; h < k; ++h) expect(std::abs(W->col(h).norm() - 1.0) <= 1e-10);
    for (const Matrix* T : {&p.T, &f.T}) {
      const double scale = T->colwise().squaredNorm().maxCoeff();
      for (Index h = 0; h < k; ++h)
        for (Index g = 0; g < h; ++g) expect(std::abs(T->col(h).dot(T->col(g))) <= 1e-8 * scale);
    }

    KernelFairPlsModel km = kfpls_fit(in.X, in.Y, in.S.values(), k, 2.0, KernelSpec::rbf_median(), KernelSpec::linear());
    auto seq = kfpls_deflation_sequence(km);
    const double base = seq[0].norm();
    expect(seq[0].rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, base));
    expect(seq[0].colwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, base));
    for (Index h = 0; h < km.k(); ++h) {
      const auto next = static_cast<std::size_t>(h + 1);
      expect((seq[next] * km.T.col(h)).norm() <= 1e-8 * std::max(1.0, base * km.T.col(h).norm()));
      Eigen::SelfAdjointEigenSolver<Matrix> es(seq[next], Eigen::EigenvaluesOnly);
      expect(es.eigenvalues().minCoeff() >= -1e-6 * base);
    }
  }
  const double secs = seconds_since(t0);
  return check(failures == 0 && secs < 120,
               fmt("%g invariant violations over 20 seeds, %.2f s (< 120)", failures, secs));
}

Outcome c10_downstream() {
  const bool have_compas = dataset_available("compas"), have_comm = dataset_available("communities");
  if (!have_compas && !have_comm) return {Verdict::skip, "compas.csv and communities.csv not available", {}};
  if (!have_compas || !have_comm)
    return {Verdict::skip, std::string(have_compas ? "communities" : "compas") + ".csv not available", {}};

  ExperimentConfig cc = load_experiment_config(experiment_path("compas_b"));
  cc.eta_grid = {0.0};
  auto cs = summarize(run_experiment_b(cc, load_experiment_data(cc)));
  const double acc = summary_mean(cs, "lr", 0.0, "accuracy"), di = summary_mean(cs, "lr", 0.0, "di");

  ExperimentConfig mc = load_experiment_config(experiment_path("communities_b"));
  mc.eta_grid = {0.0, 1.0};
  auto ms = summarize(run_experiment_b(mc, load_experiment_data(mc)));
  const double ks0 = summary_mean(ms, "lr", 0.0, "ks"), ks1 = summary_mean(ms, "lr", 1.0, "ks");
  const double mse0 = summary_mean(ms, "lr", 0.0, "mse"), mse1 = summary_mean(ms, "lr", 1.0, "mse");

  const bool ok = std::abs(acc - 0.892) <= 0.02 && std::abs(di - 0.808) <= 0.05 && ks0 - ks1 >= 0.05 &&
                  std::abs(mse1 - mse0) <= 0.01;
  return check(ok, fmt("COMPAS acc %.4f (0.892 +- 0.02), DI %.4f (0.808 +- 0.05)", acc, di) +
                       fmt("; Communities KS %.4f -> %.4f (drop >= 0.05), MSE change %.4f (<= 0.01)", ks0, ks1,
                           std::abs(mse1 - mse0)));
}

Outcome c11_complexity() {
  auto rows = run_benchmark({{5000, 50}}, 3, 9, 0, 1.0);
  double pls = 0, fair = 0;
  for (const auto& r : rows) {
    if (r.method == "pls") pls = r.median_ms;
    if (r.method == "fair-pls") fair = r.median_ms;
  }
  const double ratio = fair / std::max(pls, 1e-9);
  return check(pls > 0 && fair > 0 && ratio <= 5,
               fmt("median ms pls %.2f, fair-pls %.2f, ratio %.2f (<= 5)", pls, fair, ratio));
}

// Known-failure file: one "<criterion>:<part>" per line, '#' starts a comment.
std::set<std::string> read_known_failures(const std::string& path) {
  std::set<std::string> out;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    std::istringstream ss(line);
    std::string tok;
    if (ss >> tok) out.insert(tok);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--known-failures" && a + 1 < argc) {
      known = read_known_failures(argv[++a]);
    } else {
      std::fprintf(stderr, "usage: %s [--known-failures FILE]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"eta-zero equivalence", c1_eta_zero},
      {"gradient correctness", c2_gradients},
      {"eigen oracle", c3_eigen_oracle},
      {"kernel reduction", c4_kernel_reduction},
      {"eta monotonicity", c5_monotonicity},
      {"adult disparate impact", c6_adult_di},
      {"vanilla baseline counts", c7_vanilla_counts},
      {"correlation ratio hand value", c8_correlation_ratio},
      {"invariant suites", c9_invariants},
      {"downstream compas/communities", c10_downstream},
      {"complexity parity", c11_complexity},
  };
  int failed = 0, unexpected = 0;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what(), {}};
    }
    const std::string id = std::to_string(i + 1);
    bool expected = false;
    if (o.verdict == Verdict::fail) {
      ++failed;
      expected = !o.failed_parts.empty();
      for (const auto& part : o.failed_parts) {
        seen.insert(id + ":" + part);
        expected = expected && known.count(id + ":" + part);
      }
      unexpected += expected ? 0 : 1;
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::skip ? "SKIP" : "FAIL";
    std::printf("%s [%zu] %s: %s (%.1f s)%s\n", tag, i + 1, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0), expected ? " [known failure]" : "");
    std::fflush(stdout);
  }
  // a listed failure that no longer happens must be removed from the list
  int stale = 0;
  for (const auto& k : known)
    if (!seen.count(k)) {
      std::printf("STALE known failure %s: it did not fail this run\n", k.c_str());
      ++stale;
    }
  std::printf("%d of %zu criteria failed (%d unexpected, %d stale known-failure entries)\n", failed, criteria.size(),
              unexpected, stale);
  return unexpected == 0 && stale == 0 ? 0 : 1;
}
