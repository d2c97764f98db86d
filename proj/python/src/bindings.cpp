#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "fairpls/data.hpp"
#include "fairpls/error.hpp"
#include "fairpls/fair_pls.hpp"
#include "fairpls/kernel.hpp"
#include "fairpls/metrics.hpp"
#include "fairpls/pls.hpp"
#include "fairpls/recipe.hpp"

namespace py = pybind11;
using namespace fairpls;

namespace {

Normalization norm_of(bool standardize) { return standardize ? Normalization::standardize : Normalization::none; }

// Raw rows in the training column space (model centering replayed).
Matrix center_input(const CenteringStats& stats, const Matrix& X_raw) {
  return apply_centering(stats, X_raw).values();
}

GdParams gd_params(double learning_rate, int max_iter, double tol, int restarts, std::uint64_t seed) {
  GdParams gd;
  gd.learning_rate = learning_rate;
  gd.max_iter = max_iter;
  gd.tol = tol;
  gd.restarts = restarts;
  gd.seed = seed;
  return gd;
}

KernelSpec kernel_of(const std::string& kind, std::optional<double> bandwidth) {
  if (kind == "linear") return KernelSpec::linear();
  if (kind == "rbf") return bandwidth ? KernelSpec::rbf(*bandwidth) : KernelSpec::rbf_median();
  throw Error(ErrorKind::invalid_argument, "kernel must be 'linear' or 'rbf', got '" + kind + "'");
}

std::vector<int> as_labels(const Vector& v) { return to_labels(v); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fair partial least squares bindings";
  py::register_exception<Error>(m, "FairPlsError", PyExc_ValueError);

  py::class_<PlsModel>(m, "PlsModel")
      .def_readonly("W", &PlsModel::W)
      .def_readonly("P", &PlsModel::P)
      .def_readonly("C", &PlsModel::C)
      .def_readonly("T", &PlsModel::T)
      .def_readonly("U", &PlsModel::U)
      .def_property_readonly("k", &PlsModel::k)
      .def("transform",
           [](const PlsModel& p, const Matrix& X) { return transform(p, center_input(p.x_stats, X)); }, py::arg("X"))
      .def("reconstruct", [](const PlsModel& p, const Matrix& T) { return reconstruct(p, T); }, py::arg("T"));

  py::class_<FairPlsModel>(m, "FairPlsModel")
      .def_readonly("W", &FairPlsModel::W)
      .def_readonly("Gamma", &FairPlsModel::Gamma)
      .def_readonly("T", &FairPlsModel::T)
      .def_readonly("eta", &FairPlsModel::eta)
      .def_readonly("warnings", &FairPlsModel::warnings)
      .def_property_readonly("k", &FairPlsModel::k)
      .def_property_readonly("objective_traces",
                             [](const FairPlsModel& f) {
                               std::vector<std::vector<double>> out;
                               for (const auto& t : f.traces) out.push_back(t.objective);
                               return out;
                             })
      .def("transform",
           [](const FairPlsModel& f, const Matrix& X) { return transform(f, center_input(f.x_stats, X)); },
           py::arg("X"))
      .def("reconstruct", [](const FairPlsModel& f, const Matrix& T) { return reconstruct(f, T); }, py::arg("T"));

  py::class_<KernelFairPlsModel>(m, "KernelFairPlsModel")
      .def_readonly("A", &KernelFairPlsModel::A)
      .def_readonly("T", &KernelFairPlsModel::T)
      .def_readonly("eta", &KernelFairPlsModel::eta)
      .def_property_readonly("k", &KernelFairPlsModel::k)
      .def_property_readonly("kernel_x", [](const KernelFairPlsModel& k) { return k.kernel_x.to_string(); })
      .def("transform",
           [](const KernelFairPlsModel& k, const Matrix& X) {
             return kfpls_transform(k, center_input(k.x_stats, X));
           },
           py::arg("X"));

  m.def(
      "nipals",
      [](const Matrix& X, const Matrix& Y, int k, bool standardize) {
        return nipals_fit(CenteredMatrix::fit(X, norm_of(standardize)), CenteredMatrix::fit(Y), k);
      },
      py::arg("X"), py::arg("Y"), py::arg("k"), py::arg("standardize") = false,
      "Standard PLS by NIPALS. X and Y are raw; both are column-centered internally.");

  m.def(
      "fair_pls",
      [](const Matrix& X, const Matrix& Y, const Matrix& S, int k, double eta, bool standardize, bool equalized_odds,
         double ridge, double learning_rate, int max_iter, double tol, int restarts, std::uint64_t seed) {
        const CenteredMatrix Xc = CenteredMatrix::fit(X, norm_of(standardize));
        const CenteredMatrix Yc = CenteredMatrix::fit(Y), Sc = CenteredMatrix::fit(S);
        const GdParams gd = gd_params(learning_rate, max_iter, tol, restarts, seed);
        return equalized_odds ? eo_fair_pls_fit(Xc, Yc, Sc, k, eta, gd, ridge) : fair_pls_fit(Xc, Yc, Sc, k, eta, gd);
      },
      py::arg("X"), py::arg("Y"), py::arg("S"), py::arg("k"), py::arg("eta"), py::arg("standardize") = false,
      py::arg("equalized_odds") = false, py::arg("ridge") = 0.0, py::arg("learning_rate") = 0.05,
      py::arg("max_iter") = 2000, py::arg("tol") = 1e-9, py::arg("restarts") = 3, py::arg("seed") = 0,
      "Fair PLS with a covariance penalty on S (or on S given Y when equalized_odds is set).");

  m.def(
      "kernel_fair_pls",
      [](const Matrix& X, const Matrix& Y, const Matrix& S, int k, double eta, const std::string& kernel_x,
         std::optional<double> bandwidth, const std::string& kernel_s, bool standardize, double learning_rate,
         int max_iter, double tol, int restarts, std::uint64_t seed) {
        return kfpls_fit(CenteredMatrix::fit(X, norm_of(standardize)), CenteredMatrix::fit(Y), S, k, eta,
                         kernel_of(kernel_x, bandwidth), kernel_of(kernel_s, std::nullopt),
                         gd_params(learning_rate, max_iter, tol, restarts, seed));
      },
      py::arg("X"), py::arg("Y"), py::arg("S"), py::arg("k"), py::arg("eta"), py::arg("kernel_x") = "rbf",
      py::arg("bandwidth") = py::none(), py::arg("kernel_s") = "linear", py::arg("standardize") = false,
      py::arg("learning_rate") = 0.05, py::arg("max_iter") = 2000, py::arg("tol") = 1e-9, py::arg("restarts") = 3,
      py::arg("seed") = 0, "Kernel fair PLS with an HSIC penalty. bandwidth=None uses the median heuristic.");

  m.def(
      "vanilla_fair_pls",
      [](const Matrix& X, const Matrix& Y, const std::vector<int>& groups, int k, double tau, bool standardize) {
        VanillaResult r = vanilla_fair_pls(CenteredMatrix::fit(X, norm_of(standardize)), CenteredMatrix::fit(Y),
                                           groups, k, tau);
        py::dict d;
        d["scores"] = r.scores;
        d["selected"] = r.selected;
        d["ratios"] = r.ratios;
        return d;
      },
      py::arg("X"), py::arg("Y"), py::arg("groups"), py::arg("k"), py::arg("tau"), py::arg("standardize") = false,
      "PLS components whose correlation ratio with the groups is below tau.");

  m.def("cov2", &cov2, py::arg("T"), py::arg("Z"), "||T'Z||_F^2 / n^2 on centered inputs.");
  m.def("correlation_ratio", &correlation_ratio, py::arg("t"), py::arg("groups"));
  m.def("hsic", &hsic, py::arg("Kx"), py::arg("Ks"), "tr(Kx Ks) / n^2 on centered Grams.");
  m.def(
      "disparate_impact",
      [](const Vector& yhat, const Vector& s, double alpha) {
        DisparateImpact r = disparate_impact(as_labels(yhat), as_labels(s), alpha);
        py::dict d;
        d["di"] = r.di;
        d["ci_lo"] = r.ci_lo;
        d["ci_hi"] = r.ci_hi;
        d["degenerate"] = r.degenerate;
        return d;
      },
      py::arg("yhat"), py::arg("s"), py::arg("alpha") = 0.05);
  m.def(
      "ks_statistic",
      [](const std::vector<double>& yhat, const Vector& s) { return ks_statistic(yhat, as_labels(s)); },
      py::arg("yhat"), py::arg("s"));
  m.def(
      "eopp_ratio",
      [](const Vector& yhat, const Vector& y, const Vector& s) {
        return eopp_ratio(as_labels(yhat), as_labels(y), as_labels(s));
      },
      py::arg("yhat"), py::arg("y"), py::arg("s"));

  m.def(
      "synthetic",
      [](std::uint64_t seed) {
        PreparedData d = prepare(load_recipe(default_config_dir() + "/recipes/synthetic.kv"), seed);
        return py::make_tuple(d.x_raw, d.y, d.s);
      },
      py::arg("seed") = 0, "Two-group synthetic data as (X, y, s) from the shipped defaults.");
}
