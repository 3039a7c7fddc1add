#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "frailty/cli.hpp"
#include "frailty/covariance.hpp"
#include "frailty/error.hpp"
#include "frailty/model.hpp"
#include "frailty/panel.hpp"
#include "frailty/portfolio.hpp"
#include "frailty/prediction.hpp"
#include "frailty/scoring.hpp"

namespace py = pybind11;
using namespace frailty;

namespace {

Smoothness smoothness_from(double nu) {
  if (nu == 0.5) return Smoothness::half;
  if (nu == 1.5) return Smoothness::three_halves;
  if (nu == 2.5) return Smoothness::five_halves;
  throw ValidationError("nu must be 0.5, 1.5 or 2.5");
}

py::dict theta_dict(const CovarianceParams& t) {
  py::dict d;
  d["sigma2"] = t.sigma2;
  d["rho_s"] = t.rho_s;
  if (t.rho_t) d["rho_t"] = *t.rho_t;
  d["nu"] = smoothness_value(t.nu);
  return d;
}

PanelDataset synthetic(int n_loans, int n_periods, int first_period, int n_sites, double sigma2,
                       double rho_s, std::optional<double> rho_t, const std::string& mode,
                       double baseline, int n_features, double exit_rate, std::uint64_t seed) {
  SynthConfig c;
  c.n_loans = n_loans;
  c.n_periods = n_periods;
  c.first_period = first_period;
  c.n_sites = n_sites;
  c.sigma2 = sigma2;
  c.rho_s = rho_s;
  c.rho_t = rho_t;
  if (mode == "linear") {
    c.mode = SynthMode::linear;
  } else if (mode != "nonlinear") {
    throw ValidationError("mode must be 'linear' or 'nonlinear'");
  }
  c.baseline = baseline;
  c.n_features = n_features;
  c.exit_rate = exit_rate;
  c.seed = seed;
  return generate_synthetic(c).data;
}

FitOptions fit_options(std::uint64_t seed, int num_neighbors, double nu, bool include_year) {
  FitOptions o;
  o.seed = seed;
  o.num_neighbors = num_neighbors;
  o.nu = smoothness_from(nu);
  o.include_year = include_year;
  return o;
}

}  // namespace

PYBIND11_MODULE(_frailty, m) {
  m.doc() = "Spatio-temporal frailty models for loan default prediction";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<PanelDataset>(m, "Panel")
      .def_static("load", &load_panel, py::arg("csv_path"), py::arg("schema_path"))
      .def("save",
           [](const PanelDataset& p, const std::string& csv_path, const std::string& schema_path) {
             write_panel(p, csv_path);
             write_schema(p.schema(), schema_path);
           },
           py::arg("csv_path"), py::arg("schema_path"))
      .def("__len__", &PanelDataset::size)
      .def_property_readonly("num_loans", &PanelDataset::num_loans)
      .def_property_readonly("min_period", &PanelDataset::min_period)
      .def_property_readonly("max_period", &PanelDataset::max_period)
      .def("labels", &PanelDataset::labels)
      .def("balances", &PanelDataset::balances)
      .def("periods", &PanelDataset::periods, py::arg("lo"), py::arg("hi"));

  m.def("synthetic", &synthetic, py::arg("n_loans") = 1000, py::arg("n_periods") = 10,
        py::arg("first_period") = 2000, py::arg("n_sites") = 0, py::arg("sigma2") = 1.0,
        py::arg("rho_s") = 0.2, py::arg("rho_t") = std::optional<double>(2.0),
        py::arg("mode") = "nonlinear", py::arg("baseline") = -2.0, py::arg("n_features") = 4,
        py::arg("exit_rate") = 0.05, py::arg("seed") = 1);

  py::class_<FittedModel>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const FittedModel& f, const std::string& path) { save_model(f, path); },
           py::arg("path"))
      .def_property_readonly("kind", [](const FittedModel& f) { return to_string(f.kind); })
      .def_readonly("beta", &FittedModel::beta)
      .def_readonly("objective", &FittedModel::objective)
      .def_readonly("warnings", &FittedModel::warnings)
      .def_property_readonly("n_trees", [](const FittedModel& f) { return f.trees.size(); })
      .def_property_readonly("theta",
                             [](const FittedModel& f) -> py::object {
                               if (!f.latent) return py::none();
                               return theta_dict(f.latent->theta);
                             })
      .def(
          "predict",
          [](const FittedModel& f, const PanelDataset& p, int nodes) {
            return Eigen::VectorXd(predict_default_probs(f, p, nodes).probs);
          },
          py::arg("panel"), py::arg("nodes") = kDefaultQuadratureNodes)
      .def(
          "simulate_losses",
          [](const FittedModel& f, const PanelDataset& p, int n_sims, std::uint64_t seed, int threads) {
            return simulate_losses(f, p, n_sims, seed, threads).samples;
          },
          py::arg("panel"), py::arg("n_sims") = kDefaultSimulations, py::arg("seed") = 1,
          py::arg("threads") = 1);

  m.def(
      "fit_linear",
      [](const PanelDataset& p, const std::string& kind, std::uint64_t seed, int num_neighbors,
         double nu, bool include_year) {
        py::gil_scoped_release release;
        return fit_linear(p, model_kind_from_string(kind),
                          fit_options(seed, num_neighbors, nu, include_year));
      },
      py::arg("panel"), py::arg("kind") = "linear-spacetime", py::arg("seed") = 1,
      py::arg("num_neighbors") = 20, py::arg("nu") = 1.5, py::arg("include_year") = true);

  m.def(
      "fit_boosted",
      [](const PanelDataset& p, double learning_rate, int max_depth, int min_samples_leaf,
         double l2_lambda, int n_trees, std::uint64_t seed, int num_neighbors, double nu,
         bool include_year) {
        TreeTuning t;
        t.learning_rate = learning_rate;
        t.max_depth = max_depth;
        t.min_samples_leaf = min_samples_leaf;
        t.l2_lambda = l2_lambda;
        t.max_trees = n_trees;
        py::gil_scoped_release release;
        return fit_boosted(p, t, fit_options(seed, num_neighbors, nu, include_year)).model;
      },
      py::arg("panel"), py::arg("learning_rate") = 0.1, py::arg("max_depth") = 5,
      py::arg("min_samples_leaf") = 10, py::arg("l2_lambda") = 0.0, py::arg("n_trees") = 100,
      py::arg("seed") = 1, py::arg("num_neighbors") = 20, py::arg("nu") = 1.5,
      py::arg("include_year") = true);

  m.def("matern_correlation",
        [](double d, double nu) { return matern_correlation(d, smoothness_from(nu)); },
        py::arg("d"), py::arg("nu") = 1.5);
  m.def("response_probability", &response_probability, py::arg("F"), py::arg("mu"), py::arg("v"),
        py::arg("nodes") = kDefaultQuadratureNodes);

  m.def("auc", [](std::vector<double> p, std::vector<int> y) { return auc(p, y); });
  m.def("h_measure", [](std::vector<double> p, std::vector<int> y) { return h_measure(p, y); });
  m.def("log_loss", [](std::vector<double> p, std::vector<int> y) { return log_loss(p, y); });
  m.def("brier", [](std::vector<double> p, std::vector<int> y) { return brier(p, y); });
  m.def(
      "ece",
      [](std::vector<double> p, std::vector<int> y, int bins) {
        return ece(p, y, quantile_bins(p, bins));
      },
      py::arg("probs"), py::arg("labels"), py::arg("bins") = 20);
  m.def("crps", [](std::vector<double> s, double realized) { return crps_empirical(s, realized); },
        py::arg("samples"), py::arg("realized"));
  m.def("quantile_loss", &quantile_loss, py::arg("q"), py::arg("realized"),
        py::arg("alpha") = 0.99);

  m.def(
      "simulate_independent_losses",
      [](std::vector<double> probs, std::vector<double> balances, int n_sims, std::uint64_t seed) {
        return simulate_independent_losses(probs, balances, n_sims, seed).samples;
      },
      py::arg("probs"), py::arg("balances"), py::arg("n_sims") = kDefaultSimulations,
      py::arg("seed") = 1);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "frailty");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line interface; returns the exit code.");
}
