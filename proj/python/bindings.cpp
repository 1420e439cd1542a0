#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dcsieve/study.hpp"

namespace py = pybind11;
using namespace dcsieve;

namespace {

Dataset from_arrays(const Eigen::VectorXd& y, const Eigen::VectorXi& r, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& v, double tau) {
  const Eigen::Index n = y.size();
  if (r.size() != n || v.size() != n || x.rows() != n) throw std::invalid_argument("array lengths differ");
  Dataset d;
  d.tau = tau;
  d.d = static_cast<int>(x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Observation o;
    o.y = y[i];
    o.r = r[i] != 0;
    o.x.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) o.x[static_cast<std::size_t>(j)] = x(i, j);
    o.v = v[i];
    d.observations.push_back(std::move(o));
  }
  d.validate();
  return d;
}

EstimatorConfig make_config(int m, int kn, double penalty, int panels, const std::string& scheme,
                            const std::string& v_mode) {
  EstimatorConfig c;
  c.m = m;
  c.kn = kn;
  c.penalty_weight = penalty;
  c.rule.panels = panels;
  c.rule.scheme = quad_scheme_from_string(scheme);
  c.v_mode = v_mode_from_string(v_mode);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sieve pseudo-likelihood estimation of a marginal treatment effect under dependent censoring";

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_arrays", &from_arrays, py::arg("y"), py::arg("r"), py::arg("x"), py::arg("v"),
                  py::arg("tau") = 1.0)
      .def("__len__", &Dataset::size)
      .def_readonly("tau", &Dataset::tau)
      .def_readonly("d", &Dataset::d)
      .def_property_readonly("y",
                             [](const Dataset& d) {
                               Eigen::VectorXd out(static_cast<Eigen::Index>(d.size()));
                               for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<Eigen::Index>(i)] = d.observations[i].y;
                               return out;
                             })
      .def_property_readonly("r",
                             [](const Dataset& d) {
                               Eigen::VectorXi out(static_cast<Eigen::Index>(d.size()));
                               for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<Eigen::Index>(i)] = d.observations[i].r;
                               return out;
                             })
      .def_property_readonly("x",
                             [](const Dataset& d) {
                               Eigen::MatrixXd out(static_cast<Eigen::Index>(d.size()), d.d);
                               for (std::size_t i = 0; i < d.size(); ++i)
                                 for (int j = 0; j < d.d; ++j) out(static_cast<Eigen::Index>(i), j) = d.observations[i].x[static_cast<std::size_t>(j)];
                               return out;
                             })
      .def_property_readonly("v",
                             [](const Dataset& d) {
                               Eigen::VectorXd out(static_cast<Eigen::Index>(d.size()));
                               for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<Eigen::Index>(i)] = d.observations[i].v;
                               return out;
                             })
      .def("to_csv", [](const Dataset& d, const std::string& path) { write_csv(d, path); }, py::arg("path"));

  m.def(
      "simulate",
      [](double beta0, int n, std::uint64_t seed, double tau, double censor_scale, double censor_power) {
        SimScenario s;
        s.beta0 = beta0;
        s.n = n;
        s.seed = seed;
        s.tau = tau;
        s.censor_scale = censor_scale;
        s.censor_power = censor_power;
        return generate(s);
      },
      py::arg("beta0"), py::arg("n"), py::arg("seed"), py::arg("tau") = 1.0, py::arg("censor_scale") = 4.0,
      py::arg("censor_power") = 0.0);
  m.def("load_csv", &load_csv, py::arg("path"), py::arg("tau") = 1.0);
  m.def("censoring_rate", &censoring_rate);
  m.def("naive_alpha", &naive_alpha);

  m.def(
      "cox_fit",
      [](const Dataset& d, const std::string& role, const std::string& covariates) {
        const EventRole er = role == "censoring" ? EventRole::Censoring : EventRole::Failure;
        if (role != "censoring" && role != "failure") throw std::invalid_argument("role must be failure or censoring");
        const CoxFit f = fit_cox(d, er, CovariateSet::parse(covariates, d.d));
        py::dict out;
        out["coef"] = f.coef;
        out["info"] = f.info;
        out["loglik"] = f.loglik;
        out["iterations"] = f.iterations;
        out["converged"] = f.converged;
        out["influence"] = cox_influence(f, d);
        return out;
      },
      py::arg("data"), py::arg("role") = "censoring", py::arg("covariates") = "x1,x2,v");

  m.def(
      "spline_basis",
      [](int degree, int kn, double s) { return SplineBasis(degree, kn).eval(s); }, py::arg("m"), py::arg("kn"),
      py::arg("s"));

  m.def(
      "fit_json",
      [](const Dataset& d, const std::string& covariates, int m_, int kn, double penalty, int panels,
         const std::string& scheme, const std::string& v_mode) {
        const EstimatorConfig c = make_config(m_, kn, penalty, panels, scheme, v_mode);
        py::gil_scoped_release release;
        const SingleFit r = fit_once(d, CovariateSet::parse(covariates, d.d), c);
        return single_fit_to_json(r, d);
      },
      py::arg("data"), py::arg("censor_covs") = "x1,x2,v", py::arg("m") = 3, py::arg("kn") = 5,
      py::arg("penalty") = 1e-3, py::arg("panels") = 64, py::arg("scheme") = "gauss-legendre",
      py::arg("v_mode") = "auto");

  m.def(
      "study_json",
      [](const std::string& config_text, int workers) {
        const StudyConfig c = StudyConfig::from_json_text(config_text);
        py::gil_scoped_release release;
        return report_to_json(run_study(c, workers));
      },
      py::arg("config"), py::arg("workers") = 0);
}
