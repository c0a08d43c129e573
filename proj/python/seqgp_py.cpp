#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "seqgp/cli.hpp"
#include "seqgp/diagnostics.hpp"
#include "seqgp/engine.hpp"
#include "seqgp/error.hpp"
#include "seqgp/io.hpp"
#include "seqgp/option_model.hpp"
#include "seqgp/pde_pricer.hpp"
#include "seqgp/ssg.hpp"

namespace py = pybind11;
using namespace seqgp;

namespace {

py::dict sample_set_dict(const SampleSet& s) {
  py::dict d;
  d["t"] = s.t;
  d["f"] = s.f_matrix();
  d["kappa"] = s.kappa_matrix();
  d["alpha"] = s.alpha_matrix();
  return d;
}

py::dict sequence_dict(const SequenceResult& r) {
  py::list sets;
  std::vector<double> times;
  for (const auto& s : r.sets) sets.append(sample_set_dict(s));
  for (const auto& d : r.diagnostics) times.push_back(d.wall_time_s);
  py::dict out;
  out["sets"] = sets;
  out["wall_time_s"] = times;
  return out;
}

RunConfig default_config(const std::string& model) {
  return default_settings(parse_model_kind(model)).run;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sequential Gaussian-process posterior sampling";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<InputSet>(m, "InputSet")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("t"), py::arg("x"))
      .def_readonly("t", &InputSet::t)
      .def_readonly("x", &InputSet::x)
      .def("__len__", &InputSet::size);

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init<Eigen::VectorXd, double, double>(), py::arg("lengthscales_x"),
           py::arg("lengthscale_t"), py::arg("signal_sd"))
      .def_static("from_vector", &KernelParams::from_vector)
      .def("to_vector", &KernelParams::to_vector);

  m.def("gram_matrix", [](const InputSet& x, const KernelParams& k) { return gram_matrix(x, k); },
        py::arg("inputs"), py::arg("kappa"));
  m.def(
      "conditional_prior",
      [](const std::vector<std::pair<Eigen::VectorXd, InputSet>>& window, const InputSet& query,
         const KernelParams& k) {
        std::vector<LatentBlock> blocks;
        for (const auto& [v, in] : window) blocks.push_back(LatentBlock{v, in});
        const auto c = conditional_prior(blocks, query, k);
        return py::make_tuple(c.mean, c.cov);
      },
      py::arg("window"), py::arg("query"), py::arg("kappa"),
      "Mean and covariance of the query block given (values, inputs) window blocks.");

  m.def("ssg_forward", [](const Eigen::VectorXd& z, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return ssg_forward(z, SsgSpec::non_informative(lo, hi));
  });
  m.def("ssg_inverse", [](const Eigen::VectorXd& th, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return ssg_inverse(th, SsgSpec::non_informative(lo, hi));
  });
  m.def("moment_match", &moment_match, py::arg("z_samples"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("t_steps", &RunConfig::t_steps)
      .def_readwrite("tau", &RunConfig::tau)
      .def_readwrite("m_samples", &RunConfig::m_samples)
      .def_readwrite("n_initial", &RunConfig::n_initial)
      .def_readwrite("burn_in", &RunConfig::burn_in)
      .def_readwrite("thin", &RunConfig::thin)
      .def_readwrite("ess_reps", &RunConfig::ess_reps)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("sdss_every_step", &RunConfig::sdss_every_step)
      .def_readwrite("aux_scale", &RunConfig::aux_scale)
      .def_readwrite("mode_start", &RunConfig::mode_start)
      .def_readwrite("kappa_min", &RunConfig::kappa_min)
      .def_readwrite("kappa_max", &RunConfig::kappa_max)
      .def_readwrite("alpha_min", &RunConfig::alpha_min)
      .def_readwrite("alpha_max", &RunConfig::alpha_max)
      .def_readwrite("full_size_guard", &RunConfig::full_size_guard)
      .def("validate", &RunConfig::validate);
  m.def("default_config", &default_config, py::arg("model") = "regression");

  py::class_<RegressionDataset>(m, "RegressionDataset")
      .def_readonly("inputs", &RegressionDataset::inputs)
      .def_readonly("f_true", &RegressionDataset::f_true)
      .def_readonly("y", &RegressionDataset::y)
      .def_readonly("kappa_true", &RegressionDataset::kappa_true)
      .def_readonly("alpha_true", &RegressionDataset::alpha_true);
  m.def(
      "generate_regression",
      [](std::size_t t_steps, std::size_t n, std::uint64_t seed) {
        RegressionConfig rc;
        rc.t_steps = t_steps;
        rc.n_per_step = n;
        rc.seed = seed;
        return generate_regression_dataset(rc);
      },
      py::arg("t_steps"), py::arg("n_per_step"), py::arg("seed") = 1);
  m.def("gauss_loglik", &gauss_loglik, py::arg("f"), py::arg("alpha"), py::arg("y"));

  m.def(
      "run_sequence",
      [](const RegressionDataset& d, const RunConfig& cfg) {
        RngStream rng(cfg.seed);
        SequenceResult r;
        {
          py::gil_scoped_release release;
          r = run_sequence(d.model(), cfg, rng);
        }
        return sequence_dict(r);
      },
      py::arg("data"), py::arg("config"), "Sequential sampler over a regression dataset.");
  m.def(
      "full_gibbs_baseline",
      [](const RegressionDataset& d, const RunConfig& cfg, bool override_guard) {
        RngStream rng(cfg.seed);
        SequenceResult r;
        {
          py::gil_scoped_release release;
          r = full_gibbs_baseline(d.model(), cfg, rng, override_guard);
        }
        return sequence_dict(r);
      },
      py::arg("data"), py::arg("config"), py::arg("override_guard") = false);
  m.def("effective_sample_size", &effective_sample_size, py::arg("chain"));
  m.def("band_coverage", &band_coverage, py::arg("samples"), py::arg("truth"));

  m.def("softplus", &softplus);
  m.def(
      "price_flat",
      [](double spot, double sigma, const std::vector<std::pair<double, double>>& quotes, int n_k,
         int n_t, double rate) {
        double max_k = 0.0, max_t = 0.0;
        std::vector<Quote> q;
        for (const auto& [tau, k] : quotes) {
          q.push_back({tau, k});
          max_k = std::max(max_k, k);
          max_t = std::max(max_t, tau);
        }
        const PdeGrid g = PdeGrid::for_quotes(spot, max_k, max_t, n_k, n_t, rate);
        return crank_nicolson_price(Eigen::MatrixXd::Constant(g.n_t + 1, g.n_k + 1, sigma), g, q);
      },
      py::arg("spot"), py::arg("sigma"), py::arg("quotes"), py::arg("n_k") = 200,
      py::arg("n_t") = 200, py::arg("rate") = 0.0,
      "Crank-Nicolson call prices under a constant local volatility; quotes are (maturity, strike).");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"seqgp"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli_main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line interface; returns its exit code.");
}
