#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "dpmscreen/cli.hpp"
#include "dpmscreen/ctbf.hpp"
#include "dpmscreen/dpm.hpp"
#include "dpmscreen/mi.hpp"
#include "dpmscreen/mixmod.hpp"
#include "dpmscreen/screen.hpp"

namespace py = pybind11;
using namespace dpmscreen;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CountArray = py::array_t<long, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const DoubleArray& a) { return {a.data(), a.data() + a.size()}; }

ContingencyTable table_from(const CountArray& t) {
  if (t.ndim() != 2) throw InputError("table must be two-dimensional");
  return make_table(static_cast<int>(t.shape(0)), static_cast<int>(t.shape(1)),
                    std::vector<long>(t.data(), t.data() + t.size()));
}

CtbfConfig ctbf_config(double alpha, const std::string& rule, double total_mass) {
  CtbfConfig c;
  c.alpha = alpha;
  c.total_mass = total_mass;
  if (rule == "constant")
    c.rule = CellPrior::Constant;
  else if (rule == "total-mass")
    c.rule = CellPrior::TotalMass;
  else
    throw InputError("rule must be 'constant' or 'total-mass'");
  c.validate();
  return c;
}

py::object optional_value(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict pair_dict(const PairResult& r) {
  py::dict d;
  d["var_i"] = r.var_i;
  d["var_j"] = r.var_j;
  d["n_complete"] = r.n_complete;
  d["p_dep"] = optional_value(r.p_dep);
  d["pi_hat"] = optional_value(r.pi_hat);
  d["mi"] = optional_value(r.mi);
  d["chi2_T"] = optional_value(r.chi2_t);
  d["chi2_p"] = optional_value(r.chi2_p);
  d["status"] = r.status();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pairwise dependence screening with Dirichlet process mixtures";

  m.def(
      "log_bf",
      [](const CountArray& table, double alpha, const std::string& rule, double total_mass) {
        return log_bf(table_from(table), ctbf_config(alpha, rule, total_mass));
      },
      py::arg("table"), py::arg("alpha") = 0.5, py::arg("rule") = "constant", py::arg("total_mass") = 1.0,
      "Log Bayes factor of independence against dependence for a contingency table.");

  m.def("posterior_prob_dep", &posterior_prob_dep, py::arg("log_bf"),
        "Posterior probability of dependence at equal prior odds.");

  m.def(
      "chi_square",
      [](const CountArray& table) {
        const auto r = chi_square(table_from(table));
        py::dict d;
        d["statistic"] = r.statistic;
        d["p_value"] = r.p_value;
        d["dof"] = r.dof;
        return d;
      },
      py::arg("table"), "Pearson chi-square test of independence.");

  m.def(
      "knn_mi",
      [](const DoubleArray& x, const DoubleArray& y, int k, const std::string& variant) {
        MiConfig c;
        c.k = k;
        if (variant == "counting")
          c.variant = MiVariant::Counting;
        else if (variant == "rectangle")
          c.variant = MiVariant::Rectangle;
        else
          throw InputError("variant must be 'counting' or 'rectangle'");
        return knn_mi(to_vector(x), to_vector(y), c);
      },
      py::arg("x"), py::arg("y"), py::arg("k") = 20, py::arg("variant") = "counting",
      "k-nearest-neighbour mutual information estimate in nats.");

  m.def(
      "dpm_fit",
      [](const DoubleArray& data, const std::string& prior, int n_burn, int n_save, int thin, std::uint64_t seed,
         std::optional<DoubleArray> eval_points) {
        if (data.ndim() != 1 && !(data.ndim() == 2 && data.shape(1) == 2))
          throw InputError("data must be a vector or an (n, 2) array");
        const int dim = data.ndim() == 1 ? 1 : 2;
        DpmConfig cfg;
        if (prior == "ctbf") {
          if (dim != 1) throw InputError("the ctbf prior is univariate");
          cfg = DpmConfig::ctbf_marginal();
        } else if (prior == "mixmod") {
          cfg = DpmConfig::mixmod(dim);
        } else {
          throw InputError("prior must be 'ctbf' or 'mixmod'");
        }
        const auto values = to_vector(data);
        std::vector<double> eval;
        if (eval_points) eval = to_vector(*eval_points);
        ChainOptions opt;
        opt.eval_points = eval;
        ChainResult r;
        {
          py::gil_scoped_release release;
          r = run_chain(values, cfg, McmcSettings{n_burn, n_save, thin}, RngStream(seed), opt);
        }
        const auto n = static_cast<py::ssize_t>(r.trace.n);
        const auto saved = static_cast<py::ssize_t>(r.trace.labels.size()) / std::max<py::ssize_t>(n, 1);
        py::array_t<std::int32_t> labels(std::vector<py::ssize_t>{saved, n}, r.trace.labels.data());
        py::array_t<double> density(std::vector<py::ssize_t>{static_cast<py::ssize_t>(r.predictive.density.size())},
                                    r.predictive.density.data());
        return py::make_tuple(labels, density);
      },
      py::arg("data"), py::arg("prior") = "mixmod", py::arg("n_burn") = 1000, py::arg("n_save") = 1800,
      py::arg("thin") = 5, py::arg("seed") = 0, py::arg("eval_points") = py::none(),
      "Runs a DPM Gibbs chain. Returns (saved labels [n_save, n], averaged predictive at eval_points).");

  m.def(
      "mixmod_ensemble",
      [](const DoubleArray& x, const DoubleArray& y, int n_burn, int n_save, int thin, double a0, double b0,
         double eta, std::uint64_t seed) {
        MixmodOptions o;
        o.mcmc = McmcSettings{n_burn, n_save, thin};
        o.ensemble.a0 = a0;
        o.ensemble.b0 = b0;
        o.ensemble.eta = eta;
        const auto vx = to_vector(x);
        const auto vy = to_vector(y);
        py::gil_scoped_release release;
        return mixmod_ensemble(vx, vy, o, RngStream(seed)).pi_hat;
      },
      py::arg("x"), py::arg("y"), py::arg("n_burn") = 1000, py::arg("n_save") = 1800, py::arg("thin") = 5,
      py::arg("a0") = 0.5, py::arg("b0") = 0.5, py::arg("eta") = 1e-4, py::arg("seed") = 0,
      "Posterior mean weight on the joint component of the dependence ensemble.");

  m.def(
      "screen",
      [](const DoubleArray& data, std::vector<std::string> names, const std::string& methods, std::uint64_t seed,
         int workers, int n_burn, int n_save, int thin, int min_rows, int k) {
        if (data.ndim() != 2) throw InputError("data must be an (n, p) array");
        const auto n = static_cast<std::size_t>(data.shape(0));
        const auto p = static_cast<std::size_t>(data.shape(1));
        if (names.empty())
          for (std::size_t c = 0; c < p; ++c) names.push_back("v" + std::to_string(c));
        if (names.size() != p) throw InputError("names must match the number of columns");
        Dataset d;
        d.names = names;
        for (std::size_t i = 0; i < n; ++i) d.row_ids.push_back(std::to_string(i + 1));
        d.columns.assign(p, std::vector<double>(n));
        d.missing.assign(p, std::vector<std::uint8_t>(n, 0));
        const double* v = data.data();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < p; ++c) {
            const double x = v[i * p + c];
            if (std::isnan(x)) d.missing[c][i] = 1;
            else if (!std::isfinite(x)) throw InputError("values must be finite or NaN");
            d.columns[c][i] = x;
          }
        }
        ScreenPlan plan;
        plan.methods = MethodSet::parse(methods);
        plan.seed = seed;
        plan.workers = workers;
        plan.mcmc = McmcSettings{n_burn, n_save, thin};
        plan.min_complete = min_rows;
        plan.mi.k = k;
        plan.validate();
        std::vector<PairResult> res;
        {
          py::gil_scoped_release release;
          res = screen(d, plan);
        }
        py::list out;
        for (const auto& r : res) out.append(pair_dict(r));
        return out;
      },
      py::arg("data"), py::arg("names") = std::vector<std::string>{}, py::arg("methods") = "ctbf",
      py::arg("seed") = 0, py::arg("workers") = 1, py::arg("n_burn") = 1000, py::arg("n_save") = 1800,
      py::arg("thin") = 5, py::arg("min_rows") = 10, py::arg("k") = 20,
      "Screens all column pairs of an (n, p) array; NaN marks missing values.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end. Returns (exit code, stdout, stderr).");
}
