#include "hyperkern/base_kernels.hpp"
#include "hyperkern/error.hpp"
#include "hyperkern/hyper_kernel.hpp"
#include "hyperkern/io.hpp"
#include "hyperkern/krr.hpp"
#include "hyperkern/learned_kernel.hpp"
#include "hyperkern/pipeline.hpp"
#include "hyperkern/scaling.hpp"
#include "hyperkern/svr_smo.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace hyperkern;

namespace {

// JSON crosses the boundary as text; the Python wrapper parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

KernelSpec base_kernel(const std::string& name, std::optional<double> param, const PointSet& X,
                       const std::optional<std::vector<int>>& labels) {
  if (name == "rbf") return GaussianRbf{param.value_or(1.0)};
  if (name == "tl1") return param ? Tl1{*param} : tl1_for_dimension(X.cols());
  if (name == "log") return LogKernel{param.value_or(1.0)};
  if (name == "ideal") {
    if (!labels) fail(ErrorKind::ConfigError, "the ideal kernel needs labels");
    return IdealKernel{*labels};
  }
  fail(ErrorKind::ConfigError, "unknown base kernel '" + name + "' (expected rbf, tl1, log or ideal)");
}

Hyperparams hyperparams(double sigma2, double sigma_h2, double reg, double epsilon, double kkt_tol) {
  return Hyperparams{sigma2, sigma_h2, reg, epsilon, kkt_tol};
}

std::optional<ScalingConfig> scaling_of(int clusters, Index landmarks, std::uint64_t seed) {
  if (clusters <= 1 && landmarks == 0) return std::nullopt;
  return ScalingConfig{clusters, landmarks, seed};
}

}  // namespace

PYBIND11_MODULE(_hyperkern, m) {
  m.doc() = "Kernel learning in hyper-RKHS (C++ core)";

  // Kept alive by the module attribute; the translator only borrows it.
  static PyObject* error_type = nullptr;
  error_type = py::exception<Error>(m, "HyperkernError").ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::enum_<Method>(m, "Method").value("KRR", Method::HyperKrr).value("SVR", Method::HyperSvr);

  m.def(
      "gram_matrix",
      [](const std::string& kernel, const PointSet& X, std::optional<double> param,
         std::optional<std::vector<int>> labels) { return gram_matrix(base_kernel(kernel, param, X, labels), X); },
      py::arg("kernel"), py::arg("X"), py::arg("param") = py::none(), py::arg("labels") = py::none(),
      "Gram matrix of a base kernel (rbf, tl1, log, ideal) on the rows of X.");

  m.def(
      "hyper_gram",
      [](const PointSet& X, double sigma2, double sigma_h2) {
        return assemble_hyper_gram(HyperKernelParams{sigma2, sigma_h2, static_cast<int>(X.cols())}, X).entries;
      },
      py::arg("X"), py::arg("sigma2") = 1.0, py::arg("sigma_h2") = 1.0,
      "Hyper-Gram over all m^2 ordered pairs of rows of X, row-major pair order.");

  m.def(
      "hyper_kernel",
      [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& a2, const Eigen::RowVectorXd& b,
         const Eigen::RowVectorXd& b2, double sigma2, double sigma_h2) {
        return eval_hyper_kernel(HyperKernelParams{sigma2, sigma_h2, static_cast<int>(a.size())}, a, a2, b, b2);
      },
      py::arg("a"), py::arg("a2"), py::arg("b"), py::arg("b2"), py::arg("sigma2") = 1.0, py::arg("sigma_h2") = 1.0);

  py::class_<LearnedKernel>(m, "LearnedKernel")
      .def("__call__", [](const LearnedKernel& k, const Eigen::RowVectorXd& x,
                          const Eigen::RowVectorXd& x2) { return k(x, x2); })
      .def("gram", [](const LearnedKernel& k, const PointSet& X) { return learned_gram(k, X).matrix; }, py::arg("X"))
      .def("cross_gram", &learned_cross_gram, py::arg("A"), py::arg("B"))
      .def("definiteness",
           [](const LearnedKernel& k, const PointSet& X) {
             const DefinitenessReport r = learned_gram(k, X).report;
             return py::dict(py::arg("min_eig") = r.min_eigenvalue, py::arg("max_eig") = r.max_eigenvalue,
                             py::arg("indefinite") = r.indefinite);
           },
           py::arg("X"))
      .def("save", [](const LearnedKernel& k, const std::filesystem::path& p) { save_model(p, k); }, py::arg("path"))
      .def("to_json", [](const LearnedKernel& k) { return dump(to_json(k)); })
      .def_property_readonly("bias", &LearnedKernel::bias)
      .def_property_readonly("points", [](const LearnedKernel& k) { return k.points(); })
      .def_property_readonly("sigma2", [](const LearnedKernel& k) { return k.params().sigma2; })
      .def_property_readonly("sigma_h2", [](const LearnedKernel& k) { return k.params().sigma_h2; })
      .def_property_readonly("coefficients", [](const LearnedKernel& k) {
        std::vector<std::tuple<Index, Index, double>> out;
        for (const auto& c : k.coefficients()) out.emplace_back(c.i, c.j, c.value);
        return out;
      });

  m.def("load_model", &load_model, py::arg("path"));
  m.def(
      "model_from_json", [](const std::string& text) { return learned_kernel_from_json(nlohmann::json::parse(text)); },
      py::arg("text"));

  m.def(
      "fit_extend",
      [](const PointSet& X, const Eigen::MatrixXd& Y, Method method, double sigma2, double sigma_h2, double reg,
         double epsilon, double kkt_tol, int clusters, Index landmarks, std::uint64_t seed) {
        py::gil_scoped_release release;
        return fit_extend(X, Y, method, hyperparams(sigma2, sigma_h2, reg, epsilon, kkt_tol),
                          scaling_of(clusters, landmarks, seed));
      },
      py::arg("X"), py::arg("Y"), py::arg("method") = Method::HyperKrr, py::arg("sigma2") = 1.0,
      py::arg("sigma_h2") = 1.0, py::arg("reg") = 1e-3, py::arg("epsilon") = 0.1, py::arg("kkt_tol") = 0.01,
      py::arg("clusters") = 1, py::arg("landmarks") = 0, py::arg("seed") = 0,
      "Learn a kernel function from the m x m matrix Y given on the rows of X. `reg` is lambda for KRR and C for SVR.");

  m.def(
      "heldout_pair_rmse", &heldout_pair_rmse, py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("inside"),
      "RMSE over ordered pairs with at least one endpoint outside `inside`.");

  m.def(
      "fit_krr",
      [](const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double lambda) {
        HyperGram g;
        g.entries = K;
        KrrConfig c;
        c.lambda = lambda;
        return fit_krr(g, y, c).coefficients.values;
      },
      py::arg("K"), py::arg("y"), py::arg("lam"), "Solve (K + lam I) beta = y; returns beta.");

  m.def(
      "fit_svr",
      [](const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double epsilon, double kkt_tol) {
        HyperGram g;
        g.entries = K;
        SvrConfig c;
        c.C = C;
        c.epsilon = epsilon;
        c.kkt_tol = kkt_tol;
        const SvrModel model = fit_svr(g, y, c);
        return py::dict(py::arg("beta") = model.beta.values, py::arg("bias") = model.bias,
                        py::arg("dual_objective") = model.dual_objective, py::arg("iterations") = model.iterations);
      },
      py::arg("K"), py::arg("y"), py::arg("C") = 1.0, py::arg("epsilon") = 0.1, py::arg("kkt_tol") = 1e-3,
      "SMO on the signed-coefficient SVR dual over a precomputed Gram.");

  m.def(
      "ingest_dataset",
      [](const std::filesystem::path& path, const std::string& format, bool labeled, bool standardize) {
        const Dataset ds = ingest_dataset(path, IngestOptions{dataset_format_from_string(format), labeled, standardize});
        return py::make_tuple(ds.X, ds.labels);
      },
      py::arg("path"), py::arg("format") = "csv", py::arg("labeled") = true, py::arg("standardize") = true,
      "Returns (X, labels or None).");

  m.def(
      "run_experiment",
      [](const PointSet& X, std::optional<std::vector<int>> labels, const Eigen::MatrixXd& Y, Method method,
         int cv_folds, std::uint64_t seed, std::optional<double> sigma_h2, std::optional<double> reg) {
        ExperimentConfig cfg;
        cfg.cv_folds = cv_folds;
        cfg.seed = seed;
        ExperimentOverrides ov;
        ov.sigma_h2 = sigma_h2;
        ov.reg = reg;
        ExperimentReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(X, labels, Y, method, cfg, ov);
        }
        return py::make_tuple(dump(to_json(rep, false)), rep.kernel);
      },
      py::arg("X"), py::arg("labels"), py::arg("Y"), py::arg("method") = Method::HyperKrr, py::arg("cv_folds") = 5,
      py::arg("seed") = 0, py::arg("sigma_h2") = py::none(), py::arg("reg") = py::none());

  m.def(
      "learning_rate_study",
      [](std::vector<Index> m_values, int trials, double noise, Method method, const std::string& target,
         std::uint64_t seed, Index eval_pairs) {
        RateStudyConfig cfg;
        cfg.m_values = std::move(m_values);
        cfg.trials = trials;
        cfg.noise_sigma = noise;
        cfg.method = method;
        if (target == "rbf")
          cfg.target = RateTarget::GaussianRbf;
        else if (target == "planted")
          cfg.target = RateTarget::Planted;
        else
          fail(ErrorKind::ConfigError, "unknown target '" + target + "' (expected rbf or planted)");
        cfg.seed = seed;
        cfg.eval_pairs = eval_pairs;
        py::gil_scoped_release release;
        return dump(to_json(learning_rate_study(cfg)));
      },
      py::arg("m_values"), py::arg("trials") = 10, py::arg("noise") = 0.1, py::arg("method") = Method::HyperKrr,
      py::arg("target") = "rbf", py::arg("seed") = 0, py::arg("eval_pairs") = 256);

  m.def("loglog_slope", &loglog_slope, py::arg("m_values"), py::arg("errors"));
}
