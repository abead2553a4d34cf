// Command-line driver: ingest data, learn a kernel, write JSON/CSV artifacts.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include "hyperkern/base_kernels.hpp"
#include "hyperkern/error.hpp"
#include "hyperkern/io.hpp"
#include "hyperkern/learned_kernel.hpp"
#include "hyperkern/parallel.hpp"
#include "hyperkern/pipeline.hpp"
#include "hyperkern/scaling.hpp"
#include "hyperkern/svm.hpp"
#include "hyperkern/svr_smo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperkern;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr double kDefaultLambda = 1e-3;
constexpr double kDefaultC = 1.0;

struct Settings {
  std::string method = "krr";
  // Unset means "default" for fixed fits and "tune by cross-validation" in extend.
  std::optional<double> lambda;
  std::optional<double> C;
  double epsilon = 0.1;
  double kkt_tol = 0.01;
  std::optional<double> sigma2;
  std::optional<double> sigma_h2;
  std::optional<double> svm_c;
  int clusters = 1;
  Index landmarks = 0;
  std::uint64_t seed = 0;
  bool standardize = true;
  std::string spectrum_fix = "clip";
  int threads = 0;
  std::string dataset;
  std::string format = "csv";
  bool labeled = true;
  std::string kernel;
  std::string base_kernel;
  std::optional<double> base_param;
  std::string solver = "auto";
  bool allow_zero_lambda = false;
  bool no_jitter = false;
  bool timings = false;
  bool trace = false;
  std::string model;
  // experiment
  int cv_folds = 5;
  std::vector<double> split{0.4, 0.4, 0.2};
  std::vector<double> sigma_h2_grid{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> reg_grid = log10_grid(-5, 5);
  std::vector<double> svm_c_grid = log10_grid(-2, 3);
  std::string scoring = "rmse";
  // rate study
  std::vector<Index> m_values{8, 16, 32, 64};
  int trials = 10;
  double noise_sigma = 0.1;
  std::string target = "rbf";
  int dim = 2;
  Index eval_pairs = 256;
};

template <class T>
void take(const json& doc, const char* key, T& dst) {
  if (doc.contains(key)) dst = doc.at(key).get<T>();
}

template <class T>
void take(const json& doc, const char* key, std::optional<T>& dst) {
  if (doc.contains(key)) dst = doc.at(key).get<T>();
}

void apply_config_file(const fs::path& path, Settings& s) {
  if (!fs::exists(path)) fail(ErrorKind::ConfigError, "config file '" + path.string() + "' does not exist");
  std::ifstream in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, "config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::ConfigError, "config file must hold a JSON object");
  static const std::set<std::string> known{
      "method",     "lambda",        "C",         "epsilon",      "kkt_tol",     "sigma2",
      "sigma_h2",   "svm_c",         "clusters",  "landmarks",    "seed",        "standardize",
      "spectrum_fix", "threads",     "dataset",   "format",       "labeled",     "kernel",
      "base_kernel", "base_param",   "solver",    "allow_zero_lambda", "no_jitter", "timings",
      "trace",      "model",         "cv_folds",  "split",        "sigma_h2_grid", "reg_grid",
      "svm_c_grid", "scoring",       "m_values",  "trials",       "noise_sigma", "target",
      "dim",        "eval_pairs"};
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
  try {
    take(doc, "method", s.method);
    take(doc, "lambda", s.lambda);
    take(doc, "C", s.C);
    take(doc, "epsilon", s.epsilon);
    take(doc, "kkt_tol", s.kkt_tol);
    take(doc, "sigma2", s.sigma2);
    take(doc, "sigma_h2", s.sigma_h2);
    take(doc, "svm_c", s.svm_c);
    take(doc, "clusters", s.clusters);
    take(doc, "landmarks", s.landmarks);
    take(doc, "seed", s.seed);
    take(doc, "standardize", s.standardize);
    take(doc, "spectrum_fix", s.spectrum_fix);
    take(doc, "threads", s.threads);
    take(doc, "dataset", s.dataset);
    take(doc, "format", s.format);
    take(doc, "labeled", s.labeled);
    take(doc, "kernel", s.kernel);
    take(doc, "base_kernel", s.base_kernel);
    take(doc, "base_param", s.base_param);
    take(doc, "solver", s.solver);
    take(doc, "allow_zero_lambda", s.allow_zero_lambda);
    take(doc, "no_jitter", s.no_jitter);
    take(doc, "timings", s.timings);
    take(doc, "trace", s.trace);
    take(doc, "model", s.model);
    take(doc, "cv_folds", s.cv_folds);
    take(doc, "split", s.split);
    take(doc, "sigma_h2_grid", s.sigma_h2_grid);
    take(doc, "reg_grid", s.reg_grid);
    take(doc, "svm_c_grid", s.svm_c_grid);
    take(doc, "scoring", s.scoring);
    take(doc, "m_values", s.m_values);
    take(doc, "trials", s.trials);
    take(doc, "noise_sigma", s.noise_sigma);
    take(doc, "target", s.target);
    take(doc, "dim", s.dim);
    take(doc, "eval_pairs", s.eval_pairs);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("config value has the wrong type: ") + e.what());
  }
}

// Command-line values are captured here and only applied when present, so
// that they take precedence over the config file.
struct Flags {
  std::string config;
  std::string output_dir = "hyperkern-out";
  std::optional<std::string> method, spectrum_fix, dataset, format, kernel, base_kernel, solver, model, scoring,
      target;
  std::optional<double> lambda, C, epsilon, kkt_tol, sigma2, sigma_h2, svm_c, base_param, noise_sigma;
  std::optional<int> clusters, threads, cv_folds, trials, dim;
  std::optional<Index> landmarks, eval_pairs;
  std::optional<std::uint64_t> seed;
  std::optional<bool> standardize;
  bool unlabeled = false, allow_zero_lambda = false, no_jitter = false, timings = false, trace = false;
  std::vector<Index> m_values;
};

template <class T>
void over(const std::optional<T>& flag, T& dst) {
  if (flag) dst = *flag;
}

template <class T>
void over(const std::optional<T>& flag, std::optional<T>& dst) {
  if (flag) dst = *flag;
}

Settings resolve(const Flags& f) {
  Settings s;
  if (!f.config.empty()) apply_config_file(f.config, s);
  over(f.method, s.method);
  over(f.spectrum_fix, s.spectrum_fix);
  over(f.dataset, s.dataset);
  over(f.format, s.format);
  over(f.kernel, s.kernel);
  over(f.base_kernel, s.base_kernel);
  over(f.solver, s.solver);
  over(f.model, s.model);
  over(f.scoring, s.scoring);
  over(f.target, s.target);
  over(f.lambda, s.lambda);
  over(f.C, s.C);
  over(f.epsilon, s.epsilon);
  over(f.kkt_tol, s.kkt_tol);
  over(f.sigma2, s.sigma2);
  over(f.sigma_h2, s.sigma_h2);
  over(f.svm_c, s.svm_c);
  over(f.base_param, s.base_param);
  over(f.noise_sigma, s.noise_sigma);
  over(f.clusters, s.clusters);
  over(f.threads, s.threads);
  over(f.cv_folds, s.cv_folds);
  over(f.trials, s.trials);
  over(f.dim, s.dim);
  over(f.landmarks, s.landmarks);
  over(f.eval_pairs, s.eval_pairs);
  over(f.seed, s.seed);
  over(f.standardize, s.standardize);
  if (f.unlabeled) s.labeled = false;
  if (f.allow_zero_lambda) s.allow_zero_lambda = true;
  if (f.no_jitter) s.no_jitter = true;
  if (f.timings) s.timings = true;
  if (f.trace) s.trace = true;
  if (!f.m_values.empty()) s.m_values = f.m_values;
  return s;
}

SpectrumFix spectrum_fix_of(const std::string& name) {
  if (name == "clip") return SpectrumFix::Clip;
  if (name == "none") return SpectrumFix::None;
  fail(ErrorKind::ConfigError, "unknown spectrum fix '" + name + "' (expected none or clip)");
}

KrrSolver solver_of(const std::string& name) {
  if (name == "auto") return KrrSolver::Auto;
  if (name == "direct") return KrrSolver::Direct;
  if (name == "cg") return KrrSolver::ConjugateGradient;
  fail(ErrorKind::ConfigError, "unknown KRR solver '" + name + "' (expected auto, direct or cg)");
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

class Output {
 public:
  explicit Output(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      fail(ErrorKind::ConfigError, "cannot create output directory '" + dir_.string() + "'");
  }

  // File names are fixed by the program; nothing is written outside dir_.
  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_json(const std::string& name, const json& doc) const {
    std::ofstream out(path(name));
    if (!out) fail(ErrorKind::ConfigError, "cannot write '" + path(name).string() + "'");
    out << doc.dump(2) << '\n';
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream out(path(name));
    if (!out) fail(ErrorKind::ConfigError, "cannot write '" + path(name).string() + "'");
    return out;
  }

 private:
  fs::path dir_;
};

Dataset load_dataset(const Settings& s) {
  if (s.dataset.empty()) fail(ErrorKind::ConfigError, "--dataset is required");
  if (!fs::exists(s.dataset)) fail(ErrorKind::ConfigError, "dataset '" + s.dataset + "' does not exist");
  IngestOptions opts;
  opts.format = dataset_format_from_string(s.format);
  opts.labeled = s.labeled;
  opts.standardize = s.standardize;
  return ingest_dataset(s.dataset, opts);
}

KernelSpec base_kernel_of(const Settings& s, const Dataset& ds) {
  const std::string& name = s.base_kernel;
  if (name == "rbf") return GaussianRbf{s.base_param.value_or(mean_feature_variance(ds.X))};
  if (name == "tl1") return s.base_param ? Tl1{*s.base_param} : tl1_for_dimension(ds.X.cols());
  if (name == "log") return LogKernel{s.base_param.value_or(1.0)};
  if (name == "ideal") {
    if (!ds.labels) fail(ErrorKind::ConfigError, "the ideal kernel needs a labeled dataset");
    return IdealKernel{*ds.labels};
  }
  fail(ErrorKind::ConfigError, "unknown base kernel '" + name + "' (expected rbf, tl1, log or ideal)");
}

// Given kernel matrix: from --kernel csv, else generated by --base-kernel.
std::optional<Eigen::MatrixXd> given_kernel(const Settings& s, const Dataset& ds, std::vector<std::string>& warnings,
                                            bool required) {
  if (!s.kernel.empty() && !s.base_kernel.empty())
    fail(ErrorKind::ConfigError, "--kernel and --base-kernel are mutually exclusive");
  if (!s.kernel.empty()) {
    if (!fs::exists(s.kernel)) fail(ErrorKind::ConfigError, "kernel file '" + s.kernel + "' does not exist");
    Eigen::MatrixXd K = ingest_kernel_matrix(s.kernel, &warnings);
    if (K.rows() != ds.X.rows())
      fail(ErrorKind::FormatError, "kernel matrix has " + std::to_string(K.rows()) + " rows but the dataset has " +
                                       std::to_string(ds.X.rows()) + " samples");
    return K;
  }
  if (!s.base_kernel.empty()) {
    const KernelSpec spec = base_kernel_of(s, ds);
    return std::holds_alternative<IdealKernel>(spec) ? gram_matrix(spec, PointSet{}) : gram_matrix(spec, ds.X);
  }
  if (required) fail(ErrorKind::ConfigError, "a given kernel is required: pass --kernel or --base-kernel");
  return std::nullopt;
}

std::optional<ScalingConfig> scaling_of(const Settings& s) {
  if (s.clusters <= 1 && s.landmarks == 0) return std::nullopt;
  ScalingConfig sc;
  sc.clusters = s.clusters;
  sc.landmarks = s.landmarks;
  sc.seed = s.seed;
  return sc;
}

Hyperparams hyperparams_of(const Settings& s, const PointSet& X, Method method) {
  Hyperparams hp;
  double var = mean_feature_variance(X);
  if (!(var > 0.0)) var = 1.0;
  hp.sigma2 = s.sigma2.value_or(var);
  hp.sigma_h2 = s.sigma_h2.value_or(hp.sigma2);
  hp.reg = method == Method::HyperKrr ? s.lambda.value_or(kDefaultLambda) : s.C.value_or(kDefaultC);
  hp.epsilon = s.epsilon;
  hp.kkt_tol = s.kkt_tol;
  return hp;
}

json definiteness_json(const DefinitenessReport& d) {
  return {{"min_eig", d.min_eigenvalue}, {"max_eig", d.max_eigenvalue}, {"indefinite", d.indefinite}};
}

json warnings_json(const std::vector<std::string>& w) { return w; }

void emit_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run_fit(const Settings& s, const Output& out) {
  std::vector<std::string> warnings;
  const Dataset ds = load_dataset(s);
  const Eigen::MatrixXd Y = *given_kernel(s, ds, warnings, true);
  emit_warnings(warnings);
  const Method method = method_from_string(s.method);
  const Hyperparams hp = hyperparams_of(s, ds.X, method);
  const HyperKernelParams params{hp.sigma2, hp.sigma_h2, static_cast<int>(ds.X.cols())};

  json report;
  report["command"] = "fit";
  report["method"] = to_string(method);
  report["hyperparams"] = {{"sigma2", hp.sigma2}, {"sigma_h2", hp.sigma_h2}, {"reg", hp.reg}};
  if (method == Method::HyperSvr) report["hyperparams"]["epsilon"] = hp.epsilon;

  std::optional<LearnedKernel> kernel;
  if (const auto scaling = scaling_of(s)) {
    std::optional<DecompositionDiagnostics> diag;
    kernel = fit_extend(ds.X, Y, method, hp, scaling, &diag);
    if (diag) report["scaling_diagnostics"] = to_json(*diag);
  } else {
    const HyperGram gram = assemble_hyper_gram(params, ds.X);
    const Eigen::VectorXd y = gather_responses(Y, gram.pairs);
    report["pairs"] = gram.size();
    if (method == Method::HyperKrr) {
      KrrConfig cfg;
      cfg.lambda = s.lambda.value_or(kDefaultLambda);
      cfg.solver = solver_of(s.solver);
      cfg.allow_zero_lambda = s.allow_zero_lambda;
      if (s.no_jitter) cfg.max_jitter_retries = 0;
      const KrrFit fit = fit_krr(gram, y, cfg);
      report["solver"] = fit.solver_used == KrrSolver::Direct ? "direct" : "cg";
      report["jitter_applied"] = fit.jitter_applied;
      report["relative_residual"] = fit.relative_residual;
      kernel = LearnedKernel::from_fit(ds.X, fit.coefficients, 0.0, params);
    } else {
      SvrConfig cfg;
      cfg.C = s.C.value_or(kDefaultC);
      cfg.epsilon = s.epsilon;
      cfg.kkt_tol = s.kkt_tol;
      cfg.record_trace = s.trace;
      const SvrModel model = fit_svr(gram, y, cfg);
      report["iterations"] = model.iterations;
      report["dual_objective"] = model.dual_objective;
      report["support_pairs"] = model.support_pairs;
      report["worst_violation"] = model.worst_violation;
      if (s.trace) {
        auto trace = out.open("smo_trace.csv");
        write_trace_csv(trace, model.trace);
      }
      kernel = LearnedKernel::from_fit(ds.X, model.beta, model.bias, params);
    }
  }
  const LearnedGram g = learned_gram(*kernel, ds.X);
  Eigen::VectorXd pred = Eigen::Map<const Eigen::VectorXd>(g.matrix.data(), g.matrix.size());
  Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(Y.data(), Y.size());
  report["training_rmse"] = rmse(pred, truth);
  report["definiteness"] = definiteness_json(g.report);
  report["warnings"] = warnings_json(warnings);
  report["timestamp"] = timestamp();
  save_model(out.path("model.json"), *kernel);
  out.write_json("report.json", report);
  return 0;
}

ExperimentConfig experiment_config_of(const Settings& s) {
  ExperimentConfig cfg;
  if (s.split.size() != 3) fail(ErrorKind::ConfigError, "split must have three fractions");
  cfg.split = {s.split[0], s.split[1], s.split[2]};
  cfg.cv_folds = s.cv_folds;
  cfg.sigma_h2_grid = s.sigma_h2_grid;
  cfg.reg_grid = s.reg_grid;
  cfg.svm_c_grid = s.svm_c_grid;
  if (s.scoring == "rmse")
    cfg.scoring = CvScoring::Rmse;
  else if (s.scoring == "accuracy")
    cfg.scoring = CvScoring::Accuracy;
  else
    fail(ErrorKind::ConfigError, "unknown scoring '" + s.scoring + "' (expected rmse or accuracy)");
  cfg.spectrum_fix = spectrum_fix_of(s.spectrum_fix);
  cfg.epsilon = s.epsilon;
  cfg.kkt_tol = s.kkt_tol;
  cfg.seed = s.seed;
  cfg.trials = s.trials;
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
  return cfg;
}

int run_extend(const Settings& s, const Output& out) {
  std::vector<std::string> warnings;
  const Dataset ds = load_dataset(s);
  const Eigen::MatrixXd Y = *given_kernel(s, ds, warnings, true);
  emit_warnings(warnings);
  const Method method = method_from_string(s.method);
  const ExperimentConfig cfg = experiment_config_of(s);

  ExperimentOverrides ov;
  ov.sigma_h2 = s.sigma_h2;
  ov.reg = method == Method::HyperKrr ? s.lambda : s.C;
  ov.svm_c = s.svm_c;
  ov.scaling = scaling_of(s);

  const ExperimentReport rep = run_experiment(ds.X, ds.labels, Y, method, cfg, ov);
  for (const auto& w : rep.split.warnings) std::cerr << "warning: " << w << '\n';
  json doc = to_json(rep, s.timings);
  doc["command"] = "extend";
  doc["input_warnings"] = warnings_json(warnings);
  doc["timestamp"] = timestamp();
  save_model(out.path("model.json"), *rep.kernel);
  out.write_json("report.json", doc);
  auto csv = out.open("cv_scores.csv");
  write_cv_csv(csv, rep.cv_table);
  return 0;
}

int run_eval(const Settings& s, const Output& out) {
  if (s.model.empty()) fail(ErrorKind::ConfigError, "--model is required");
  if (!fs::exists(s.model)) fail(ErrorKind::ConfigError, "model file '" + s.model + "' does not exist");
  const LearnedKernel kernel = load_model(s.model);
  std::vector<std::string> warnings;
  const Dataset ds = load_dataset(s);
  if (ds.X.cols() != kernel.dim())
    fail(ErrorKind::FormatError, "dataset has " + std::to_string(ds.X.cols()) + " features but the model expects " +
                                     std::to_string(kernel.dim()));
  const auto Y = given_kernel(s, ds, warnings, false);
  emit_warnings(warnings);

  json report;
  report["command"] = "eval";
  const LearnedGram g = learned_gram(kernel, ds.X);
  report["definiteness"] = definiteness_json(g.report);
  if (Y) {
    Eigen::VectorXd pred = Eigen::Map<const Eigen::VectorXd>(g.matrix.data(), g.matrix.size());
    Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(Y->data(), Y->size());
    report["rmse_all_pairs"] = rmse(pred, truth);
  } else {
    report["rmse_all_pairs"] = nullptr;
  }
  report["accuracy_train"] = nullptr;
  report["accuracy_unlabeled"] = nullptr;
  report["accuracy_test"] = nullptr;
  if (ds.labels && std::set<int>(ds.labels->begin(), ds.labels->end()).size() >= 2) {
    const ExperimentConfig cfg = experiment_config_of(s);
    const DatasetSplit split = split_dataset(ds.X.rows(), ds.labels, cfg.split, s.seed, cfg.cv_folds);
    auto rows = [&](const std::vector<Index>& idx) {
      PointSet P(static_cast<Index>(idx.size()), ds.X.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) P.row(static_cast<Index>(r)) = ds.X.row(idx[r]);
      return P;
    };
    auto labs = [&](const std::vector<Index>& idx) {
      std::vector<int> out_labels;
      for (Index k : idx) out_labels.push_back((*ds.labels)[k]);
      return out_labels;
    };
    const PointSet Xl = rows(split.labeled);
    const std::vector<int> yl = labs(split.labeled);
    if (std::set<int>(yl.begin(), yl.end()).size() >= 2) {
      SvmConfig sc;
      sc.C = s.svm_c.value_or(1.0);
      sc.spectrum_fix = cfg.spectrum_fix;
      const Eigen::MatrixXd gl = learned_gram(kernel, Xl).matrix;
      const OneVsRestSvm svm(gl, yl, sc);
      report["accuracy_train"] = svm_accuracy(svm, gl, yl);
      report["accuracy_unlabeled"] =
          svm_accuracy(svm, learned_cross_gram(kernel, rows(split.unlabeled), Xl), labs(split.unlabeled));
      report["accuracy_test"] = svm_accuracy(svm, learned_cross_gram(kernel, rows(split.test), Xl), labs(split.test));
      report["svm_c"] = sc.C;
    }
  }
  report["warnings"] = warnings_json(warnings);
  report["timestamp"] = timestamp();
  out.write_json("eval_report.json", report);
  return 0;
}

int run_rate_study(const Settings& s, const Output& out) {
  RateStudyConfig cfg;
  cfg.m_values = s.m_values;
  cfg.trials = s.trials;
  cfg.noise_sigma = s.noise_sigma;
  cfg.method = method_from_string(s.method);
  cfg.hyper.sigma2 = s.sigma2.value_or(1.0);
  cfg.hyper.sigma_h2 = s.sigma_h2.value_or(1.0);
  cfg.hyper.reg = cfg.method == Method::HyperKrr ? s.lambda.value_or(kDefaultLambda) : s.C.value_or(kDefaultC);
  cfg.hyper.epsilon = s.epsilon;
  cfg.hyper.kkt_tol = s.kkt_tol;
  if (s.target == "rbf")
    cfg.target = RateTarget::GaussianRbf;
  else if (s.target == "planted")
    cfg.target = RateTarget::Planted;
  else
    fail(ErrorKind::ConfigError, "unknown rate-study target '" + s.target + "' (expected rbf or planted)");
  cfg.dim = s.dim;
  cfg.eval_pairs = s.eval_pairs;
  cfg.seed = s.seed;

  const RateStudyReport rep = learning_rate_study(cfg);
  json doc = to_json(rep);
  doc["command"] = "rate-study";
  doc["timestamp"] = timestamp();
  out.write_json("rate_study.json", doc);
  auto csv = out.open("rate_study.csv");
  write_rate_csv(csv, rep);
  if (!rep.complete) {
    std::cerr << "error: rate study aborted: " << rep.failure << '\n';
    return kExitNumerical;
  }
  return 0;
}

int run_decompose_demo(const Settings& s, const Output& out) {
  std::vector<std::string> warnings;
  const Dataset ds = load_dataset(s);
  const Eigen::MatrixXd Y = *given_kernel(s, ds, warnings, true);
  emit_warnings(warnings);
  const Method method = method_from_string(s.method);
  const Hyperparams hp = hyperparams_of(s, ds.X, method);
  const HyperKernelParams params{hp.sigma2, hp.sigma_h2, static_cast<int>(ds.X.cols())};
  ScalingConfig sc;
  sc.clusters = s.clusters;
  sc.landmarks = s.landmarks;
  sc.seed = s.seed;
  KrrConfig krr;
  krr.lambda = s.lambda.value_or(kDefaultLambda);
  SvrConfig svr;
  svr.C = s.C.value_or(kDefaultC);
  svr.epsilon = s.epsilon;
  svr.kkt_tol = s.kkt_tol;
  const BaseSolver base = method == Method::HyperKrr ? BaseSolver{krr} : BaseSolver{svr};
  const DecomposedFit fit = fit_decomposed(ds.X, Y, base, sc, params);

  json doc;
  doc["command"] = "decompose-demo";
  doc["method"] = to_string(method);
  doc["diagnostics"] = fit.diagnostics ? to_json(*fit.diagnostics) : json(nullptr);
  std::vector<int> sizes(static_cast<std::size_t>(fit.plan.clusters()), 0);
  for (int c : fit.plan.assignment) ++sizes[c];
  doc["cluster_sizes"] = sizes;
  doc["cluster_bias"] = fit.cluster_bias;
  doc["pairs"] = fit.coefficients.pairs.size();
  doc["landmarks"] = fit.restriction.landmarks;
  doc["warnings"] = warnings_json(warnings);
  doc["timestamp"] = timestamp();
  out.write_json("decomposition.json", doc);
  save_model(out.path("model.json"), fit.kernel);
  return 0;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalFailure:
    case ErrorKind::ConvergenceFailure:
    case ErrorKind::PipelineFailure:
    case ErrorKind::ResourceLimit:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  cmd->add_option("--output-dir", f.output_dir, "directory receiving every artifact")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--threads", f.threads, "worker thread cap (0 = runtime default)");
  cmd->add_option("--method", f.method, "krr or svr");
  cmd->add_option("--lambda", f.lambda, "KRR regularization");
  cmd->add_option("--C", f.C, "SVR box constraint");
  cmd->add_option("--epsilon", f.epsilon, "SVR tube half-width");
  cmd->add_option("--kkt-tol", f.kkt_tol, "SVR KKT tolerance");
  cmd->add_option("--sigma2", f.sigma2, "point-kernel width (default: mean feature variance)");
  cmd->add_option("--sigma-h2", f.sigma_h2, "hyper-kernel width");
}

void add_data(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "dataset file");
  cmd->add_option("--format", f.format, "csv or libsvm-sparse");
  cmd->add_flag("--unlabeled", f.unlabeled, "csv has no label column");
  cmd->add_flag("--standardize,!--no-standardize", f.standardize, "per-column standardization (default on)");
  cmd->add_option("--kernel", f.kernel, "given kernel matrix csv");
  cmd->add_option("--base-kernel", f.base_kernel, "generate the given kernel: rbf, tl1, log or ideal");
  cmd->add_option("--base-param", f.base_param, "rbf sigma2, tl1 tau or log sigma");
}

void add_scaling(CLI::App* cmd, Flags& f) {
  cmd->add_option("--clusters", f.clusters, "number of k-means clusters v");
  cmd->add_option("--landmarks", f.landmarks, "number of Nystrom landmarks u (0 = all)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn general kernels from a given kernel matrix in hyper-RKHS"};
  app.require_subcommand(1);
  Flags f;

  auto* fit = app.add_subcommand("fit", "fit on every point with fixed hyperparameters");
  add_common(fit, f);
  add_data(fit, f);
  add_scaling(fit, f);
  fit->add_option("--solver", f.solver, "KRR solver: auto, direct or cg");
  fit->add_flag("--allow-zero-lambda", f.allow_zero_lambda, "accept lambda = 0");
  fit->add_flag("--no-jitter", f.no_jitter, "disable diagonal jitter retries");
  fit->add_flag("--trace", f.trace, "write the SVR SMO trace CSV");

  auto* extend = app.add_subcommand("extend", "split, cross-validate, fit and score out-of-sample pairs");
  add_common(extend, f);
  add_data(extend, f);
  add_scaling(extend, f);
  extend->add_option("--svm-c", f.svm_c, "downstream SVM C (default: tuned)");
  extend->add_option("--spectrum-fix", f.spectrum_fix, "none or clip");
  extend->add_option("--cv-folds", f.cv_folds, "cross-validation folds");
  extend->add_option("--scoring", f.scoring, "rmse or accuracy");
  extend->add_flag("--timings", f.timings, "include wall-clock timings in the report");

  auto* eval = app.add_subcommand("eval", "score a saved model on a dataset");
  add_common(eval, f);
  add_data(eval, f);
  eval->add_option("--model", f.model, "model JSON");
  eval->add_option("--svm-c", f.svm_c, "downstream SVM C");
  eval->add_option("--spectrum-fix", f.spectrum_fix, "none or clip");

  auto* rate = app.add_subcommand("rate-study", "empirical learning-rate study");
  add_common(rate, f);
  rate->add_option("--m-values", f.m_values, "increasing sample sizes");
  rate->add_option("--trials", f.trials, "trials per sample size");
  rate->add_option("--noise", f.noise_sigma, "noise standard deviation");
  rate->add_option("--target", f.target, "rbf or planted");
  rate->add_option("--dim", f.dim, "input dimension");
  rate->add_option("--eval-pairs", f.eval_pairs, "fresh evaluation pairs per trial");

  auto* demo = app.add_subcommand("decompose-demo", "clustered/landmark solve with diagnostics");
  add_common(demo, f);
  add_data(demo, f);
  add_scaling(demo, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const Settings s = resolve(f);
    if (s.threads < 0) fail(ErrorKind::ConfigError, "--threads must be nonnegative");
    set_max_threads(s.threads);
    const Output out(f.output_dir);
    if (*fit) return run_fit(s, out);
    if (*extend) return run_extend(s, out);
    if (*eval) return run_eval(s, out);
    if (*rate) return run_rate_study(s, out);
    return run_decompose_demo(s, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: FormatError: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
