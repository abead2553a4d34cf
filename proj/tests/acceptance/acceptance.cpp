// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "hyperkern/base_kernels.hpp"
#include "hyperkern/error.hpp"
#include "hyperkern/hyper_kernel.hpp"
#include "hyperkern/io.hpp"
#include "hyperkern/krr.hpp"
#include "hyperkern/learned_kernel.hpp"
#include "hyperkern/pipeline.hpp"
#include "hyperkern/scaling.hpp"
#include "hyperkern/svr_smo.hpp"
#include "support/oracles.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hyperkern;
namespace fs = std::filesystem;

namespace {

const std::string kData = HYPERKERN_DATA_DIR;
const std::string kCli = HYPERKERN_CLI_PATH;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PointSet standardized(Index m, Index d, std::uint64_t seed) {
  PointSet X = oracle::random_points(m, d, seed);
  standardize_columns(X);
  return X;
}

HyperGram raw_gram(const Eigen::MatrixXd& K) {
  HyperGram g;
  g.entries = K;
  return g;
}

std::vector<Index> first_n(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

// 1. SMO against the projected-gradient QP oracle.
void smo_vs_oracle(Outcome& out) {
  const auto t0 = Clock::now();
  double worst_obj = 0.0;
  double worst_beta = 0.0;
  for (std::uint64_t inst = 0; inst < 25; ++inst) {
    const Index m = inst % 2 == 0 ? 2 : 3;
    const Index n = m * m;
    Eigen::MatrixXd K;
    if (inst < 13) {
      K = oracle::random_pd(n, 1000 + inst);
    } else {
      // Actual hyper-Gram over m random points; a small ridge makes the
      // minimiser unique so that beta can be compared elementwise.
      const PointSet X = oracle::random_points(m, 2, 2000 + inst, 0.7);
      K = oracle::hyper_gram(1.0, 1.0, X, oracle::all_pairs(m));
      K.diagonal().array() += 0.05 * K.diagonal().mean();
    }
    const Eigen::VectorXd y = oracle::random_vector(n, 3000 + inst, 0.1);
    SvrConfig c;
    c.C = 0.2 + 0.3 * static_cast<double>(inst % 5);
    c.epsilon = 0.01;
    c.kkt_tol = 1e-9;
    const SvrModel model = fit_svr(raw_gram(K), y, c);
    const oracle::SvrSolution ref = oracle::svr_dual_oracle(K, y, c.C, c.epsilon);
    worst_obj = std::max(worst_obj, std::abs(model.dual_objective - ref.objective));
    worst_beta = std::max(worst_beta, (model.beta.values - ref.beta).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  out.detail << "max |dobj| = " << worst_obj << ", max |dbeta| = " << worst_beta << ", " << secs << " s";
  out.require(worst_obj <= 1e-6, "objective within 1e-6");
  out.require(worst_beta <= 1e-4, "beta within 1e-4");
  out.require(secs < 30.0, "runtime < 30 s");
}

// 2. KRR residuals and planted recovery.
void krr_correctness(Outcome& out) {
  double worst_residual = 0.0;
  int solves = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index m = 3 + static_cast<Index>(seed % 8);
    const PointSet X = oracle::random_points(m, 1 + static_cast<Index>(seed % 3), 4000 + seed);
    const HyperKernelParams params{1.0, 0.5 + 0.25 * static_cast<double>(seed % 4), static_cast<int>(X.cols())};
    const HyperGram g = assemble_hyper_gram(params, X);
    const Eigen::VectorXd y = oracle::random_vector(g.size(), 5000 + seed);
    for (double lambda : {1e-6, 1e-3, 1.0}) {
      KrrConfig c;
      c.lambda = lambda;
      c.solver = KrrSolver::Direct;
      const KrrFit fit = fit_krr(g, y, c);
      // Residual recomputed from the returned coefficients, not the solver's own figure.
      const Eigen::MatrixXd A = g.entries + (lambda + fit.jitter_applied) * Eigen::MatrixXd::Identity(g.size(), g.size());
      const double res = (A * fit.coefficients.values - y).norm() / std::max(1.0, y.norm());
      worst_residual = std::max(worst_residual, res);
      ++solves;
    }
  }
  double worst_planted = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointSet X = oracle::random_points(8, 2, 6000 + seed);
    const HyperKernelParams params{1.0, 1.0, 2};
    const HyperGram g = assemble_hyper_gram(params, X);
    const Eigen::VectorXd beta_star = oracle::random_vector(g.size(), 7000 + seed);
    const Eigen::MatrixXd K = oracle::hyper_gram(1.0, 1.0, X, oracle::all_pairs(8));
    const Eigen::VectorXd y = K * beta_star;
    KrrConfig c;
    c.lambda = 1e-10;
    c.solver = KrrSolver::Direct;
    const KrrFit fit = fit_krr(g, y, c);
    worst_planted = std::max(worst_planted, (K * fit.coefficients.values - y).cwiseAbs().maxCoeff());
  }
  out.detail << solves << " direct solves, max residual = " << worst_residual
             << ", planted max |pred - y| = " << worst_planted;
  out.require(worst_residual <= 1e-8, "residual <= 1e-8");
  out.require(worst_planted <= 1e-6, "planted predictions within 1e-6");
}

// 3. Hyper-Gram is PSD and swap-symmetric.
void hyper_kernel_validity(Outcome& out) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> md(2, 10);
  std::uniform_int_distribution<int> dd(1, 5);
  std::uniform_real_distribution<double> wd(0.3, 3.0);
  double worst_ratio = 0.0;
  double worst_sym = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index m = md(rng);
    const Index d = dd(rng);
    const double s2 = wd(rng);
    const double sh2 = wd(rng);
    const PointSet X = oracle::random_points(m, d, 8000 + static_cast<std::uint64_t>(inst));
    const HyperGram g = assemble_hyper_gram({s2, sh2, static_cast<int>(d)}, X);
    const Eigen::MatrixXd K = 0.5 * (g.entries + g.entries.transpose());
    const double lmax = oracle::max_eigenvalue(K);
    const double lmin = oracle::min_eigenvalue(K);
    worst_ratio = std::min(worst_ratio, lmin / lmax);
    for (Index p = 0; p < g.size(); ++p) {
      const auto [i, j] = g.pairs[static_cast<std::size_t>(p)];
      const Index swapped = j * m + i;  // 0-based row-major position of (j, i)
      for (Index q = 0; q < g.size(); ++q) {
        const double scale = std::max(std::abs(g.entries(p, q)), std::numeric_limits<double>::min());
        worst_sym = std::max(worst_sym, std::abs(g.entries(p, q) - g.entries(swapped, q)) / scale);
        worst_sym = std::max(worst_sym, std::abs(g.entries(p, q) - g.entries(q, p)) / scale);
      }
    }
  }
  out.detail << "min lambda_min/lambda_max = " << worst_ratio << ", max relative swap asymmetry = " << worst_sym;
  out.require(worst_ratio >= -1e-8, "min eigenvalue >= -1e-8 max eigenvalue");
  out.require(worst_sym <= 1e-12, "symmetry identities to 1e-12");
}

// Q(pi) recomputed from its definition over the pair groups.
double cross_mass_oracle(const Eigen::MatrixXd& K, const std::vector<int>& groups) {
  double q = 0.0;
  for (Index a = 0; a < K.rows(); ++a)
    for (Index b = 0; b < K.cols(); ++b)
      if (groups[a] != groups[b]) q += std::abs(K(a, b));
  return q;
}

// 4. Decomposition error bound.
void decomposition_bound_check(Outcome& out) {
  int held = 0;
  double worst_gap_ratio = 0.0;
  double worst_q_dev = 0.0;
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    const Index m = 8 + static_cast<Index>(inst % 3);
    const PointSet X = oracle::random_points(m, 2, 9000 + inst);
    const Eigen::MatrixXd Y = gram_matrix(GaussianRbf{1.0}, X);
    const HyperKernelParams params{1.0, 1.0, 2};
    SvrConfig svr;
    svr.C = 1.0;
    svr.epsilon = 0.05;
    svr.kkt_tol = 1e-6;
    const DecomposedFit fit = fit_decomposed(X, Y, svr, ScalingConfig{2, 0, inst}, params);
    if (!fit.diagnostics || !fit.diagnostics->bound || !fit.diagnostics->observed_gap) {
      out.require(false, "diagnostics missing");
      return;
    }
    const auto& dg = *fit.diagnostics;
    const HyperGram g = assemble_hyper_gram(params, X);
    const double q = cross_mass_oracle(g.entries, fit.pair_clusters);
    worst_q_dev = std::max(worst_q_dev, std::abs(q - dg.q_pi) / std::max(1e-300, q));
    const double sigma = oracle::min_eigenvalue(0.5 * (g.entries + g.entries.transpose())) + dg.jitter;
    const double bound = sigma > 0.0 ? svr.C * svr.C * q / (2.0 * sigma) : std::numeric_limits<double>::infinity();
    if (*dg.observed_gap <= bound) ++held;
    worst_gap_ratio = std::max(worst_gap_ratio, *dg.observed_gap / bound);
  }
  const PointSet X1 = oracle::random_points(9, 2, 9100);
  SvrConfig svr;
  svr.C = 1.0;
  svr.epsilon = 0.05;
  const DecomposedFit one =
      fit_decomposed(X1, gram_matrix(GaussianRbf{1.0}, X1), svr, ScalingConfig{1, 0, 1}, HyperKernelParams{1.0, 1.0, 2});
  const double gap1 = one.diagnostics && one.diagnostics->observed_gap ? *one.diagnostics->observed_gap : 1.0;
  out.detail << held << "/10 instances satisfy the bound (max gap/bound = " << worst_gap_ratio
             << ", Q(pi) rel. deviation " << worst_q_dev << "); v=1 gap = " << gap1;
  out.require(held == 10, "bound holds on every instance");
  out.require(worst_q_dev <= 1e-12, "Q(pi) matches the definition");
  out.require(gap1 <= 1e-10, "v=1 gap <= 1e-10");
}

// 5. Nystrom sanity.
void nystrom_sanity(Outcome& out) {
  double worst_exact = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Index m = 6 + static_cast<Index>(seed);
    const PointSet X = oracle::random_points(m, 2, 9500 + seed);
    const Eigen::MatrixXd Y = gram_matrix(GaussianRbf{1.0}, X);
    const HyperKernelParams params{1.0, 1.0, 2};
    KrrConfig krr;
    krr.lambda = 1e-3;
    const DecomposedFit fit = fit_decomposed(X, Y, krr, ScalingConfig{1, m, seed}, params);
    const HyperGram g = assemble_hyper_gram(params, X);
    const KrrFit full = fit_krr(g, gather_responses(Y, g.pairs), krr);
    if (fit.coefficients.pairs != g.pairs) {
      out.require(false, "u = m keeps every pair");
      return;
    }
    worst_exact = std::max(worst_exact, (fit.coefficients.values - full.coefficients.values).cwiseAbs().maxCoeff());
  }

  const Dataset ds = ingest_dataset(kData + "/two_moons.csv");
  const Eigen::MatrixXd Y = gram_matrix(GaussianRbf{1.0}, ds.X);
  const std::vector<Index> labeled = first_n(16);
  const PointSet Xl = ds.X.topRows(16);
  ExperimentConfig cfg;
  cfg.cv_folds = 4;
  const Hyperparams hp = cross_validate(Xl, Y.topLeftCorner(16, 16), std::nullopt, Method::HyperKrr, cfg).best;
  const double full_rmse = heldout_pair_rmse(fit_on_subset(ds.X, Y, labeled, Method::HyperKrr, hp, std::nullopt),
                                             ds.X, Y, labeled);
  std::vector<double> half;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScalingConfig sc{1, 8, seed};
    half.push_back(heldout_pair_rmse(fit_on_subset(ds.X, Y, labeled, Method::HyperKrr, hp, sc), ds.X, Y, labeled));
  }
  const double med = median(half);
  out.detail << "u=m max |dbeta| = " << worst_exact << "; fixture held-out RMSE full = " << full_rmse
             << ", median u=m/2 = " << med;
  out.require(worst_exact <= 1e-10, "u = m reproduces the full fit");
  out.require(med <= 2.0 * full_rmse, "median RMSE at u = m/2 within 2x");
}

// 6. Out-of-sample quality on an RBF target.
void out_of_sample_quality(Outcome& out) {
  const auto t0 = Clock::now();
  const PointSet X = standardized(20, 2, 11);
  const Eigen::MatrixXd Y = gram_matrix(GaussianRbf{1.0}, X);
  const std::vector<Index> train = first_n(16);
  const PointSet Xt = X.topRows(16);
  ExperimentConfig cfg;
  cfg.cv_folds = 4;
  for (Method method : {Method::HyperKrr, Method::HyperSvr}) {
    const Hyperparams hp = cross_validate(Xt, Y.topLeftCorner(16, 16), std::nullopt, method, cfg).best;
    const double r = heldout_pair_rmse(fit_on_subset(X, Y, train, method, hp, std::nullopt), X, Y, train);
    out.detail << to_string(method) << " RMSE = " << r << " (sigma_h2 " << hp.sigma_h2 << ", reg " << hp.reg << "); ";
    out.require(r <= 0.15, std::string(to_string(method)) + " RMSE <= 0.15");
  }
  const double secs = seconds_since(t0);
  out.detail << secs << " s";
  out.require(secs < 60.0, "runtime < 60 s");
}

// 7. Indefinite kernels are reachable; the ideal kernel separates.
// At m = 40 in 2-D every sampled TL1 Gram is itself indefinite. The learned
// kernel follows it once lambda is small (sigma_h2 still tuned by CV); with
// CV-tuned lambda the fit is smooth enough to stay PSD, which is reported too.
void indefinite_capability(Outcome& out) {
  int indefinite = 0;
  int indefinite_tuned = 0;
  int target_indefinite = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointSet X = standardized(40, 2, 100 + seed);
    const Eigen::MatrixXd Y = gram_matrix(tl1_for_dimension(2), X);
    if (oracle::min_eigenvalue(Y) < -1e-6) ++target_indefinite;
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.cv_folds = 4;
    ExperimentOverrides low;
    low.reg = 1e-8;
    const ExperimentReport rep = run_experiment(X, std::nullopt, Y, Method::HyperKrr, cfg, low);
    lowest = std::min(lowest, rep.definiteness.min_eigenvalue);
    if (rep.definiteness.min_eigenvalue < -1e-6) ++indefinite;
    if (run_experiment(X, std::nullopt, Y, Method::HyperKrr, cfg).definiteness.min_eigenvalue < -1e-6)
      ++indefinite_tuned;
  }
  const Dataset ds = ingest_dataset(kData + "/two_moons.csv");
  const Eigen::MatrixXd ideal = gram_matrix(IdealKernel{*ds.labels}, PointSet{});
  double worst_acc = 1.0;
  for (Method method : {Method::HyperKrr, Method::HyperSvr}) {
    const ExperimentReport rep = run_experiment(ds.X, ds.labels, ideal, method, ExperimentConfig{});
    worst_acc = std::min(worst_acc, rep.accuracy_train.value_or(0.0));
  }
  out.detail << target_indefinite << "/10 TL1 targets indefinite; " << indefinite
             << "/10 learned test Grams indefinite at lambda 1e-8 (lowest min eig " << lowest << "), "
             << indefinite_tuned << "/10 with CV-tuned lambda; ideal-kernel training accuracy = " << worst_acc;
  out.require(indefinite >= 1, "at least one indefinite learned kernel");
  out.require(worst_acc == 1.0, "100% training accuracy");
}

bool non_increasing_steps(const std::vector<double>& med, int& steps) {
  steps = 0;
  for (std::size_t k = 1; k < med.size(); ++k)
    if (med[k] <= med[k - 1]) ++steps;
  return steps == static_cast<int>(med.size()) - 1;
}

// 8. Empirical learning rate.
void learning_rate(Outcome& out) {
  const auto t0 = Clock::now();
  RateStudyConfig cfg;
  cfg.m_values = {8, 16, 32, 64};
  cfg.trials = 10;
  cfg.noise_sigma = 0.1;
  const RateStudyReport noisy = learning_rate_study(cfg);
  int steps = 0;
  non_increasing_steps(noisy.median_errors, steps);

  RateStudyConfig planted = cfg;
  planted.target = RateTarget::Planted;
  planted.noise_sigma = 0.0;
  planted.hyper.reg = 1e-10;
  const RateStudyReport clean = learning_rate_study(planted);
  const double clean_final = clean.median_errors.empty() ? 1.0 : clean.median_errors.back();
  const double secs = seconds_since(t0);

  out.detail << "medians";
  for (double e : noisy.median_errors) out.detail << ' ' << e;
  out.detail << ", slope " << noisy.loglog_slope << ", " << steps << "/3 non-increasing; planted noiseless median "
             << clean_final << "; " << secs << " s";
  out.require(noisy.complete && clean.complete, "studies complete");
  out.require(noisy.loglog_slope < 0.0, "slope < 0");
  out.require(steps == 3, "3 of 3 steps non-increasing");
  out.require(clean_final <= 1e-4, "planted noiseless median <= 1e-4");
  out.require(secs < 600.0, "runtime < 10 min");
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_timestamp(const fs::path& p) {
  nlohmann::json j = nlohmann::json::parse(slurp(p));
  j.erase("timestamp");
  return j.dump();
}

// 9. Determinism and model round trip.
void plumbing(Outcome& out) {
  const fs::path root = fs::temp_directory_path() / ("hyperkern-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  const fs::path manifest = root / "manifest.json";
  std::ofstream(manifest) << R"({"method": "svr", "seed": 4, "cv_folds": 3, "dataset": ")" << kData
                          << R"(/two_moons_20.csv", "base_kernel": "rbf"})";
  struct Run {
    std::string args;
    std::vector<std::string> reports;
  };
  const std::vector<Run> runs = {
      {"extend", {"report.json", "model.json", "cv_scores.csv"}},
      {"fit", {"report.json", "model.json"}},
      {"decompose-demo --clusters 2", {"decomposition.json", "model.json"}},
  };
  int identical = 0;
  int compared = 0;
  for (const Run& r : runs) {
    const std::string base = r.args + " --config " + manifest.string();
    const int a = run_cli(base + " --output-dir " + (root / "a").string());
    const int b = run_cli(base + " --output-dir " + (root / "b").string());
    out.require(a == 0 && b == 0, r.args + " exits 0");
    for (const std::string& f : r.reports) {
      ++compared;
      const bool json = f.size() > 5 && f.substr(f.size() - 5) == ".json";
      const bool same = json ? strip_timestamp(root / "a" / f) == strip_timestamp(root / "b" / f)
                             : slurp(root / "a" / f) == slurp(root / "b" / f);
      if (same) ++identical;
    }
  }
  const int ra = run_cli("rate-study --m-values 6 8 10 --trials 3 --seed 2 --output-dir " + (root / "a").string());
  const int rb = run_cli("rate-study --m-values 6 8 10 --trials 3 --seed 2 --output-dir " + (root / "b").string());
  out.require(ra == 0 && rb == 0, "rate-study exits 0");
  compared += 2;
  identical += strip_timestamp(root / "a/rate_study.json") == strip_timestamp(root / "b/rate_study.json");
  identical += slurp(root / "a/rate_study.csv") == slurp(root / "b/rate_study.csv");

  // extend again so that model.json is the extend model, then round trip it.
  out.require(run_cli("extend --config " + manifest.string() + " --output-dir " + (root / "c").string()) == 0,
              "extend exits 0");
  const LearnedKernel k1 = load_model(root / "c/model.json");
  save_model(root / "c/resaved.json", k1);
  const LearnedKernel k2 = load_model(root / "c/resaved.json");
  const PointSet Z = oracle::random_points(12, 2, 77);
  const double diff = (learned_gram(k1, Z).matrix - learned_gram(k2, Z).matrix).cwiseAbs().maxCoeff();
  const bool fixed_point = slurp(root / "c/resaved.json") == slurp(root / "c/model.json");

  out.detail << identical << "/" << compared << " artifacts identical modulo timestamp; round-trip max |dk| = " << diff
             << (fixed_point ? ", save/load fixed point" : ", save/load NOT a fixed point");
  out.require(identical == compared, "byte-identical reruns");
  out.require(diff <= 1e-14, "round trip to 1e-14");
  out.require(fixed_point, "model file fixed point");
  std::error_code ec;
  fs::remove_all(root, ec);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"1 SMO matches the QP oracle", smo_vs_oracle},
      {"2 KRR residuals and planted recovery", krr_correctness},
      {"3 hyper-Gram PSD and symmetric", hyper_kernel_validity},
      {"4 decomposition error bound", decomposition_bound_check},
      {"5 Nystrom sanity", nystrom_sanity},
      {"6 out-of-sample fit quality", out_of_sample_quality},
      {"7 indefinite capability and ideal kernel", indefinite_capability},
      {"8 empirical learning rate", learning_rate},
      {"9 plumbing determinism", plumbing},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome out;
    try {
      fn(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << out.detail.str() << std::endl;
    if (!out.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
