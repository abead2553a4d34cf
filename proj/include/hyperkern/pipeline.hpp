#pragma once

#include "hyperkern/base_kernels.hpp"
#include "hyperkern/learned_kernel.hpp"
#include "hyperkern/scaling.hpp"
#include "hyperkern/svm.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hyperkern {

enum class Method { HyperKrr, HyperSvr };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

enum class CvScoring { Rmse, Accuracy };

/// Everything a single fit needs besides data. `reg` is lambda for KRR and C for SVR.
struct Hyperparams {
  double sigma2 = 1.0;
  double sigma_h2 = 1.0;
  double reg = 1e-3;
  double epsilon = 0.1;
  double kkt_tol = 0.01;
};

/// log10-spaced values 10^lo, 10^(lo+1), ..., 10^hi.
std::vector<double> log10_grid(int lo, int hi);

struct ExperimentConfig {
  std::array<double, 3> split{0.4, 0.4, 0.2};  // labeled, unlabeled, test
  int cv_folds = 5;
  std::vector<double> sigma_h2_grid{0.25, 0.5, 1.0, 2.0, 4.0};  // multiples of sigma2
  std::vector<double> reg_grid = log10_grid(-5, 5);
  std::vector<double> svm_c_grid = log10_grid(-2, 3);
  CvScoring scoring = CvScoring::Rmse;
  SpectrumFix spectrum_fix = SpectrumFix::Clip;
  double epsilon = 0.1;
  double kkt_tol = 0.01;
  std::uint64_t seed = 0;
  int trials = 10;

  void validate() const;
};

struct DatasetSplit {
  std::vector<Index> labeled;
  std::vector<Index> unlabeled;
  std::vector<Index> test;
  bool stratified = false;
  std::vector<std::string> warnings;
};

/// Disjoint, exhaustive, deterministic per seed. Stratified by class when every
/// class has at least `min_class_size` members; otherwise a plain shuffle with a
/// StratificationWarning recorded.
DatasetSplit split_dataset(Index m, const std::optional<std::vector<int>>& labels, const std::array<double, 3>& fractions,
                           std::uint64_t seed, int min_class_size = 5);

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

/// Mean per-feature (population) variance.
double mean_feature_variance(const PointSet& X);

struct CvRow {
  double sigma_h2 = 0.0;
  double reg = 0.0;
  double score = 0.0;
  bool failed = false;
  std::string error;
};

struct CvResult {
  Hyperparams best;
  std::vector<CvRow> table;
  CvScoring scoring = CvScoring::Rmse;
};

/// Grid search over sigma_h2_grid x reg_grid. sigma2 is fixed to the mean
/// feature variance of X. Fold scores are held-out-pair RMSE (lower wins) or
/// downstream SVM accuracy (higher wins); ties go to larger reg, then smaller
/// sigma_h2.
CvResult cross_validate(const PointSet& X, const Eigen::MatrixXd& Y, const std::optional<std::vector<int>>& labels,
                        Method method, const ExperimentConfig& config);

/// Learns k from the given kernel matrix Y on X, optionally through the
/// clustered / landmark path.
LearnedKernel fit_extend(const PointSet& X, const Eigen::MatrixXd& Y, Method method, const Hyperparams& hp,
                         const std::optional<ScalingConfig>& scaling = std::nullopt,
                         std::optional<DecompositionDiagnostics>* diagnostics = nullptr);

/// RMSE of the learned kernel against Y over ordered pairs (i, j) with at least
/// one endpoint outside `inside`.
double heldout_pair_rmse(const LearnedKernel& kernel, const PointSet& X, const Eigen::MatrixXd& Y,
                         const std::vector<Index>& inside);

struct ExperimentReport {
  Method method = Method::HyperKrr;
  ExperimentConfig config;
  Hyperparams selected;
  std::vector<CvRow> cv_table;
  double svm_c = 1.0;
  double rmse_heldout_pairs = 0.0;
  std::optional<double> accuracy_unlabeled;
  std::optional<double> accuracy_test;
  std::optional<double> accuracy_train;
  DefinitenessReport definiteness;
  std::optional<DecompositionDiagnostics> scaling_diagnostics;
  DatasetSplit split;
  double seconds_cv = 0.0;
  double seconds_fit = 0.0;
  std::optional<LearnedKernel> kernel;  // fitted on the labeled points
};

struct ExperimentOverrides {
  std::optional<double> sigma_h2;  // absolute value; collapses the sigma_h2 grid
  std::optional<double> reg;       // collapses the reg grid
  std::optional<double> svm_c;
  std::optional<ScalingConfig> scaling;
};

/// Split, tune on the labeled part, learn from Y restricted to labeled points,
/// then score out-of-sample pairs and the downstream SVM on unlabeled/test.
ExperimentReport run_experiment(const PointSet& X, const std::optional<std::vector<int>>& labels,
                                const Eigen::MatrixXd& Y, Method method, const ExperimentConfig& config,
                                const ExperimentOverrides& overrides = {});

LearnedKernel fit_on_subset(const PointSet& X, const Eigen::MatrixXd& Y, const std::vector<Index>& subset,
                            Method method, const Hyperparams& hp, const std::optional<ScalingConfig>& scaling,
                            std::optional<DecompositionDiagnostics>* diagnostics = nullptr);

nlohmann::json to_json(const ExperimentReport& report, bool include_timings);
void write_cv_csv(std::ostream& out, const std::vector<CvRow>& table);

enum class RateTarget { GaussianRbf, Planted };

struct RateStudyConfig {
  std::vector<Index> m_values{8, 16, 32, 64};
  int trials = 10;
  double noise_sigma = 0.1;
  Method method = Method::HyperKrr;
  Hyperparams hyper{1.0, 1.0, 1e-3, 0.1, 1e-3};
  RateTarget target = RateTarget::GaussianRbf;
  int dim = 2;
  Index eval_pairs = 256;
  std::uint64_t seed = 0;
};

struct RateStudyReport {
  std::vector<Index> m_values;
  std::vector<double> median_errors;
  std::vector<std::vector<double>> errors;  // per m, per trial
  double loglog_slope = 0.0;
  bool complete = true;
  std::string failure;
};

/// Least-squares slope of log(err) against log(m).
double loglog_slope(const std::vector<Index>& m_values, const std::vector<double>& errors);

RateStudyReport learning_rate_study(const RateStudyConfig& config);

nlohmann::json to_json(const RateStudyReport& report);
void write_rate_csv(std::ostream& out, const RateStudyReport& report);

}  // namespace hyperkern
