#pragma once

#include "hyperkern/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace hyperkern {

/// How an indefinite training Gram is made usable by the SVM.
enum class SpectrumFix { None, Clip };

struct SvmConfig {
  double C = 1.0;
  double tol = 1e-3;
  long max_iter = 10'000'000;
  SpectrumFix spectrum_fix = SpectrumFix::Clip;
};

/// Binary C-SVM on a precomputed Gram. Decision value is
/// sum_i alpha_i y_i k(x_i, x) + bias.
struct SvmModel {
  Eigen::VectorXd alpha;
  std::vector<int> labels;  // +-1
  double bias = 0.0;
  double dual_objective = 0.0;  // 1/2 a^T Q a - 1^T a at the solution
  long iterations = 0;

  double decision(const Eigen::VectorXd& kernel_row) const;
  int predict(const Eigen::VectorXd& kernel_row) const;
};

/// Eigenvalues below zero set to zero; result symmetrized.
Eigen::MatrixXd clip_spectrum(const Eigen::MatrixXd& gram);

SvmModel svm_train(const Eigen::MatrixXd& gram, const std::vector<int>& labels, const SvmConfig& config);

/// One binary machine per class (class vs rest) over a shared Gram.
/// Two-class problems collapse to a single machine.
class OneVsRestSvm {
 public:
  OneVsRestSvm(const Eigen::MatrixXd& gram, const std::vector<int>& labels, const SvmConfig& config);

  int predict(const Eigen::VectorXd& kernel_row) const;
  const std::vector<int>& classes() const { return classes_; }

 private:
  std::vector<int> classes_;
  std::vector<SvmModel> machines_;
};

/// Fraction of rows of `kernel_rows` (test x train) predicted correctly.
double svm_accuracy(const OneVsRestSvm& svm, const Eigen::MatrixXd& kernel_rows, const std::vector<int>& truth);

}  // namespace hyperkern
