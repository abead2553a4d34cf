#pragma once

#include "hyperkern/hyper_kernel.hpp"

#include <Eigen/Core>

#include <cstddef>

namespace hyperkern {

enum class KrrSolver { Direct, ConjugateGradient, Auto };

struct KrrConfig {
  double lambda = 1e-3;
  KrrSolver solver = KrrSolver::Auto;
  double cg_tol = 1e-10;
  int cg_max_iter = 20000;
  // Auto switches to conjugate gradients above this many pairs.
  std::size_t iterative_threshold = 2000;
  // Diagonal jitter retries after a failed factorization; 0 disables jitter.
  int max_jitter_retries = 3;
  // lambda = 0 is rejected unless explicitly allowed.
  bool allow_zero_lambda = false;

  void validate() const;
};

struct KrrFit {
  CoefficientField coefficients;
  double jitter_applied = 0.0;
  // ||(K + (lambda + jitter) I) beta - y|| / max(1, ||y||)
  double relative_residual = 0.0;
  int cg_iterations = 0;
  KrrSolver solver_used = KrrSolver::Direct;
};

/// Hyper-KRR: solves (K + lambda I) beta = y, which satisfies the stationarity
/// condition of  ||K beta - y||^2 + lambda beta^T K beta.
KrrFit fit_krr(const HyperGram& gram, const Eigen::VectorXd& responses, const KrrConfig& config);

/// ||K beta - y||^2 + lambda beta^T K beta
double krr_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& beta, const Eigen::VectorXd& responses,
                     double lambda);

}  // namespace hyperkern
