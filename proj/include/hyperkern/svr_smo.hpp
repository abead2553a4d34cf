#pragma once

#include "hyperkern/hyper_kernel.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

namespace hyperkern {

struct SvrConfig {
  double C = 1.0;
  double epsilon = 0.1;
  double kkt_tol = 1e-3;
  // Iteration cap is min(max_iter, max_passes * n) pair updates.
  long max_passes = 100000;
  long max_iter = 10'000'000;
  bool record_trace = false;

  void validate() const;
};

struct SmoTraceRow {
  long iteration = 0;
  double dual_objective = 0.0;
  double worst_violation = 0.0;
};

/// Bivariate SVR dual solution. beta = beta_hat - beta_check with the two
/// halves never simultaneously positive.
struct SvrModel {
  CoefficientField beta;
  double bias = 0.0;
  std::vector<Index> support_pairs;
  double dual_objective = 0.0;
  long iterations = 0;
  double worst_violation = 0.0;
  std::vector<SmoTraceRow> trace;

  Eigen::VectorXd beta_hat() const { return beta.values.cwiseMax(0.0); }
  Eigen::VectorXd beta_check() const { return (-beta.values).cwiseMax(0.0); }
};

/// |y - t|_eps
double epsilon_insensitive_loss(double y, double t, double eps);

/// -1/2 (bh - bc)^T K (bh - bc) + (bh - bc)^T y - eps (bh + bc)^T 1
double dual_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_check,
                      const Eigen::VectorXd& responses, double eps);

/// SMO with maximal-violating-pair selection on the signed coefficients.
/// Each step maximizes the concave piecewise-quadratic dual along the pair
/// direction exactly, so the dual objective never decreases.
SvrModel fit_svr(const HyperGram& gram, const Eigen::VectorXd& responses, const SvrConfig& config);

void write_trace_csv(std::ostream& out, const std::vector<SmoTraceRow>& trace);

}  // namespace hyperkern
