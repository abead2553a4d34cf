#include "hyperkern/krr.hpp"

#include "hyperkern/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <string>

namespace hyperkern {

namespace {

constexpr double kDirectResidualTol = 1e-8;
constexpr double kMinRcond = 1e-15;

double relative_residual(const Eigen::MatrixXd& system, const Eigen::VectorXd& beta, const Eigen::VectorXd& y) {
  return (system * beta - y).norm() / std::max(1.0, y.norm());
}

Eigen::VectorXd solve_direct(const Eigen::MatrixXd& system, const Eigen::VectorXd& y, double& residual) {
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) return {};
  const double rcond = llt.rcond();
  if (!(rcond > kMinRcond)) return {};
  Eigen::VectorXd beta = llt.solve(y);
  residual = relative_residual(system, beta, y);
  // Iterative refinement for ill-conditioned systems.
  for (int step = 0; step < 3 && residual > kDirectResidualTol; ++step) {
    beta += llt.solve(y - system * beta);
    residual = relative_residual(system, beta, y);
  }
  if (!beta.allFinite() || residual > kDirectResidualTol) return {};
  return beta;
}

Eigen::VectorXd solve_cg(const Eigen::MatrixXd& system, const Eigen::VectorXd& y, const KrrConfig& config,
                         int& iterations, double& residual) {
  const Index n = y.size();
  const double target = config.cg_tol * std::max(1.0, y.norm());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = y;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  iterations = 0;
  while (std::sqrt(rr) > target) {
    if (iterations >= config.cg_max_iter) {
      const double rel = std::sqrt(rr) / std::max(1.0, y.norm());
      throw ConvergenceError("conjugate gradient stalled at relative residual " + std::to_string(rel), rel);
    }
    const Eigen::VectorXd ap = system * p;
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) fail(ErrorKind::NumericalFailure, "conjugate gradient met non-positive curvature");
    const double step = rr / curvature;
    beta += step * p;
    r -= step * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    ++iterations;
  }
  residual = relative_residual(system, beta, y);
  return beta;
}

}  // namespace

void KrrConfig::validate() const {
  if (allow_zero_lambda)
    require(lambda >= 0.0, "KRR lambda must be nonnegative");
  else
    require(lambda > 0.0, "KRR lambda must be positive");
  require(cg_tol > 0.0, "cg_tol must be positive");
  require(cg_max_iter > 0, "cg_max_iter must be positive");
  require(max_jitter_retries >= 0, "max_jitter_retries must be nonnegative");
}

KrrFit fit_krr(const HyperGram& gram, const Eigen::VectorXd& responses, const KrrConfig& config) {
  config.validate();
  const Index n = gram.size();
  require(gram.entries.cols() == n, "hyper-Gram must be square");
  require(responses.size() == n, "responses must align with the hyper-Gram pairs");
  require(gram.pairs.empty() || static_cast<Index>(gram.pairs.size()) == n, "hyper-Gram pair list length mismatch");

  KrrFit fit;
  fit.coefficients.pairs = gram.pairs;
  if (n == 0) return fit;

  Eigen::MatrixXd system = gram.entries;
  system.diagonal().array() += config.lambda;

  const bool iterative = config.solver == KrrSolver::ConjugateGradient ||
                         (config.solver == KrrSolver::Auto && static_cast<std::size_t>(n) > config.iterative_threshold);
  if (iterative) {
    fit.solver_used = KrrSolver::ConjugateGradient;
    fit.coefficients.values = solve_cg(system, responses, config, fit.cg_iterations, fit.relative_residual);
    return fit;
  }

  fit.solver_used = KrrSolver::Direct;
  const double jitter0 = base_jitter(gram.entries);
  double added = 0.0;
  for (int attempt = 0;; ++attempt) {
    double residual = std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta = solve_direct(system, responses, residual);
    if (beta.size() == n) {
      fit.coefficients.values = std::move(beta);
      fit.jitter_applied = added;
      fit.relative_residual = residual;
      return fit;
    }
    if (attempt >= config.max_jitter_retries || !(jitter0 > 0.0))
      fail(ErrorKind::NumericalFailure, "KRR factorization failed after " + std::to_string(attempt) +
                                            " jitter retries (lambda = " + std::to_string(config.lambda) + ")");
    const double jitter = jitter0 * std::pow(10.0, attempt);
    system.diagonal().array() += jitter;
    added += jitter;
  }
}

double krr_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& beta, const Eigen::VectorXd& responses,
                     double lambda) {
  require(gram.rows() == beta.size() && beta.size() == responses.size(), "krr_objective size mismatch");
  const Eigen::VectorXd kb = gram * beta;
  return (kb - responses).squaredNorm() + lambda * beta.dot(kb);
}

}  // namespace hyperkern
