#include "hyperkern/svr_smo.hpp"

#include "hyperkern/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace hyperkern {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Violators {
  Index up = -1;    // best index to increase
  Index down = -1;  // best index to decrease
  double up_value = -kInf;
  double down_value = -kInf;

  double gap() const { return up_value + down_value; }
};

// Directional derivatives of the dual along +e_k and -e_k.
Violators select_pair(const Eigen::VectorXd& beta, const Eigen::VectorXd& grad, double C, double eps) {
  Violators v;
  for (Index k = 0; k < beta.size(); ++k) {
    const double b = beta(k);
    if (b < C) {
      const double up = grad(k) - (b >= 0.0 ? eps : -eps);
      if (up > v.up_value) {
        v.up_value = up;
        v.up = k;
      }
    }
    if (b > -C) {
      const double down = -grad(k) - (b <= 0.0 ? eps : -eps);
      if (down > v.down_value) {
        v.down_value = down;
        v.down = k;
      }
    }
  }
  return v;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : -1.0; }

// Maximizes -eta/2 t^2 + t (gi - gj) - eps (|bi + t| + |bj - t|) over [0, t_max].
double line_step(double bi, double bj, double gi, double gj, double eta, double eps, double t_max) {
  std::array<double, 4> knots{0.0, t_max, t_max, t_max};
  int count = 1;
  if (bi < 0.0 && -bi < t_max) knots[count++] = -bi;
  if (bj > 0.0 && bj < t_max) knots[count++] = bj;
  knots[count++] = t_max;
  std::sort(knots.begin(), knots.begin() + count);

  for (int s = 0; s + 1 < count; ++s) {
    const double a = knots[s];
    const double b = knots[s + 1];
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b);
    const double slope0 = (gi - gj) - eps * sign_of(bi + mid) + eps * sign_of(bj - mid);
    if (eta > 0.0) {
      const double t = slope0 / eta;
      if (t <= a) return a;
      if (t < b) return t;
    } else if (slope0 <= 0.0) {
      return a;
    }
  }
  return t_max;
}

double signed_dual(const Eigen::VectorXd& beta, const Eigen::VectorXd& grad, const Eigen::VectorXd& y, double eps) {
  // beta^T K beta = beta^T (y - grad)
  return 0.5 * beta.dot(y + grad) - eps * beta.lpNorm<1>();
}

}  // namespace

void SvrConfig::validate() const {
  require(C > 0.0, "SVR C must be positive");
  require(epsilon >= 0.0, "SVR epsilon must be nonnegative");
  require(kkt_tol > 0.0, "SVR kkt_tol must be positive");
  require(max_passes > 0 && max_iter > 0, "SVR iteration caps must be positive");
}

double epsilon_insensitive_loss(double y, double t, double eps) {
  const double r = std::abs(y - t);
  return r < eps ? 0.0 : r - eps;
}

double dual_objective(const Eigen::MatrixXd& gram, const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_check,
                      const Eigen::VectorXd& responses, double eps) {
  const Index n = gram.rows();
  require(gram.cols() == n && beta_hat.size() == n && beta_check.size() == n && responses.size() == n,
          "dual_objective size mismatch");
  const Eigen::VectorXd beta = beta_hat - beta_check;
  return -0.5 * beta.dot(gram * beta) + beta.dot(responses) - eps * (beta_hat + beta_check).sum();
}

SvrModel fit_svr(const HyperGram& gram, const Eigen::VectorXd& responses, const SvrConfig& config) {
  config.validate();
  const Index n = gram.size();
  const Eigen::MatrixXd& K = gram.entries;
  require(K.cols() == n, "hyper-Gram must be square");
  require(responses.size() == n, "responses must align with the hyper-Gram pairs");
  require(gram.pairs.empty() || static_cast<Index>(gram.pairs.size()) == n, "hyper-Gram pair list length mismatch");

  const double C = config.C;
  const double eps = config.epsilon;
  const long cap = std::min(config.max_iter, config.max_passes * std::max<long>(1, static_cast<long>(n)));

  SvrModel model;
  model.beta.pairs = gram.pairs;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = responses;  // y - K beta

  if (config.record_trace && n > 0) {
    const auto v = select_pair(beta, grad, C, eps);
    model.trace.push_back({0, 0.0, std::max(0.0, v.gap())});
  }

  long iter = 0;
  bool refreshed = false;
  bool stalled = false;
  Violators v;
  while (n > 0) {
    v = select_pair(beta, grad, C, eps);
    if (v.up < 0 || v.down < 0 || v.gap() <= config.kkt_tol) {
      if (refreshed) break;
      // Remove accumulated drift from incremental gradient updates and recheck.
      grad = responses - K * beta;
      refreshed = true;
      continue;
    }
    refreshed = false;
    if (iter >= cap)
      throw ConvergenceError("SMO hit its iteration cap (" + std::to_string(cap) + ") with KKT violation " +
                                 std::to_string(v.gap()),
                             v.gap());

    const Index i = v.up;
    const Index j = v.down;
    const double eta = std::max(0.0, K(i, i) + K(j, j) - 2.0 * K(i, j));
    const double t_max = std::min(C - beta(i), beta(j) + C);
    const double t = line_step(beta(i), beta(j), grad(i), grad(j), eta, eps, t_max);
    if (!(t > 0.0)) {
      // Zero-length step at a positive violation only happens through roundoff.
      if (stalled) throw ConvergenceError("SMO stalled with KKT violation " + std::to_string(v.gap()), v.gap());
      stalled = true;
      grad = responses - K * beta;
      continue;
    }
    stalled = false;

    beta(i) = (t == C - beta(i)) ? C : beta(i) + t;
    beta(j) = (t == beta(j) + C) ? -C : beta(j) - t;
    grad.noalias() -= t * (K.col(i) - K.col(j));
    ++iter;

    if (config.record_trace) model.trace.push_back({iter, signed_dual(beta, grad, responses, eps), v.gap()});
  }

  model.iterations = iter;
  model.worst_violation = n > 0 ? std::max(0.0, v.gap()) : 0.0;

  // Bias from interior coefficients, else the midpoint of the KKT interval.
  double bias_sum = 0.0;
  long interior = 0;
  for (Index k = 0; k < n; ++k) {
    const double b = beta(k);
    if (b > 0.0 && b < C) {
      bias_sum += grad(k) - eps;
      ++interior;
    } else if (b < 0.0 && b > -C) {
      bias_sum += grad(k) + eps;
      ++interior;
    }
    if (b != 0.0) model.support_pairs.push_back(k);
  }
  if (interior > 0) {
    model.bias = bias_sum / static_cast<double>(interior);
  } else if (n > 0) {
    const double lo = v.up >= 0 ? v.up_value : -kInf;
    const double hi = v.down >= 0 ? -v.down_value : kInf;
    if (std::isfinite(lo) && std::isfinite(hi))
      model.bias = 0.5 * (lo + hi);
    else
      model.bias = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
  }

  model.beta.values = std::move(beta);
  model.dual_objective = n > 0 ? dual_objective(K, model.beta_hat(), model.beta_check(), responses, eps) : 0.0;
  return model;
}

void write_trace_csv(std::ostream& out, const std::vector<SmoTraceRow>& trace) {
  out << "iteration,dual_objective,worst_violation\n";
  out.precision(17);
  for (const auto& row : trace) out << row.iteration << ',' << row.dual_objective << ',' << row.worst_violation << '\n';
}

}  // namespace hyperkern
