#include "hyperkern/svm.hpp"

#include "hyperkern/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace hyperkern {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double SvmModel::decision(const Eigen::VectorXd& kernel_row) const {
  require(kernel_row.size() == alpha.size(), "kernel row length must equal the training size");
  double f = bias;
  for (Index i = 0; i < alpha.size(); ++i)
    if (alpha(i) != 0.0) f += alpha(i) * labels[i] * kernel_row(i);
  return f;
}

int SvmModel::predict(const Eigen::VectorXd& kernel_row) const { return decision(kernel_row) >= 0.0 ? 1 : -1; }

Eigen::MatrixXd clip_spectrum(const Eigen::MatrixXd& gram) {
  require(gram.rows() == gram.cols(), "clip_spectrum needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver failed in clip_spectrum");
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

SvmModel svm_train(const Eigen::MatrixXd& gram, const std::vector<int>& labels, const SvmConfig& config) {
  const Index n = gram.rows();
  require(gram.cols() == n && n >= 1, "svm_train needs a square Gram");
  require(static_cast<Index>(labels.size()) == n, "labels must align with the Gram");
  require(config.C > 0.0 && config.tol > 0.0 && config.max_iter > 0, "invalid SVM configuration");
  bool has_pos = false;
  bool has_neg = false;
  for (int y : labels) {
    require(y == 1 || y == -1, "SVM labels must be +1 or -1");
    has_pos = has_pos || y == 1;
    has_neg = has_neg || y == -1;
  }
  require(has_pos && has_neg, "SVM training needs both classes");

  const Eigen::MatrixXd K = config.spectrum_fix == SpectrumFix::Clip ? clip_spectrum(gram) : gram;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXi>(labels.data(), n).cast<double>();
  const Eigen::MatrixXd Q = y.asDiagonal() * K * y.asDiagonal();
  const double C = config.C;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = -Eigen::VectorXd::Ones(n);  // Q alpha - 1

  SvmModel model;
  long iter = 0;
  double gmax = -kInf;
  double gmin = kInf;
  for (;;) {
    Index i = -1;
    Index j = -1;
    gmax = -kInf;
    gmin = kInf;
    for (Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      const bool up = (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0);
      const bool low = (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < C);
      if (up && v >= gmax) {
        gmax = v;
        i = t;
      }
      if (low && v <= gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < config.tol) break;
    if (iter >= config.max_iter)
      throw ConvergenceError("SVM SMO hit its iteration cap with violation " + std::to_string(gmax - gmin),
                             gmax - gmin);

    const double ai_old = alpha(i);
    const double aj_old = alpha(j);
    if (y(i) != y(j)) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }
    grad += Q.col(i) * (alpha(i) - ai_old) + Q.col(j) * (alpha(j) - aj_old);
    ++iter;
  }

  // rho from free vectors, else the midpoint of the feasible interval.
  double rho_sum = 0.0;
  long free = 0;
  for (Index t = 0; t < n; ++t)
    if (alpha(t) > 0.0 && alpha(t) < C) {
      rho_sum += y(t) * grad(t);
      ++free;
    }
  const double rho = free > 0 ? rho_sum / static_cast<double>(free) : -0.5 * (gmax + gmin);

  model.alpha = alpha;
  model.labels = labels;
  model.bias = -rho;
  model.iterations = iter;
  model.dual_objective = 0.5 * alpha.dot(Q * alpha) - alpha.sum();
  return model;
}

OneVsRestSvm::OneVsRestSvm(const Eigen::MatrixXd& gram, const std::vector<int>& labels, const SvmConfig& config) {
  const std::set<int> distinct(labels.begin(), labels.end());
  require(distinct.size() >= 2, "SVM training needs at least two classes");
  classes_.assign(distinct.begin(), distinct.end());
  // Clip once for all machines.
  SvmConfig inner = config;
  const Eigen::MatrixXd K = config.spectrum_fix == SpectrumFix::Clip ? clip_spectrum(gram) : gram;
  inner.spectrum_fix = SpectrumFix::None;

  auto binary = [&](int positive) {
    std::vector<int> y(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) y[k] = labels[k] == positive ? 1 : -1;
    return svm_train(K, y, inner);
  };
  if (classes_.size() == 2) {
    machines_.push_back(binary(classes_[1]));
  } else {
    for (int c : classes_) machines_.push_back(binary(c));
  }
}

int OneVsRestSvm::predict(const Eigen::VectorXd& kernel_row) const {
  if (classes_.size() == 2) return machines_[0].decision(kernel_row) >= 0.0 ? classes_[1] : classes_[0];
  std::size_t best = 0;
  double best_v = -kInf;
  for (std::size_t c = 0; c < machines_.size(); ++c) {
    const double v = machines_[c].decision(kernel_row);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return classes_[best];
}

double svm_accuracy(const OneVsRestSvm& svm, const Eigen::MatrixXd& kernel_rows, const std::vector<int>& truth) {
  require(kernel_rows.rows() == static_cast<Index>(truth.size()), "accuracy rows must match truth labels");
  if (truth.empty()) return 0.0;
  long correct = 0;
  for (Index r = 0; r < kernel_rows.rows(); ++r)
    if (svm.predict(kernel_rows.row(r).transpose()) == truth[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace hyperkern
