#include "hyperkern/base_kernels.hpp"

#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace hyperkern {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace

void validate(const KernelSpec& spec) {
  std::visit(overloaded{
                 [](const GaussianRbf& k) { require(k.sigma2 > 0.0, "GaussianRbf sigma2 must be positive"); },
                 [](const Tl1& k) { require(k.tau > 0.0, "TL1 tau must be positive"); },
                 [](const LogKernel& k) { require(k.sigma > 0.0, "log kernel sigma must be positive"); },
                 [](const IdealKernel& k) { require(!k.labels.empty(), "ideal kernel needs labels"); },
                 [](const Precomputed& k) {
                   require(k.matrix.rows() == k.matrix.cols(), "precomputed kernel must be square");
                   require(is_symmetric(k.matrix, 1e-12), "precomputed kernel must be symmetric");
                 },
             },
             spec);
}

std::string kernel_name(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const GaussianRbf&) { return std::string("rbf"); },
                        [](const Tl1&) { return std::string("tl1"); },
                        [](const LogKernel&) { return std::string("log"); },
                        [](const IdealKernel&) { return std::string("ideal"); },
                        [](const Precomputed&) { return std::string("precomputed"); },
                    },
                    spec);
}

double eval_kernel(const KernelSpec& spec, PointRef x, PointRef x2) {
  if (x.size() != x2.size()) fail(ErrorKind::InvalidInput, "kernel arguments differ in dimension");
  return std::visit(overloaded{
                        [&](const GaussianRbf& k) {
                          return std::exp(-(x - x2).squaredNorm() / (2.0 * k.sigma2));
                        },
                        [&](const Tl1& k) { return std::max(k.tau - (x - x2).lpNorm<1>(), 0.0); },
                        [&](const LogKernel& k) { return -std::log1p((x - x2).norm() / k.sigma); },
                        [](const IdealKernel&) -> double {
                          fail(ErrorKind::UnsupportedEvaluation, "ideal kernel is defined only on indexed points");
                        },
                        [](const Precomputed&) -> double {
                          fail(ErrorKind::UnsupportedEvaluation, "precomputed kernel has no functional form");
                        },
                    },
                    spec);
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const PointSet& X) {
  validate(spec);
  if (const auto* ideal = std::get_if<IdealKernel>(&spec)) {
    const auto m = static_cast<Index>(ideal->labels.size());
    require(X.rows() == 0 || X.rows() == m, "ideal kernel labels must align with points");
    Eigen::MatrixXd g(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) g(i, j) = ideal->labels[i] == ideal->labels[j] ? 1.0 : -1.0;
    return g;
  }
  if (const auto* pre = std::get_if<Precomputed>(&spec)) {
    require(X.rows() == 0 || X.rows() == pre->matrix.rows(), "precomputed kernel size must match points");
    return pre->matrix;
  }

  const Index m = X.rows();
  require(m >= 1, "gram_matrix needs at least one point");
  Eigen::MatrixXd g(m, m);
  parallel_for(0, m, [&](std::ptrdiff_t i) {
    g(i, i) = eval_kernel(spec, X.row(i), X.row(i));
    for (Index j = i + 1; j < m; ++j) g(i, j) = eval_kernel(spec, X.row(i), X.row(j));
  });
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) g(j, i) = g(i, j);
  return g;
}

}  // namespace hyperkern
