#pragma once

// Independent reference implementations used by the tests. None of these call
// into the library's solvers; they are deliberately simple and slow.

#include "hyperkern/types.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using hyperkern::Index;
using hyperkern::PointSet;

inline PointSet random_points(Index m, Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  PointSet X(m, d);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < d; ++c) X(r, c) = nd(rng);
  return X;
}

inline Eigen::VectorXd random_vector(Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (Index k = 0; k < n; ++k) v(k) = nd(rng);
  return v;
}

// A A^T / n + ridge I: symmetric positive definite.
inline Eigen::MatrixXd random_pd(Index n, std::uint64_t seed, double ridge = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) A(r, c) = nd(rng);
  Eigen::MatrixXd K = A * A.transpose() / static_cast<double>(n);
  K.diagonal().array() += ridge;
  return 0.5 * (K + K.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Hyper-kernel evaluated term by term in long double, straight from the
// closed form, without any factoring or caching.
inline double hyper_kernel(double s2, double sh2, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& a2,
                           const Eigen::RowVectorXd& b, const Eigen::RowVectorXd& b2) {
  const auto d = static_cast<long double>(a.size());
  const long double pi = 3.141592653589793238462643383279502884L;
  auto g = [&](const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& v, long double s) {
    long double sq = 0.0L;
    for (Index k = 0; k < u.size(); ++k) {
      const long double diff = static_cast<long double>(u(k)) - static_cast<long double>(v(k));
      sq += diff * diff;
    }
    return std::pow(2.0L * pi * s, -d / 2.0L) * std::exp(-sq / (2.0L * s));
  };
  const Eigen::RowVectorXd ma = 0.5 * (a + a2);
  const Eigen::RowVectorXd mb = 0.5 * (b + b2);
  return static_cast<double>(g(a, a2, s2) * g(b, b2, s2) * g(ma, mb, static_cast<long double>(s2) + sh2));
}

inline Eigen::MatrixXd hyper_gram(double s2, double sh2, const PointSet& X,
                                  const std::vector<std::pair<Index, Index>>& pairs) {
  const auto n = static_cast<Index>(pairs.size());
  Eigen::MatrixXd K(n, n);
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q < n; ++q)
      K(p, q) = hyper_kernel(s2, sh2, X.row(pairs[p].first), X.row(pairs[p].second), X.row(pairs[q].first),
                             X.row(pairs[q].second));
  return K;
}

inline std::vector<std::pair<Index, Index>> all_pairs(Index m) {
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) out.emplace_back(i, j);
  return out;
}

// Euclidean projection of v onto {lo <= z <= hi, w^T z = 0} by bisection on
// the multiplier mu in z(mu) = clip(v - mu w).  w has entries +-1.
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double lo, double hi) {
  auto z_of = [&](double mu) { return (v - mu * w).cwiseMax(lo).cwiseMin(hi).eval(); };
  auto h = [&](double mu) { return w.dot(z_of(mu)); };  // non-increasing in mu
  double a = -1.0;
  double b = 1.0;
  while (h(a) < 0.0) a *= 2.0;
  while (h(b) > 0.0) b *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (h(mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  return z_of(0.5 * (a + b));
}

struct SvrSolution {
  Eigen::VectorXd beta;  // beta_hat - beta_check
  double objective = 0.0;
  long iterations = 0;
};

// Projected gradient ascent on the 2n-variable SVR dual
//   max -1/2 (bh - bc)^T K (bh - bc) + (bh - bc)^T y - eps 1^T (bh + bc)
//   s.t. 0 <= bh, bc <= C, 1^T bh - 1^T bc = 0
// with the constant step 1/L, L = 2 lambda_max(K).
inline SvrSolution svr_dual_oracle(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double eps,
                                   long max_iter = 1'000'000) {
  const Index n = K.rows();
  const double L = 2.0 * std::max(max_eigenvalue(K), 1e-12);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd w(2 * n);
  w << Eigen::VectorXd::Ones(n), -Eigen::VectorXd::Ones(n);
  SvrSolution s;
  for (long it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd beta = z.head(n) - z.tail(n);
    const Eigen::VectorXd gb = y - K * beta;
    Eigen::VectorXd grad(2 * n);
    grad << gb - eps * Eigen::VectorXd::Ones(n), -gb - eps * Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd next = project_box_hyperplane(z + grad / L, w, 0.0, C);
    const double moved = (next - z).lpNorm<Eigen::Infinity>();
    z = next;
    s.iterations = it + 1;
    if (moved < 1e-15) break;
  }
  s.beta = z.head(n) - z.tail(n);
  s.objective = -0.5 * s.beta.dot(K * s.beta) + s.beta.dot(y) - eps * z.sum();
  return s;
}

// Projected gradient descent on the C-SVM dual
//   min 1/2 a^T Q a - 1^T a,  0 <= a <= C, y^T a = 0,  Q = diag(y) K diag(y).
inline Eigen::VectorXd svm_dual_oracle(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C,
                                       long max_iter = 1'000'000) {
  const Eigen::MatrixXd Q = y.asDiagonal() * K * y.asDiagonal();
  const double L = std::max(max_eigenvalue(Q), 1e-12);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(K.rows());
  for (long it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd grad = Q * a - Eigen::VectorXd::Ones(a.size());
    const Eigen::VectorXd next = project_box_hyperplane(a - grad / L, y, 0.0, C);
    const double moved = (next - a).lpNorm<Eigen::Infinity>();
    a = next;
    if (moved < 1e-15) break;
  }
  return a;
}

// Minimal second libsvm reader built on strtol/strtod, used to cross-check
// the production parser.
struct SparseData {
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
};

inline SparseData read_libsvm(const std::string& path) {
  SparseData out;
  std::ifstream in(path);
  std::string line;
  std::vector<std::vector<std::pair<long, double>>> entries;
  long width = 0;
  while (std::getline(in, line)) {
    const char* p = line.c_str();
    char* end = nullptr;
    const double label = std::strtod(p, &end);
    if (end == p) continue;
    out.labels.push_back(static_cast<int>(label));
    p = end;
    std::vector<std::pair<long, double>> row;
    for (;;) {
      const long idx = std::strtol(p, &end, 10);
      if (end == p || *end != ':') break;
      p = end + 1;
      const double val = std::strtod(p, &end);
      p = end;
      row.emplace_back(idx, val);
      width = std::max(width, idx);
    }
    entries.push_back(row);
  }
  for (const auto& row : entries) {
    std::vector<double> dense(static_cast<std::size_t>(width), 0.0);
    for (const auto& [k, v] : row) dense[static_cast<std::size_t>(k - 1)] = v;
    out.rows.push_back(dense);
  }
  return out;
}

}  // namespace oracle
