#include "hyperkern/hyper_kernel.hpp"

#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

namespace hyperkern {

namespace {

double gaussian_prefactor(double s2, int dim) {
  return std::pow(2.0 * std::numbers::pi * s2, -0.5 * static_cast<double>(dim));
}

static_assert(std::endian::native == std::endian::little, "binary gram cache assumes a little-endian host");

}  // namespace

void HyperKernelParams::validate() const {
  require(sigma2 > 0.0, "hyper-kernel sigma2 must be positive");
  require(sigma_h2 > 0.0, "hyper-kernel sigma_h2 must be positive");
  require(dim >= 1, "hyper-kernel dim must be at least 1");
}

double scaled_gaussian(PointRef x, PointRef x2, double s2, int dim) {
  if (x.size() != dim || x2.size() != dim) fail(ErrorKind::InvalidInput, "scaled_gaussian dimension mismatch");
  require(s2 > 0.0, "scaled_gaussian variance must be positive");
  return gaussian_prefactor(s2, dim) * std::exp(-(x - x2).squaredNorm() / (2.0 * s2));
}

double eval_hyper_kernel(const HyperKernelParams& params, PointRef a, PointRef a2, PointRef b, PointRef b2) {
  params.validate();
  const Point mid_a = 0.5 * (a + a2);
  const Point mid_b = 0.5 * (b + b2);
  return scaled_gaussian(a, a2, params.sigma2, params.dim) * scaled_gaussian(b, b2, params.sigma2, params.dim) *
         scaled_gaussian(mid_a, mid_b, params.sigma2 + params.sigma_h2, params.dim);
}

std::size_t pair_index(std::size_t i, std::size_t j, std::size_t m) {
  if (m == 0 || i < 1 || j < 1 || i > m || j > m)
    fail(ErrorKind::InvalidInput, "pair_index out of range: (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") with m = " + std::to_string(m));
  return m * (i - 1) + j;
}

std::pair<std::size_t, std::size_t> pair_from_index(std::size_t index, std::size_t m) {
  if (m == 0 || index < 1 || index > m * m) fail(ErrorKind::InvalidInput, "pair index out of range");
  return {(index - 1) / m + 1, (index - 1) % m + 1};
}

PairList all_pairs(Index m) {
  PairList pairs;
  pairs.reserve(static_cast<std::size_t>(m * m));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) pairs.push_back({i, j});
  return pairs;
}

HyperGram assemble_hyper_gram(const HyperKernelParams& params, const PointSet& X,
                              std::optional<std::span<const IndexPair>> pairs, const AssemblyLimits& limits) {
  params.validate();
  const Index m = X.rows();
  require(m >= 1, "assemble_hyper_gram needs at least one point");
  require(X.cols() == params.dim, "points do not match hyper-kernel dim");

  HyperGram gram;
  if (pairs) {
    gram.pairs.assign(pairs->begin(), pairs->end());
    for (const auto& p : gram.pairs)
      require(p.first >= 0 && p.first < m && p.second >= 0 && p.second < m, "pair index outside the point set");
  } else {
    gram.pairs = all_pairs(m);
  }

  const auto n = static_cast<Index>(gram.pairs.size());
  if (gram.pairs.size() > limits.max_pairs)
    fail(ErrorKind::ResourceLimit, std::to_string(n) + " pairs exceed the dense hyper-Gram cap of " +
                                       std::to_string(limits.max_pairs) + "; use clustering or landmarks");

  // Per-pair factor <x_i, x_j>_{s2} and midpoint; entry = f_p f_q <mid_p, mid_q>_{s2+sh2}.
  Eigen::VectorXd factor(n);
  PointSet mids(n, params.dim);
  for (Index p = 0; p < n; ++p) {
    const auto [i, j] = gram.pairs[p];
    factor(p) = scaled_gaussian(X.row(i), X.row(j), params.sigma2, params.dim);
    mids.row(p) = 0.5 * (X.row(i) + X.row(j));
  }
  const double s_mid = params.sigma2 + params.sigma_h2;
  const double mid_pref = gaussian_prefactor(s_mid, params.dim);

  gram.entries.resize(n, n);
  parallel_for(0, n, [&](std::ptrdiff_t p) {
    for (Index q = p; q < n; ++q) {
      const double d2 = (mids.row(p) - mids.row(q)).squaredNorm();
      gram.entries(p, q) = factor(p) * factor(q) * mid_pref * std::exp(-d2 / (2.0 * s_mid));
    }
  });
  for (Index p = 0; p < n; ++p)
    for (Index q = p + 1; q < n; ++q) gram.entries(q, p) = gram.entries(p, q);
  return gram;
}

HyperGram with_jitter(const HyperGram& gram, double amount) {
  require(amount >= 0.0, "jitter must be nonnegative");
  HyperGram out = gram;
  out.entries.diagonal().array() += amount;
  out.jitter_applied += amount;
  return out;
}

double base_jitter(const Eigen::MatrixXd& entries) {
  if (entries.rows() == 0) return 0.0;
  return 1e-10 * entries.trace() / static_cast<double>(entries.rows());
}

Eigen::VectorXd gather_responses(const Eigen::MatrixXd& Y, std::span<const IndexPair> pairs) {
  Eigen::VectorXd y(static_cast<Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    require(i >= 0 && j >= 0 && i < Y.rows() && j < Y.cols(), "response pair outside the matrix");
    y(static_cast<Index>(k)) = Y(i, j);
  }
  return y;
}

Eigen::MatrixXd CoefficientField::as_matrix(Index m) const {
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    require(i < m && j < m, "coefficient pair outside the point set");
    beta(i, j) = values(static_cast<Index>(k));
  }
  return beta;
}

void save_hyper_gram(const std::filesystem::path& path, const Eigen::MatrixXd& entries) {
  require(entries.rows() == entries.cols(), "hyper-Gram must be square");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::FormatError, "cannot open " + path.string() + " for writing");
  const auto n = static_cast<std::uint64_t>(entries.rows());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = entries;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) fail(ErrorKind::FormatError, "short write to " + path.string());
}

Eigen::MatrixXd load_hyper_gram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FormatError, "cannot open " + path.string());
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) fail(ErrorKind::FormatError, "truncated hyper-Gram header in " + path.string());
  const auto size = std::filesystem::file_size(path);
  if (n > (1ULL << 20) || size != sizeof n + n * n * sizeof(double))
    fail(ErrorKind::FormatError, "hyper-Gram payload size does not match header in " + path.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!in) fail(ErrorKind::FormatError, "truncated hyper-Gram payload in " + path.string());
  return rm;
}

}  // namespace hyperkern
