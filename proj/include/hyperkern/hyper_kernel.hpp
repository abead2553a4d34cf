#pragma once

#include "hyperkern/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>

namespace hyperkern {

/// Parameters of the Gaussian hyper-kernel.
///
///   k_((x1,x1'),(x2,x2')) = <x1,x1'>_{s2} <x2,x2'>_{s2} <(x1+x1')/2, (x2+x2')/2>_{s2+sh2}
///
/// where <a,b>_s = (2 pi s)^{-d/2} exp(-||a-b||^2 / (2 s)).
struct HyperKernelParams {
  double sigma2 = 1.0;
  double sigma_h2 = 1.0;
  int dim = 1;

  void validate() const;
};

/// Normalised Gaussian (2 pi s2)^{-dim/2} exp(-||x - x2||^2 / (2 s2)).
double scaled_gaussian(PointRef x, PointRef x2, double s2, int dim);

double eval_hyper_kernel(const HyperKernelParams& params, PointRef a, PointRef a2, PointRef b, PointRef b2);

/// Row-major pair enumeration d(i,j,m) = m(i-1) + j with 1-based i, j.
std::size_t pair_index(std::size_t i, std::size_t j, std::size_t m);

/// Inverse of pair_index: returns the 1-based (i, j) of a 1-based index.
std::pair<std::size_t, std::size_t> pair_from_index(std::size_t index, std::size_t m);

/// All m^2 ordered pairs in pair_index order (0-based).
PairList all_pairs(Index m);

/// Hyper-kernel Gram over an ordered list of sample pairs.
struct HyperGram {
  Eigen::MatrixXd entries;
  PairList pairs;
  double jitter_applied = 0.0;

  Index size() const { return entries.rows(); }
};

struct AssemblyLimits {
  // Cap on the number of pairs n; the dense Gram holds n^2 doubles.
  std::size_t max_pairs = 8192;
};

/// Assembles the hyper-Gram of X over `pairs` (all m^2 ordered pairs when
/// omitted). Exactly symmetric. Throws ResourceLimit past the pair cap.
HyperGram assemble_hyper_gram(const HyperKernelParams& params, const PointSet& X,
                              std::optional<std::span<const IndexPair>> pairs = std::nullopt,
                              const AssemblyLimits& limits = {});

/// Copy of gram with `amount` added to the diagonal (accumulates jitter_applied).
HyperGram with_jitter(const HyperGram& gram, double amount);

/// Base diagonal jitter 1e-10 * trace / n used by the retry policy.
double base_jitter(const Eigen::MatrixXd& entries);

/// Responses Y(i, j) gathered in pair order.
Eigen::VectorXd gather_responses(const Eigen::MatrixXd& Y, std::span<const IndexPair> pairs);

/// Expansion coefficients attached to sample pairs.
struct CoefficientField {
  Eigen::VectorXd values;
  PairList pairs;

  /// Dense m x m coefficient matrix; pairs missing from the list are zero.
  Eigen::MatrixXd as_matrix(Index m) const;
};

/// Binary cache: u64 little-endian n, followed by n*n little-endian doubles, row-major.
void save_hyper_gram(const std::filesystem::path& path, const Eigen::MatrixXd& entries);
Eigen::MatrixXd load_hyper_gram(const std::filesystem::path& path);

}  // namespace hyperkern
