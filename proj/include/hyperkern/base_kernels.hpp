#pragma once

#include "hyperkern/types.hpp"

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

namespace hyperkern {

/// exp(-||x - x'||^2 / (2 sigma2))
struct GaussianRbf {
  double sigma2 = 1.0;
};

/// Truncated L1 distance kernel max{tau - ||x - x'||_1, 0}. Indefinite in general.
struct Tl1 {
  double tau = 1.0;
};

/// -log(1 + ||x - x'|| / sigma), Euclidean norm (not squared).
struct LogKernel {
  double sigma = 1.0;
};

/// Label kernel: +1 when two labels agree, -1 otherwise (yy^T for +-1 labels).
/// Only defined on indexed training points.
struct IdealKernel {
  std::vector<int> labels;
};

struct Precomputed {
  Eigen::MatrixXd matrix;
};

using KernelSpec = std::variant<GaussianRbf, Tl1, LogKernel, IdealKernel, Precomputed>;

/// TL1 with the customary radius tau = 0.7 * dim.
inline Tl1 tl1_for_dimension(Index dim) { return Tl1{0.7 * static_cast<double>(dim)}; }

void validate(const KernelSpec& spec);

std::string kernel_name(const KernelSpec& spec);

/// Functional evaluation. Ideal and Precomputed have no functional form and
/// throw UnsupportedEvaluation.
double eval_kernel(const KernelSpec& spec, PointRef x, PointRef x2);

/// Gram matrix over the rows of X. The strict upper triangle is evaluated and
/// mirrored, so the result is exactly symmetric. For Ideal, X may be empty
/// (labels define m) or must have one row per label.
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const PointSet& X);

}  // namespace hyperkern
