#pragma once

#include "hyperkern/hyper_kernel.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace hyperkern {

struct PairCoefficient {
  Index i = 0;
  Index j = 0;
  double value = 0.0;

  friend bool operator==(const PairCoefficient&, const PairCoefficient&) = default;
};

/// k*(x, x') = sum_ij beta_ij k_((x_i, x_j), (x, x')) + bias
///
/// Immutable once built. Only nonzero coefficients are stored; evaluation
/// factors the hyper-kernel as <x, x'> * sum_p c_p <mid_p, (x + x')/2>, with
/// c_p = beta_p <x_i, x_j> cached per stored pair.
class LearnedKernel {
 public:
  LearnedKernel(PointSet points, std::vector<PairCoefficient> coefficients, double bias, HyperKernelParams params);

  /// Keeps the nonzero entries of a solver's coefficient field.
  static LearnedKernel from_fit(const PointSet& points, const CoefficientField& field, double bias,
                                const HyperKernelParams& params);

  double operator()(PointRef x, PointRef x2) const;

  const PointSet& points() const { return points_; }
  const std::vector<PairCoefficient>& coefficients() const { return coefficients_; }
  double bias() const { return bias_; }
  const HyperKernelParams& params() const { return params_; }
  Index dim() const { return params_.dim; }

 private:
  PointSet points_;
  std::vector<PairCoefficient> coefficients_;
  double bias_;
  HyperKernelParams params_;

  PointSet mids_;
  Eigen::VectorXd weights_;
  double outer_pref_ = 0.0;
  double mid_pref_ = 0.0;
};

/// Clamp to [-B, B].
struct Projector {
  double bound = 1.0;

  explicit Projector(double b);
  double operator()(double value) const;
};

struct DefinitenessReport {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool indefinite = false;  // min < -1e-8 * max |eigenvalue|
};

DefinitenessReport definiteness(const Eigen::MatrixXd& symmetric);

struct LearnedGram {
  Eigen::MatrixXd matrix;
  DefinitenessReport report;
};

/// Square Gram of the learned kernel on X; exactly symmetric.
LearnedGram learned_gram(const LearnedKernel& kernel, const PointSet& X,
                         const std::optional<Projector>& projector = std::nullopt);

/// Rectangular evaluations k(A_r, B_c).
Eigen::MatrixXd learned_cross_gram(const LearnedKernel& kernel, const PointSet& A, const PointSet& B);

constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const LearnedKernel& kernel);
LearnedKernel learned_kernel_from_json(const nlohmann::json& doc);
void save_model(const std::filesystem::path& path, const LearnedKernel& kernel);
LearnedKernel load_model(const std::filesystem::path& path);

}  // namespace hyperkern
