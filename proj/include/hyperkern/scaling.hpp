#pragma once

#include "hyperkern/hyper_kernel.hpp"
#include "hyperkern/krr.hpp"
#include "hyperkern/learned_kernel.hpp"
#include "hyperkern/svr_smo.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace hyperkern {

struct ScalingConfig {
  int clusters = 1;   // v
  Index landmarks = 0;  // u; 0 means "all points"
  std::uint64_t seed = 0;
  int kmeans_max_iter = 100;
};

/// Cluster ids are 0-based in [0, v).
struct PartitionPlan {
  std::vector<int> assignment;
  PointSet centroids;

  int clusters() const { return static_cast<int>(centroids.rows()); }
};

/// Lloyd iterations from k-means++ seeding; empty clusters are refilled with
/// the point of the largest cluster that lies farthest from its centroid.
PartitionPlan kmeans_partition(const PointSet& X, int clusters, std::uint64_t seed, int max_iter = 100);

/// Group id for pairs whose endpoints fall in different clusters.
inline constexpr int kResidualGroup = -1;

/// Pair (i, j) belongs to cluster c iff both endpoints are in c.
std::vector<int> pair_partition(const PartitionPlan& plan, std::span<const IndexPair> pairs);

struct LandmarkRestriction {
  std::vector<Index> landmarks;  // sorted
  PairList pairs;                // every (i, l) and (l, i), deduplicated, row-major order
};

/// Uniformly samples u distinct landmarks; 2mu - u^2 pairs result.
LandmarkRestriction nystrom_restrict(Index m, Index u, std::uint64_t seed);

struct DecompositionDiagnostics {
  int clusters = 1;
  Index landmarks = 0;
  double q_pi = 0.0;
  double sigma_min = 0.0;      // post-jitter
  double sigma_min_raw = 0.0;  // before jitter
  double jitter = 0.0;
  // C^2 Q / (2 sigma); SVR base only, infinite when sigma_min <= 0.
  std::optional<double> bound;
  std::optional<double> observed_gap;
};

/// Q(pi) over the given pair groups, smallest eigenvalue, and the bound.
DecompositionDiagnostics decomposition_bound(const HyperGram& gram, std::span<const int> pair_clusters, double C);

using BaseSolver = std::variant<KrrConfig, SvrConfig>;

struct DecomposeOptions {
  // Diagnostics (a full solve, eigensolve) only below this many pairs.
  std::size_t diagnostics_max_pairs = 2500;
  bool compute_diagnostics = true;
  AssemblyLimits limits;
  // Processing order of clusters; empty means natural order.
  std::vector<int> cluster_order;
};

struct DecomposedFit {
  LearnedKernel kernel;
  CoefficientField coefficients;  // over the restricted pair list; residual pairs are 0
  std::vector<int> pair_clusters;
  PartitionPlan plan;
  LandmarkRestriction restriction;
  std::vector<double> cluster_bias;
  std::optional<DecompositionDiagnostics> diagnostics;
};

/// Landmark restriction, k-means partition, independent per-cluster solves,
/// concatenation. The model bias is the pair-weighted mean of cluster biases.
DecomposedFit fit_decomposed(const PointSet& X, const Eigen::MatrixXd& responses, const BaseSolver& base,
                             const ScalingConfig& scaling, const HyperKernelParams& params,
                             const DecomposeOptions& options = {});

nlohmann::json to_json(const DecompositionDiagnostics& d);

}  // namespace hyperkern
