#include "hyperkern/scaling.hpp"

#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace hyperkern {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int nearest_centroid(const PointSet& centroids, PointRef x) {
  int best = 0;
  double best_d = kInf;
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

PointSet kmeanspp_seed(const PointSet& X, int k, std::mt19937_64& rng) {
  const Index m = X.rows();
  PointSet centroids(k, X.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);
  Index first = std::uniform_int_distribution<Index>(0, m - 1)(rng);
  centroids.row(0) = X.row(first);
  chosen[first] = true;

  Eigen::VectorXd d2(m);
  for (Index i = 0; i < m; ++i) d2(i) = (X.row(i) - centroids.row(0)).squaredNorm();

  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        acc += d2(i);
        if (d2(i) > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (Index i = m - 1; i >= 0; --i)
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
    }
    if (pick < 0) {
      // All remaining mass is zero (duplicates): take an unused index.
      std::vector<Index> unused;
      for (Index i = 0; i < m; ++i)
        if (!chosen[i]) unused.push_back(i);
      pick = unused[std::uniform_int_distribution<std::size_t>(0, unused.size() - 1)(rng)];
    }
    chosen[pick] = true;
    centroids.row(c) = X.row(pick);
    for (Index i = 0; i < m; ++i) d2(i) = std::min(d2(i), (X.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

void recompute_centroids(const PointSet& X, const std::vector<int>& assignment, PointSet& centroids,
                         std::vector<Index>& sizes) {
  const Index k = centroids.rows();
  PointSet sums = PointSet::Zero(k, X.cols());
  sizes.assign(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < X.rows(); ++i) {
    sums.row(assignment[i]) += X.row(i);
    ++sizes[assignment[i]];
  }
  for (Index c = 0; c < k; ++c)
    if (sizes[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
}

// Returns true if any point moved.
bool repair_empty(const PointSet& X, std::vector<int>& assignment, PointSet& centroids, std::vector<Index>& sizes) {
  bool moved = false;
  for (Index c = 0; c < centroids.rows(); ++c) {
    if (sizes[c] > 0) continue;
    const auto largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < X.rows(); ++i) {
      if (assignment[i] != largest) continue;
      const double d = (X.row(i) - centroids.row(largest)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    assignment[far] = static_cast<int>(c);
    recompute_centroids(X, assignment, centroids, sizes);
    moved = true;
  }
  return moved;
}

struct BlockSolution {
  Eigen::VectorXd beta;
  double bias = 0.0;
};

BlockSolution solve_block(const HyperGram& gram, const Eigen::VectorXd& y, const BaseSolver& base) {
  if (const auto* krr = std::get_if<KrrConfig>(&base)) return {fit_krr(gram, y, *krr).coefficients.values, 0.0};
  const auto model = fit_svr(gram, y, std::get<SvrConfig>(base));
  return {model.beta.values, model.bias};
}

[[noreturn]] void rethrow_tagged(const Error& e, int cluster) {
  const std::string what = "cluster " + std::to_string(cluster) + ": " + e.what();
  if (const auto* conv = dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(what, conv->worst_violation());
  throw Error(e.kind(), what);
}

double cross_mass(const Eigen::MatrixXd& entries, std::span<const int> groups) {
  double q = 0.0;
  const Index n = entries.rows();
  for (Index p = 0; p < n; ++p)
    for (Index r = 0; r < n; ++r)
      if (groups[p] != groups[r]) q += std::abs(entries(p, r));
  return q;
}

double smallest_eigenvalue(const Eigen::MatrixXd& entries) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver failed on the hyper-Gram");
  return eig.eigenvalues().minCoeff();
}

}  // namespace

PartitionPlan kmeans_partition(const PointSet& X, int clusters, std::uint64_t seed, int max_iter) {
  const Index m = X.rows();
  require(m >= 1, "kmeans_partition needs points");
  require(clusters >= 1, "cluster count must be at least 1");
  if (clusters > m)
    fail(ErrorKind::InvalidInput,
         "cluster count " + std::to_string(clusters) + " exceeds point count " + std::to_string(m));
  require(max_iter >= 1, "kmeans max_iter must be positive");

  std::mt19937_64 rng(seed);
  PartitionPlan plan;
  plan.centroids = kmeanspp_seed(X, clusters, rng);
  plan.assignment.assign(static_cast<std::size_t>(m), 0);
  std::vector<Index> sizes;

  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (Index i = 0; i < m; ++i) {
      const int c = nearest_centroid(plan.centroids, X.row(i));
      if (c != plan.assignment[i]) changed = true;
      plan.assignment[i] = c;
    }
    recompute_centroids(X, plan.assignment, plan.centroids, sizes);
    changed = repair_empty(X, plan.assignment, plan.centroids, sizes) || changed;
    if (!changed) break;
  }
  recompute_centroids(X, plan.assignment, plan.centroids, sizes);
  repair_empty(X, plan.assignment, plan.centroids, sizes);
  return plan;
}

std::vector<int> pair_partition(const PartitionPlan& plan, std::span<const IndexPair> pairs) {
  const auto m = static_cast<Index>(plan.assignment.size());
  std::vector<int> groups;
  groups.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= m || j >= m)
      fail(ErrorKind::InvalidInput, "pair (" + std::to_string(i) + ", " + std::to_string(j) + ") not covered by plan");
    groups.push_back(plan.assignment[i] == plan.assignment[j] ? plan.assignment[i] : kResidualGroup);
  }
  return groups;
}

LandmarkRestriction nystrom_restrict(Index m, Index u, std::uint64_t seed) {
  require(m >= 1, "nystrom_restrict needs m >= 1");
  if (u < 1 || u > m)
    fail(ErrorKind::InvalidInput, "landmark count " + std::to_string(u) + " outside [1, " + std::to_string(m) + "]");
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  LandmarkRestriction out;
  out.landmarks.assign(order.begin(), order.begin() + u);
  std::sort(out.landmarks.begin(), out.landmarks.end());
  std::vector<bool> is_landmark(static_cast<std::size_t>(m), false);
  for (Index l : out.landmarks) is_landmark[l] = true;
  out.pairs.reserve(static_cast<std::size_t>(2 * m * u - u * u));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (is_landmark[i] || is_landmark[j]) out.pairs.push_back({i, j});
  return out;
}

DecompositionDiagnostics decomposition_bound(const HyperGram& gram, std::span<const int> pair_clusters, double C) {
  require(static_cast<Index>(pair_clusters.size()) == gram.size(), "pair_clusters must match the hyper-Gram size");
  require(C > 0.0, "C must be positive");
  DecompositionDiagnostics d;
  d.q_pi = cross_mass(gram.entries, pair_clusters);
  d.sigma_min_raw = gram.size() > 0 ? smallest_eigenvalue(gram.entries) : 0.0;
  d.sigma_min = d.sigma_min_raw;
  d.jitter = gram.jitter_applied;
  d.bound = d.sigma_min > 0.0 ? C * C * d.q_pi / (2.0 * d.sigma_min) : kInf;
  return d;
}

DecomposedFit fit_decomposed(const PointSet& X, const Eigen::MatrixXd& responses, const BaseSolver& base,
                             const ScalingConfig& scaling, const HyperKernelParams& params,
                             const DecomposeOptions& options) {
  const Index m = X.rows();
  require(m >= 1, "fit_decomposed needs points");
  require(responses.rows() == m && responses.cols() == m, "responses must be m x m");
  const double scale = std::max(1.0, responses.cwiseAbs().maxCoeff());
  require((responses - responses.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale, "responses must be symmetric");
  std::visit([](const auto& cfg) { cfg.validate(); }, base);

  const Index u = scaling.landmarks == 0 ? m : scaling.landmarks;
  DecomposedFit fit{LearnedKernel(X, {}, 0.0, params), {}, {}, {}, {}, {}, std::nullopt};
  fit.restriction = nystrom_restrict(m, u, scaling.seed);
  fit.plan = kmeans_partition(X, scaling.clusters, scaling.seed, scaling.kmeans_max_iter);
  fit.pair_clusters = pair_partition(fit.plan, fit.restriction.pairs);

  const int v = fit.plan.clusters();
  const auto n = static_cast<Index>(fit.restriction.pairs.size());
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(v));
  for (Index p = 0; p < n; ++p)
    if (fit.pair_clusters[p] != kResidualGroup) members[fit.pair_clusters[p]].push_back(p);

  std::vector<int> order = options.cluster_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(v));
    std::iota(order.begin(), order.end(), 0);
  }
  require(static_cast<int>(order.size()) == v, "cluster_order must list every cluster once");

  auto sub_pairs = [&](int c) {
    PairList pl;
    pl.reserve(members[c].size());
    for (Index p : members[c]) pl.push_back(fit.restriction.pairs[p]);
    return pl;
  };

  auto solve_all = [&](double jitter) {
    std::vector<BlockSolution> sols(static_cast<std::size_t>(v));
    parallel_for(
        0, v,
        [&](std::ptrdiff_t k) {
          const int c = order[k];
          try {
            const PairList pl = sub_pairs(c);
            HyperGram g = assemble_hyper_gram(params, X, std::span<const IndexPair>(pl), options.limits);
            if (jitter > 0.0) g = with_jitter(g, jitter);
            sols[c] = solve_block(g, gather_responses(responses, pl), base);
          } catch (const Error& e) {
            rethrow_tagged(e, c);
          }
        },
        /*dynamic=*/true);
    return sols;
  };

  auto concatenate = [&](const std::vector<BlockSolution>& sols) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < v; ++c)
      for (std::size_t k = 0; k < members[c].size(); ++k) beta(members[c][k]) = sols[c].beta(static_cast<Index>(k));
    return beta;
  };

  const auto sols = solve_all(0.0);
  fit.coefficients.pairs = fit.restriction.pairs;
  fit.coefficients.values = concatenate(sols);
  double weighted = 0.0;
  double total = 0.0;
  for (int c = 0; c < v; ++c) {
    fit.cluster_bias.push_back(sols[c].bias);
    weighted += sols[c].bias * static_cast<double>(members[c].size());
    total += static_cast<double>(members[c].size());
  }
  const double bias = total > 0.0 ? weighted / total : 0.0;
  fit.kernel = LearnedKernel::from_fit(X, fit.coefficients, bias, params);

  if (options.compute_diagnostics && static_cast<std::size_t>(n) <= options.diagnostics_max_pairs) {
    const HyperGram full = assemble_hyper_gram(params, X, std::span<const IndexPair>(fit.restriction.pairs),
                                               options.limits);
    DecompositionDiagnostics d;
    d.clusters = v;
    d.landmarks = u;
    d.q_pi = cross_mass(full.entries, fit.pair_clusters);
    d.sigma_min_raw = smallest_eigenvalue(full.entries);
    // The error bound needs a strictly positive smallest eigenvalue.
    double jitter = 0.0;
    if (!(d.sigma_min_raw > 0.0)) {
      const double j0 = base_jitter(full.entries);
      for (int attempt = 0; attempt <= 3 && !(d.sigma_min_raw + jitter > 0.0); ++attempt)
        jitter = j0 * std::pow(10.0, attempt);
    }
    d.jitter = jitter;
    d.sigma_min = d.sigma_min_raw + jitter;

    const HyperGram full_j = jitter > 0.0 ? with_jitter(full, jitter) : full;
    BlockSolution exact;
    try {
      exact = solve_block(full_j, gather_responses(responses, fit.restriction.pairs), base);
    } catch (const Error& e) {
      rethrow_tagged(e, -1);
    }
    const Eigen::VectorXd approx = jitter > 0.0 ? concatenate(solve_all(jitter)) : fit.coefficients.values;
    d.observed_gap = (exact.beta - approx).norm();
    if (const auto* svr = std::get_if<SvrConfig>(&base))
      d.bound = d.sigma_min > 0.0 ? svr->C * svr->C * d.q_pi / (2.0 * d.sigma_min) : kInf;
    fit.diagnostics = d;
  }
  return fit;
}

nlohmann::json to_json(const DecompositionDiagnostics& d) {
  nlohmann::json j;
  j["v"] = d.clusters;
  j["u"] = d.landmarks;
  j["q_pi"] = d.q_pi;
  j["sigma_min"] = d.sigma_min;
  j["sigma_min_raw"] = d.sigma_min_raw;
  j["jitter"] = d.jitter;
  if (d.bound) {
    if (std::isfinite(*d.bound))
      j["bound"] = *d.bound;
    else
      j["bound"] = "inf";
  } else {
    j["bound"] = nullptr;
  }
  if (d.observed_gap) j["observed_gap"] = *d.observed_gap;
  return j;
}

}  // namespace hyperkern
