#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <vector>

namespace hyperkern {

using Index = Eigen::Index;

// One sample per row, stored row-major so a row is a contiguous point.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = Eigen::RowVectorXd;
using PointRef = Eigen::Ref<const Eigen::RowVectorXd>;

// Ordered pair of 0-based sample indices.
struct IndexPair {
  Index first = 0;
  Index second = 0;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

using PairList = std::vector<IndexPair>;

}  // namespace hyperkern
