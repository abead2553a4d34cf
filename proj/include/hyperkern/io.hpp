#pragma once

#include "hyperkern/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hyperkern {

enum class DatasetFormat { Csv, LibsvmSparse };

DatasetFormat dataset_format_from_string(const std::string& name);

struct Dataset {
  PointSet X;
  std::optional<std::vector<int>> labels;
};

struct IngestOptions {
  DatasetFormat format = DatasetFormat::Csv;
  bool labeled = true;      // csv only: final column holds the label
  bool standardize = true;  // per-column zero mean, unit population std
};

/// Reads a dense csv (one sample per line) or libsvm-style sparse lines
/// ("label idx:val ...", 1-based indices, padded to the largest index).
/// Blank lines and lines starting with '#' are skipped.
Dataset ingest_dataset(const std::filesystem::path& path, const IngestOptions& options = {});

/// Columns with zero spread are centred but not rescaled.
void standardize_columns(PointSet& X);

/// Square csv matrix, returned as (K + K^T) / 2. When the largest asymmetry
/// exceeds 1e-8 a message is appended to `warnings`.
Eigen::MatrixXd ingest_kernel_matrix(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Full-precision csv writer, one row per line.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M);

}  // namespace hyperkern
