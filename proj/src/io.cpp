#include "hyperkern/io.hpp"

#include "hyperkern/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace hyperkern {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string where(const std::filesystem::path& path, long line) {
  return path.string() + ":" + std::to_string(line);
}

double parse_double(std::string_view cell, const std::filesystem::path& path, long line) {
  cell = trim(cell);
  std::string_view body = cell;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc{} || ptr != body.data() + body.size() || !std::isfinite(value))
    fail(ErrorKind::FormatError, where(path, line) + ": non-numeric cell '" + std::string(cell) + "'");
  return value;
}

int parse_label(std::string_view cell, const std::filesystem::path& path, long line) {
  const double v = parse_double(cell, path, line);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    fail(ErrorKind::FormatError, where(path, line) + ": label '" + std::string(trim(cell)) + "' is not an integer");
  return static_cast<int>(v);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FormatError, "cannot open '" + path.string() + "'");
  return in;
}

bool skip(std::string_view line) { return line.empty() || line.front() == '#'; }

// Rows of numeric cells; every row must have the same width.
std::vector<std::vector<double>> read_csv_numbers(const std::filesystem::path& path, std::vector<long>* line_numbers,
                                                  std::vector<std::string>* last_cells) {
  std::ifstream in = open(path);
  std::vector<std::vector<double>> rows;
  std::string raw;
  long line = 0;
  std::size_t width = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view view = trim(raw);
    if (skip(view)) continue;
    const auto cells = split(view, ',');
    if (rows.empty()) {
      width = cells.size();
    } else if (cells.size() != width) {
      fail(ErrorKind::FormatError, where(path, line) + ": ragged row with " + std::to_string(cells.size()) +
                                       " cells, expected " + std::to_string(width));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    const std::size_t numeric = last_cells ? cells.size() - 1 : cells.size();
    for (std::size_t c = 0; c < numeric; ++c) row.push_back(parse_double(cells[c], path, line));
    if (last_cells) last_cells->emplace_back(cells.back());
    rows.push_back(std::move(row));
    if (line_numbers) line_numbers->push_back(line);
  }
  if (rows.empty()) fail(ErrorKind::FormatError, "'" + path.string() + "' contains no data rows");
  return rows;
}

Dataset read_csv_dataset(const std::filesystem::path& path, bool labeled) {
  std::vector<long> lines;
  std::vector<std::string> label_cells;
  const auto rows = read_csv_numbers(path, &lines, labeled ? &label_cells : nullptr);
  const auto d = static_cast<Index>(rows.front().size());
  if (d == 0) fail(ErrorKind::FormatError, "'" + path.string() + "' has no feature columns");
  Dataset ds;
  ds.X.resize(static_cast<Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Index c = 0; c < d; ++c) ds.X(static_cast<Index>(r), c) = rows[r][c];
  if (labeled) {
    std::vector<int> labels;
    for (std::size_t r = 0; r < label_cells.size(); ++r) labels.push_back(parse_label(label_cells[r], path, lines[r]));
    ds.labels = std::move(labels);
  }
  return ds;
}

Dataset read_libsvm_dataset(const std::filesystem::path& path) {
  std::ifstream in = open(path);
  std::vector<int> labels;
  std::vector<std::vector<std::pair<Index, double>>> rows;
  std::string raw;
  long line = 0;
  Index width = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view view = trim(raw);
    if (skip(view)) continue;
    std::istringstream tokens{std::string(view)};
    std::string tok;
    tokens >> tok;
    labels.push_back(parse_label(tok, path, line));
    std::vector<std::pair<Index, double>> entries;
    Index prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail(ErrorKind::FormatError, where(path, line) + ": expected idx:val, got '" + tok + "'");
      const double idx = parse_double(std::string_view(tok).substr(0, colon), path, line);
      if (idx < 1 || idx != std::floor(idx))
        fail(ErrorKind::FormatError, where(path, line) + ": feature index must be a positive integer");
      const auto k = static_cast<Index>(idx);
      if (k <= prev) fail(ErrorKind::FormatError, where(path, line) + ": feature indices must increase");
      prev = k;
      entries.emplace_back(k - 1, parse_double(std::string_view(tok).substr(colon + 1), path, line));
      width = std::max(width, k);
    }
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) fail(ErrorKind::FormatError, "'" + path.string() + "' contains no data rows");
  if (width == 0) fail(ErrorKind::FormatError, "'" + path.string() + "' has no features");
  Dataset ds;
  ds.X = PointSet::Zero(static_cast<Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [k, v] : rows[r]) ds.X(static_cast<Index>(r), k) = v;
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace

DatasetFormat dataset_format_from_string(const std::string& name) {
  if (name == "csv") return DatasetFormat::Csv;
  if (name == "libsvm" || name == "libsvm-sparse") return DatasetFormat::LibsvmSparse;
  fail(ErrorKind::ConfigError, "unknown dataset format '" + name + "' (expected csv or libsvm-sparse)");
}

void standardize_columns(PointSet& X) {
  if (X.rows() == 0) return;
  for (Index c = 0; c < X.cols(); ++c) {
    auto col = X.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(X.rows()));
    if (sd > 0.0) col /= sd;
  }
}

Dataset ingest_dataset(const std::filesystem::path& path, const IngestOptions& options) {
  Dataset ds = options.format == DatasetFormat::Csv ? read_csv_dataset(path, options.labeled)
                                                    : read_libsvm_dataset(path);
  if (options.standardize) standardize_columns(ds.X);
  return ds;
}

Eigen::MatrixXd ingest_kernel_matrix(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  const auto rows = read_csv_numbers(path, nullptr, nullptr);
  const auto m = static_cast<Index>(rows.size());
  if (static_cast<Index>(rows.front().size()) != m)
    fail(ErrorKind::FormatError, "kernel matrix in '" + path.string() + "' is " + std::to_string(m) + "x" +
                                     std::to_string(rows.front().size()) + ", not square");
  Eigen::MatrixXd K(m, m);
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < m; ++c) K(r, c) = rows[r][c];
  const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 && warnings) {
    std::ostringstream msg;
    msg << "kernel matrix asymmetric by up to " << asym << "; symmetrized as (K + K^T)/2";
    warnings->push_back(msg.str());
  }
  return 0.5 * (K + K.transpose());
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FormatError, "cannot write '" + path.string() + "'");
  out.precision(17);
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) out << (c ? "," : "") << M(r, c);
    out << '\n';
  }
}

}  // namespace hyperkern
