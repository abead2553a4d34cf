#include "hyperkern/learned_kernel.hpp"

#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace hyperkern {

namespace {

double prefactor(double s2, int dim) { return std::pow(2.0 * std::numbers::pi * s2, -0.5 * dim); }

}  // namespace

LearnedKernel::LearnedKernel(PointSet points, std::vector<PairCoefficient> coefficients, double bias,
                             HyperKernelParams params)
    : points_(std::move(points)), coefficients_(std::move(coefficients)), bias_(bias), params_(params) {
  params_.validate();
  require(points_.rows() == 0 || points_.cols() == params_.dim, "learned kernel points do not match dim");
  require(std::isfinite(bias_), "learned kernel bias must be finite");

  const auto n = static_cast<Index>(coefficients_.size());
  mids_.resize(n, params_.dim);
  weights_.resize(n);
  for (Index p = 0; p < n; ++p) {
    const auto& c = coefficients_[p];
    require(c.i >= 0 && c.j >= 0 && c.i < points_.rows() && c.j < points_.rows(),
            "coefficient refers to a missing training point");
    require(std::isfinite(c.value), "coefficients must be finite");
    weights_(p) = c.value * scaled_gaussian(points_.row(c.i), points_.row(c.j), params_.sigma2, params_.dim);
    mids_.row(p) = 0.5 * (points_.row(c.i) + points_.row(c.j));
  }
  outer_pref_ = prefactor(params_.sigma2, params_.dim);
  mid_pref_ = prefactor(params_.sigma2 + params_.sigma_h2, params_.dim);
}

LearnedKernel LearnedKernel::from_fit(const PointSet& points, const CoefficientField& field, double bias,
                                      const HyperKernelParams& params) {
  require(static_cast<Index>(field.pairs.size()) == field.values.size(), "coefficient field is not pair-aligned");
  std::vector<PairCoefficient> coefs;
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const double v = field.values(static_cast<Index>(k));
    if (v != 0.0) coefs.push_back({field.pairs[k].first, field.pairs[k].second, v});
  }
  return LearnedKernel(points, std::move(coefs), bias, params);
}

double LearnedKernel::operator()(PointRef x, PointRef x2) const {
  if (x.size() != params_.dim || x2.size() != params_.dim)
    fail(ErrorKind::InvalidInput, "learned kernel argument dimension mismatch");
  const double s_mid = params_.sigma2 + params_.sigma_h2;
  const Point mid = 0.5 * (x + x2);
  double sum = 0.0;
  for (Index p = 0; p < weights_.size(); ++p)
    sum += weights_(p) * std::exp(-(mids_.row(p) - mid).squaredNorm() / (2.0 * s_mid));
  const double outer = outer_pref_ * std::exp(-(x - x2).squaredNorm() / (2.0 * params_.sigma2));
  return outer * mid_pref_ * sum + bias_;
}

Projector::Projector(double b) : bound(b) { require(b > 0.0, "projection bound must be positive"); }

double Projector::operator()(double value) const { return std::clamp(value, -bound, bound); }

DefinitenessReport definiteness(const Eigen::MatrixXd& symmetric) {
  require(symmetric.rows() == symmetric.cols() && symmetric.rows() > 0, "definiteness needs a nonempty square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "symmetric eigensolver failed");
  DefinitenessReport r;
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  r.max_eigenvalue = eig.eigenvalues().maxCoeff();
  const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
  r.indefinite = r.min_eigenvalue < -1e-8 * scale;
  return r;
}

LearnedGram learned_gram(const LearnedKernel& kernel, const PointSet& X, const std::optional<Projector>& projector) {
  const Index n = X.rows();
  require(n >= 1, "learned_gram needs at least one point");
  LearnedGram out;
  out.matrix.resize(n, n);
  parallel_for(0, n, [&](std::ptrdiff_t r) {
    for (Index c = r; c < n; ++c) {
      double v = kernel(X.row(r), X.row(c));
      if (projector) v = (*projector)(v);
      out.matrix(r, c) = v;
    }
  });
  for (Index r = 0; r < n; ++r)
    for (Index c = r + 1; c < n; ++c) out.matrix(c, r) = out.matrix(r, c);
  out.report = definiteness(out.matrix);
  return out;
}

Eigen::MatrixXd learned_cross_gram(const LearnedKernel& kernel, const PointSet& A, const PointSet& B) {
  Eigen::MatrixXd out(A.rows(), B.rows());
  parallel_for(0, A.rows(), [&](std::ptrdiff_t r) {
    for (Index c = 0; c < B.rows(); ++c) out(r, c) = kernel(A.row(r), B.row(c));
  });
  return out;
}

nlohmann::json to_json(const LearnedKernel& kernel) {
  nlohmann::json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["hyper_params"] = {{"sigma2", kernel.params().sigma2},
                         {"sigma_h2", kernel.params().sigma_h2},
                         {"dim", kernel.params().dim}};
  doc["bias"] = kernel.bias();
  auto points = nlohmann::json::array();
  for (Index r = 0; r < kernel.points().rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < kernel.points().cols(); ++c) row.push_back(kernel.points()(r, c));
    points.push_back(std::move(row));
  }
  doc["points"] = std::move(points);
  auto coefs = nlohmann::json::array();
  for (const auto& c : kernel.coefficients()) coefs.push_back({{"i", c.i}, {"j", c.j}, {"value", c.value}});
  doc["coefficients"] = std::move(coefs);
  return doc;
}

LearnedKernel learned_kernel_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      fail(ErrorKind::FormatError, "unsupported model schema_version " + std::to_string(version));
    HyperKernelParams params;
    const auto& hp = doc.at("hyper_params");
    params.sigma2 = hp.at("sigma2").get<double>();
    params.sigma_h2 = hp.at("sigma_h2").get<double>();
    params.dim = hp.at("dim").get<int>();

    const auto& rows = doc.at("points");
    PointSet points(static_cast<Index>(rows.size()), params.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(params.dim))
        fail(ErrorKind::FormatError, "model point " + std::to_string(r) + " has the wrong dimension");
      for (int c = 0; c < params.dim; ++c) points(static_cast<Index>(r), c) = rows[r][c].get<double>();
    }
    std::vector<PairCoefficient> coefs;
    for (const auto& c : doc.at("coefficients"))
      coefs.push_back({c.at("i").get<Index>(), c.at("j").get<Index>(), c.at("value").get<double>()});
    return LearnedKernel(std::move(points), std::move(coefs), doc.at("bias").get<double>(), params);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FormatError) throw;
    fail(ErrorKind::FormatError, e.what());
  }
}

void save_model(const std::filesystem::path& path, const LearnedKernel& kernel) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FormatError, "cannot open " + path.string() + " for writing");
  out << to_json(kernel).dump(2) << '\n';
}

LearnedKernel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FormatError, "cannot open model " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, std::string("model is not valid JSON: ") + e.what());
  }
  return learned_kernel_from_json(doc);
}

}  // namespace hyperkern
