#include "hyperkern/pipeline.hpp"

#include "hyperkern/error.hpp"
#include "hyperkern/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace hyperkern {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

PointSet select_rows(const PointSet& X, const std::vector<Index>& rows) {
  PointSet out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = X.row(rows[r]);
  return out;
}

Eigen::MatrixXd select_block(const Eigen::MatrixXd& Y, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = Y(rows[r], cols[c]);
  return out;
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[r]);
  return out;
}

// Order in which class members are interleaved so any prefix is close to the
// class proportions. Within a class the order is a seeded shuffle.
std::vector<Index> stratified_order(const std::vector<int>& labels, std::mt19937_64& rng) {
  std::set<int> classes(labels.begin(), labels.end());
  struct Keyed {
    double key;
    int cls;
    Index index;
  };
  std::vector<Keyed> keyed;
  for (int c : classes) {
    std::vector<Index> members;
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == c) members.push_back(static_cast<Index>(k));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < members.size(); ++r)
      keyed.push_back({(static_cast<double>(r) + 0.5) / static_cast<double>(members.size()), c, members[r]});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cls < b.cls;
  });
  std::vector<Index> order;
  order.reserve(keyed.size());
  for (const auto& k : keyed) order.push_back(k.index);
  return order;
}

std::vector<Index> shuffled(Index m, std::mt19937_64& rng) {
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

bool classes_at_least(const std::vector<int>& labels, int min_size) {
  std::map<int, int> counts;
  for (int y : labels) ++counts[y];
  return std::all_of(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second >= min_size; });
}

// fold id per position 0..m-1
std::vector<int> assign_folds(Index m, int folds, const std::optional<std::vector<int>>& labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const std::vector<Index> order =
      labels && classes_at_least(*labels, 1) ? stratified_order(*labels, rng) : shuffled(m, rng);
  std::vector<int> fold(static_cast<std::size_t>(m));
  for (std::size_t k = 0; k < order.size(); ++k) fold[order[k]] = static_cast<int>(k % folds);
  return fold;
}

bool better(double a, double b, CvScoring scoring) { return scoring == CvScoring::Rmse ? a < b : a > b; }

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double score_fold(const PointSet& X, const Eigen::MatrixXd& Y, const std::optional<std::vector<int>>& labels,
                  const std::vector<int>& fold, int f, Method method, const Hyperparams& hp, CvScoring scoring) {
  std::vector<Index> train;
  std::vector<Index> held;
  for (Index k = 0; k < X.rows(); ++k) (fold[k] == f ? held : train).push_back(k);
  const LearnedKernel kernel = fit_on_subset(X, Y, train, method, hp, std::nullopt);
  if (scoring == CvScoring::Rmse) return heldout_pair_rmse(kernel, X, Y, train);

  const PointSet Xt = select_rows(X, train);
  const PointSet Xh = select_rows(X, held);
  const LearnedGram g = learned_gram(kernel, Xt);
  const OneVsRestSvm svm(g.matrix, select_labels(*labels, train), SvmConfig{});
  return svm_accuracy(svm, learned_cross_gram(kernel, Xh, Xt), select_labels(*labels, held));
}

double tune_svm_c(const Eigen::MatrixXd& gram, const std::vector<int>& labels, const std::vector<double>& grid,
                  int folds, SpectrumFix fix, std::uint64_t seed) {
  const auto m = static_cast<Index>(labels.size());
  if (grid.size() == 1) return grid.front();
  const int k = static_cast<int>(std::min<Index>(folds, m));
  const std::vector<int> fold = assign_folds(m, k, labels, seed + 17);
  double best_c = grid.front();
  double best_acc = -1.0;
  for (double c : grid) {
    double acc = 0.0;
    int used = 0;
    for (int f = 0; f < k; ++f) {
      std::vector<Index> tr;
      std::vector<Index> te;
      for (Index i = 0; i < m; ++i) (fold[i] == f ? te : tr).push_back(i);
      const std::vector<int> ytr = select_labels(labels, tr);
      if (std::set<int>(ytr.begin(), ytr.end()).size() < 2 || te.empty()) continue;
      try {
        SvmConfig cfg;
        cfg.C = c;
        cfg.spectrum_fix = fix;
        const OneVsRestSvm svm(select_block(gram, tr, tr), ytr, cfg);
        acc += svm_accuracy(svm, select_block(gram, te, tr), select_labels(labels, te));
        ++used;
      } catch (const Error&) {
      }
    }
    if (used == 0) continue;
    acc /= used;
    if (acc > best_acc + 1e-12) {
      best_acc = acc;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace

const char* to_string(Method method) { return method == Method::HyperKrr ? "krr" : "svr"; }

Method method_from_string(const std::string& name) {
  if (name == "krr" || name == "hyper-krr") return Method::HyperKrr;
  if (name == "svr" || name == "hyper-svr") return Method::HyperSvr;
  fail(ErrorKind::ConfigError, "unknown method '" + name + "' (expected krr or svr)");
}

std::vector<double> log10_grid(int lo, int hi) {
  std::vector<double> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

void ExperimentConfig::validate() const {
  for (double f : split) require(f > 0.0, "split fractions must be positive");
  require(std::abs(split[0] + split[1] + split[2] - 1.0) < 1e-9, "split fractions must sum to 1");
  require(cv_folds >= 2, "cv_folds must be at least 2");
  require(!sigma_h2_grid.empty() && !reg_grid.empty() && !svm_c_grid.empty(), "grids must be nonempty");
  for (double v : sigma_h2_grid) require(v > 0.0, "sigma_h2 grid values must be positive");
  for (double v : reg_grid) require(v > 0.0, "regularization grid values must be positive");
  require(trials >= 1, "trials must be positive");
}

DatasetSplit split_dataset(Index m, const std::optional<std::vector<int>>& labels, const std::array<double, 3>& fractions,
                           std::uint64_t seed, int min_class_size) {
  require(m >= 5, "split_dataset needs at least 5 samples");
  for (double f : fractions) require(f > 0.0, "split fractions must be positive");
  require(std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) < 1e-9, "split fractions must sum to 1");
  require(!labels || static_cast<Index>(labels->size()) == m, "labels must align with samples");

  const auto n_lab = std::max<Index>(1, std::llround(fractions[0] * static_cast<double>(m)));
  const auto n_unl = std::max<Index>(1, std::llround(fractions[1] * static_cast<double>(m)));
  require(n_lab + n_unl < m, "split leaves no test samples");

  std::mt19937_64 rng(seed);
  DatasetSplit split;
  std::vector<Index> order;
  if (labels && classes_at_least(*labels, min_class_size)) {
    order = stratified_order(*labels, rng);
    split.stratified = true;
  } else {
    if (labels)
      split.warnings.push_back("StratificationWarning: a class has fewer than " + std::to_string(min_class_size) +
                               " members; split is unstratified");
    order = shuffled(m, rng);
  }
  split.labeled.assign(order.begin(), order.begin() + n_lab);
  split.unlabeled.assign(order.begin() + n_lab, order.begin() + n_lab + n_unl);
  split.test.assign(order.begin() + n_lab + n_unl, order.end());
  std::sort(split.labeled.begin(), split.labeled.end());
  std::sort(split.unlabeled.begin(), split.unlabeled.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  require(predicted.size() == truth.size(), "rmse arguments differ in length");
  require(predicted.size() >= 1, "rmse needs at least one value");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

double mean_feature_variance(const PointSet& X) {
  require(X.rows() >= 1 && X.cols() >= 1, "mean_feature_variance needs data");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  return (X.rowwise() - mean).array().square().colwise().mean().mean();
}

LearnedKernel fit_extend(const PointSet& X, const Eigen::MatrixXd& Y, Method method, const Hyperparams& hp,
                         const std::optional<ScalingConfig>& scaling,
                         std::optional<DecompositionDiagnostics>* diagnostics) {
  const Index m = X.rows();
  require(m >= 1, "fit_extend needs points");
  require(Y.rows() == m && Y.cols() == m, "given kernel must be m x m and aligned with the points");
  const double scale = std::max(1.0, Y.cwiseAbs().maxCoeff());
  require((Y - Y.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale, "given kernel must be symmetric");

  const HyperKernelParams params{hp.sigma2, hp.sigma_h2, static_cast<int>(X.cols())};
  KrrConfig krr;
  krr.lambda = hp.reg;
  SvrConfig svr;
  svr.C = hp.reg;
  svr.epsilon = hp.epsilon;
  svr.kkt_tol = hp.kkt_tol;

  if (scaling) {
    DecomposeOptions opts;
    opts.compute_diagnostics = diagnostics != nullptr;
    const BaseSolver base = method == Method::HyperKrr ? BaseSolver{krr} : BaseSolver{svr};
    DecomposedFit fit = fit_decomposed(X, Y, base, *scaling, params, opts);
    if (diagnostics) *diagnostics = fit.diagnostics;
    return std::move(fit.kernel);
  }

  const HyperGram gram = assemble_hyper_gram(params, X);
  const Eigen::VectorXd y = gather_responses(Y, gram.pairs);
  if (method == Method::HyperKrr) {
    const KrrFit fit = fit_krr(gram, y, krr);
    return LearnedKernel::from_fit(X, fit.coefficients, 0.0, params);
  }
  const SvrModel model = fit_svr(gram, y, svr);
  return LearnedKernel::from_fit(X, model.beta, model.bias, params);
}

LearnedKernel fit_on_subset(const PointSet& X, const Eigen::MatrixXd& Y, const std::vector<Index>& subset,
                            Method method, const Hyperparams& hp, const std::optional<ScalingConfig>& scaling,
                            std::optional<DecompositionDiagnostics>* diagnostics) {
  return fit_extend(select_rows(X, subset), select_block(Y, subset, subset), method, hp, scaling, diagnostics);
}

double heldout_pair_rmse(const LearnedKernel& kernel, const PointSet& X, const Eigen::MatrixXd& Y,
                         const std::vector<Index>& inside) {
  const Index m = X.rows();
  require(Y.rows() == m && Y.cols() == m, "given kernel must align with the points");
  std::vector<bool> in(static_cast<std::size_t>(m), false);
  for (Index k : inside) in[k] = true;
  double sq = 0.0;
  long count = 0;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) {
      if (in[i] && in[j]) continue;
      const double r = kernel(X.row(i), X.row(j)) - Y(i, j);
      sq += r * r;
      ++count;
    }
  require(count > 0, "no held-out pairs to score");
  return std::sqrt(sq / static_cast<double>(count));
}

CvResult cross_validate(const PointSet& X, const Eigen::MatrixXd& Y, const std::optional<std::vector<int>>& labels,
                        Method method, const ExperimentConfig& config) {
  config.validate();
  const Index m = X.rows();
  require(m >= config.cv_folds, "labeled set is smaller than the fold count");
  require(Y.rows() == m && Y.cols() == m, "given kernel must align with the labeled points");
  const CvScoring scoring = labels ? config.scoring : CvScoring::Rmse;

  double sigma2 = mean_feature_variance(X);
  if (!(sigma2 > 0.0)) sigma2 = 1.0;
  const std::vector<int> fold = assign_folds(m, config.cv_folds, labels, config.seed);

  CvResult result;
  result.scoring = scoring;
  for (double sh : config.sigma_h2_grid)
    for (double reg : config.reg_grid) result.table.push_back({sh * sigma2, reg, 0.0, false, {}});

  parallel_for(
      0, static_cast<std::ptrdiff_t>(result.table.size()),
      [&](std::ptrdiff_t r) {
        CvRow& row = result.table[r];
        Hyperparams hp{sigma2, row.sigma_h2, row.reg, config.epsilon, config.kkt_tol};
        try {
          double total = 0.0;
          for (int f = 0; f < config.cv_folds; ++f) total += score_fold(X, Y, labels, fold, f, method, hp, scoring);
          row.score = total / config.cv_folds;
          if (!std::isfinite(row.score)) {
            row.failed = true;
            row.error = "non-finite fold score";
          }
        } catch (const Error& e) {
          row.failed = true;
          row.error = e.what();
        }
      },
      /*dynamic=*/true);

  const CvRow* best = nullptr;
  for (const auto& row : result.table) {
    if (row.failed) continue;
    if (!best || better(row.score, best->score, scoring)) {
      best = &row;
    } else if (nearly_equal(row.score, best->score)) {
      if (row.reg > best->reg || (row.reg == best->reg && row.sigma_h2 < best->sigma_h2)) best = &row;
    }
  }
  if (!best) fail(ErrorKind::PipelineFailure, "every cross-validation grid point failed to fit");
  result.best = Hyperparams{sigma2, best->sigma_h2, best->reg, config.epsilon, config.kkt_tol};
  return result;
}

ExperimentReport run_experiment(const PointSet& X, const std::optional<std::vector<int>>& labels,
                                const Eigen::MatrixXd& Y, Method method, const ExperimentConfig& config,
                                const ExperimentOverrides& overrides) {
  config.validate();
  const Index m = X.rows();
  require(Y.rows() == m && Y.cols() == m, "given kernel must be m x m");

  ExperimentReport report;
  report.method = method;
  report.config = config;
  report.split = split_dataset(m, labels, config.split, config.seed, config.cv_folds);
  const auto& lab = report.split.labeled;

  const PointSet X_lab = select_rows(X, lab);
  const Eigen::MatrixXd Y_lab = select_block(Y, lab, lab);
  std::optional<std::vector<int>> y_lab;
  if (labels) y_lab = select_labels(*labels, lab);

  ExperimentConfig cv_cfg = config;
  double sigma2 = mean_feature_variance(X_lab);
  if (!(sigma2 > 0.0)) sigma2 = 1.0;
  if (overrides.sigma_h2) cv_cfg.sigma_h2_grid = {*overrides.sigma_h2 / sigma2};
  if (overrides.reg) cv_cfg.reg_grid = {*overrides.reg};
  if (y_lab && std::set<int>(y_lab->begin(), y_lab->end()).size() < 2) cv_cfg.scoring = CvScoring::Rmse;

  auto t0 = Clock::now();
  CvResult cv = cross_validate(X_lab, Y_lab, y_lab, method, cv_cfg);
  if (overrides.sigma_h2) cv.best.sigma_h2 = *overrides.sigma_h2;
  report.seconds_cv = seconds_since(t0);
  report.selected = cv.best;
  report.cv_table = std::move(cv.table);

  t0 = Clock::now();
  std::optional<DecompositionDiagnostics> diag;
  const LearnedKernel kernel = fit_extend(X_lab, Y_lab, method, report.selected, overrides.scaling,
                                          overrides.scaling ? &diag : nullptr);
  report.seconds_fit = seconds_since(t0);
  report.scaling_diagnostics = diag;

  report.rmse_heldout_pairs = heldout_pair_rmse(kernel, X, Y, lab);
  const PointSet X_test = select_rows(X, report.split.test);
  report.definiteness = learned_gram(kernel, X_test).report;

  if (y_lab && std::set<int>(y_lab->begin(), y_lab->end()).size() >= 2) {
    const Eigen::MatrixXd g = learned_gram(kernel, X_lab).matrix;
    report.svm_c = overrides.svm_c ? *overrides.svm_c
                                   : tune_svm_c(g, *y_lab, config.svm_c_grid, config.cv_folds, config.spectrum_fix,
                                                config.seed);
    SvmConfig svm_cfg;
    svm_cfg.C = report.svm_c;
    svm_cfg.spectrum_fix = config.spectrum_fix;
    const OneVsRestSvm svm(g, *y_lab, svm_cfg);
    report.accuracy_train = svm_accuracy(svm, g, *y_lab);
    const PointSet X_unl = select_rows(X, report.split.unlabeled);
    report.accuracy_unlabeled =
        svm_accuracy(svm, learned_cross_gram(kernel, X_unl, X_lab), select_labels(*labels, report.split.unlabeled));
    report.accuracy_test =
        svm_accuracy(svm, learned_cross_gram(kernel, X_test, X_lab), select_labels(*labels, report.split.test));
  }
  report.kernel = kernel;
  return report;
}

nlohmann::json to_json(const ExperimentReport& r, bool include_timings) {
  using nlohmann::json;
  const auto& c = r.config;
  json j;
  j["schema_version"] = 1;
  j["method"] = to_string(r.method);
  j["config"] = {{"split", {c.split[0], c.split[1], c.split[2]}},
                 {"cv_folds", c.cv_folds},
                 {"sigma_h2_grid", c.sigma_h2_grid},
                 {"reg_grid", c.reg_grid},
                 {"svm_c_grid", c.svm_c_grid},
                 {"scoring", c.scoring == CvScoring::Rmse ? "rmse" : "accuracy"},
                 {"spectrum_fix", c.spectrum_fix == SpectrumFix::Clip ? "clip" : "none"},
                 {"epsilon", c.epsilon},
                 {"kkt_tol", c.kkt_tol},
                 {"seed", c.seed}};
  json hp = {{"sigma2", r.selected.sigma2}, {"sigma_h2", r.selected.sigma_h2}, {"svm_c", r.svm_c}};
  if (r.method == Method::HyperKrr) {
    hp["lambda"] = r.selected.reg;
  } else {
    hp["C"] = r.selected.reg;
    hp["epsilon"] = r.selected.epsilon;
    hp["kkt_tol"] = r.selected.kkt_tol;
  }
  j["selected_hyperparams"] = hp;
  j["rmse_heldout_pairs"] = r.rmse_heldout_pairs;
  j["accuracy_unlabeled"] = r.accuracy_unlabeled ? json(*r.accuracy_unlabeled) : json(nullptr);
  j["accuracy_test"] = r.accuracy_test ? json(*r.accuracy_test) : json(nullptr);
  j["accuracy_train"] = r.accuracy_train ? json(*r.accuracy_train) : json(nullptr);
  j["definiteness"] = {{"min_eig", r.definiteness.min_eigenvalue},
                       {"max_eig", r.definiteness.max_eigenvalue},
                       {"indefinite", r.definiteness.indefinite}};
  if (r.scaling_diagnostics) j["scaling_diagnostics"] = to_json(*r.scaling_diagnostics);
  j["split"] = {{"labeled", r.split.labeled.size()},
                {"unlabeled", r.split.unlabeled.size()},
                {"test", r.split.test.size()},
                {"stratified", r.split.stratified},
                {"warnings", r.split.warnings}};
  if (include_timings) j["timings"] = {{"cv_seconds", r.seconds_cv}, {"fit_seconds", r.seconds_fit}};
  return j;
}

void write_cv_csv(std::ostream& out, const std::vector<CvRow>& table) {
  out << "sigma_h2,reg,score,failed\n";
  out.precision(17);
  for (const auto& row : table)
    out << row.sigma_h2 << ',' << row.reg << ',' << row.score << ',' << (row.failed ? 1 : 0) << '\n';
}

double loglog_slope(const std::vector<Index>& m_values, const std::vector<double>& errors) {
  require(m_values.size() == errors.size(), "slope inputs differ in length");
  if (m_values.size() < 2) fail(ErrorKind::SlopeUndefined, "log-log slope needs at least two sample sizes");
  const auto n = static_cast<double>(m_values.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m_values.size(); ++k) {
    require(m_values[k] > 0 && errors[k] > 0.0, "slope needs positive sizes and errors");
    const double x = std::log(static_cast<double>(m_values[k]));
    const double y = std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) fail(ErrorKind::SlopeUndefined, "sample sizes must differ");
  return (n * sxy - sx * sy) / denom;
}

RateStudyReport learning_rate_study(const RateStudyConfig& config) {
  if (config.m_values.size() < 2) fail(ErrorKind::SlopeUndefined, "rate study needs at least two sample sizes");
  for (std::size_t k = 1; k < config.m_values.size(); ++k)
    require(config.m_values[k] > config.m_values[k - 1], "m_values must be strictly increasing");
  require(config.m_values.front() >= 3, "rate study sample sizes must be at least 3");
  require(config.trials >= 3, "rate study needs at least 3 trials");
  require(config.noise_sigma >= 0.0 && config.eval_pairs >= 1 && config.dim >= 1, "invalid rate study config");

  const int d = config.dim;
  const HyperKernelParams params{config.hyper.sigma2, config.hyper.sigma_h2, d};

  // Planted target: a fixed expansion over three anchor points that every
  // training sample contains, so the target lies in the span of training pairs.
  std::mt19937_64 anchor_rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PointSet anchors(3, d);
  for (Index r = 0; r < anchors.rows(); ++r)
    for (int c = 0; c < d; ++c) anchors(r, c) = normal(anchor_rng);
  std::vector<PairCoefficient> alpha;
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) alpha.push_back({i, j, normal(anchor_rng)});
  {
    const LearnedKernel raw(anchors, alpha, 0.0, params);
    double peak = 0.0;
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) peak = std::max(peak, std::abs(raw(anchors.row(i), anchors.row(j))));
    for (auto& a : alpha) a.value /= peak;
  }
  const LearnedKernel planted(anchors, alpha, 0.0, params);
  const KernelSpec rbf = GaussianRbf{1.0};
  auto target = [&](PointRef a, PointRef b) {
    return config.target == RateTarget::Planted ? planted(a, b) : eval_kernel(rbf, a, b);
  };

  RateStudyReport report;
  for (Index m : config.m_values) {
    std::vector<double> errs(static_cast<std::size_t>(config.trials), 0.0);
    try {
      parallel_for(
          0, config.trials,
          [&](std::ptrdiff_t t) {
            std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                              static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(t), 0x5eedU};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> nd(0.0, 1.0);
            PointSet X(m, d);
            for (Index r = 0; r < m; ++r)
              for (int c = 0; c < d; ++c) X(r, c) = nd(rng);
            if (config.target == RateTarget::Planted) X.topRows(3) = anchors;

            Eigen::MatrixXd Y(m, m);
            for (Index i = 0; i < m; ++i)
              for (Index j = i; j < m; ++j) {
                const double noise = config.noise_sigma > 0.0 ? config.noise_sigma * nd(rng) : 0.0;
                Y(i, j) = target(X.row(i), X.row(j)) + noise;
                Y(j, i) = Y(i, j);
              }
            const LearnedKernel learned = fit_extend(X, Y, config.method, config.hyper);

            Eigen::VectorXd pred(config.eval_pairs);
            Eigen::VectorXd truth(config.eval_pairs);
            Point a(d);
            Point b(d);
            for (Index e = 0; e < config.eval_pairs; ++e) {
              for (int c = 0; c < d; ++c) a(c) = nd(rng);
              for (int c = 0; c < d; ++c) b(c) = nd(rng);
              pred(e) = learned(a, b);
              truth(e) = target(a, b);
            }
            errs[t] = rmse(pred, truth);
          },
          /*dynamic=*/true);
    } catch (const Error& e) {
      report.complete = false;
      report.failure = "m = " + std::to_string(m) + ": " + e.what();
      break;
    }
    report.m_values.push_back(m);
    report.errors.push_back(errs);
    report.median_errors.push_back(median(errs));
  }
  if (report.m_values.size() >= 2) report.loglog_slope = loglog_slope(report.m_values, report.median_errors);
  return report;
}

nlohmann::json to_json(const RateStudyReport& r) {
  nlohmann::json j;
  j["m_values"] = r.m_values;
  j["median_errors"] = r.median_errors;
  j["errors"] = r.errors;
  j["loglog_slope"] = r.loglog_slope;
  j["complete"] = r.complete;
  if (!r.complete) j["failure"] = r.failure;
  return j;
}

void write_rate_csv(std::ostream& out, const RateStudyReport& r) {
  out << "m,median_error\n";
  out.precision(17);
  for (std::size_t k = 0; k < r.m_values.size(); ++k) out << r.m_values[k] << ',' << r.median_errors[k] << '\n';
}

}  // namespace hyperkern
