#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hyperkern/error.hpp"
#include "hyperkern/hyper_kernel.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

using namespace hyperkern;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) p(k++) = x;
  return p;
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("scaled Gaussian reference values") {
  const double pi = 3.14159265358979323846;
  CHECK(scaled_gaussian(pt({0.4}), pt({0.4}), 1.0 / (2.0 * pi), 1) == doctest::Approx(1.0).epsilon(1e-15));
  // (1 / 2pi) exp(-1/2), squared norm
  CHECK(rel_close(scaled_gaussian(pt({0.0, 0.0}), pt({1.0, 0.0}), 1.0, 2), 0.0965323526300539075419725980099, 1e-14));
  CHECK(scaled_gaussian(pt({0.0}), pt({10.0}), 0.5, 1) > 0.0);
  CHECK_THROWS_AS(scaled_gaussian(pt({0.0}), pt({0.0, 1.0}), 1.0, 1), Error);
}

TEST_CASE("hyper-kernel reference value") {
  const HyperKernelParams p{1.0, 1.0, 1};
  // (1/(2 pi)) (4 pi)^(-1/2) exp(-1/4)
  const double v = eval_hyper_kernel(p, pt({0.0}), pt({0.0}), pt({1.0}), pt({1.0}));
  CHECK(rel_close(v, 0.0349656478351549342606879179733, 1e-12));
}

TEST_CASE("hyper-kernel matches the long-double oracle and its symmetries") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 5;
    const HyperKernelParams p{u(rng), u(rng), d};
    const PointSet X = oracle::random_points(4, d, 100 + static_cast<std::uint64_t>(trial));
    const Point a = X.row(0), b = X.row(1), c = X.row(2), e = X.row(3);
    const double v = eval_hyper_kernel(p, a, b, c, e);
    CHECK(v > 0.0);
    CHECK(rel_close(v, oracle::hyper_kernel(p.sigma2, p.sigma_h2, a, b, c, e), 1e-12));
    CHECK(rel_close(v, eval_hyper_kernel(p, b, a, c, e), 1e-12));
    CHECK(rel_close(v, eval_hyper_kernel(p, a, b, e, c), 1e-12));
    CHECK(rel_close(v, eval_hyper_kernel(p, c, e, a, b), 1e-12));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((HyperKernelParams{0.0, 1.0, 1}.validate()), Error);
  CHECK_THROWS_AS((HyperKernelParams{1.0, -1.0, 1}.validate()), Error);
  CHECK_THROWS_AS((HyperKernelParams{1.0, 1.0, 0}.validate()), Error);
  const HyperKernelParams p{1.0, 1.0, 2};
  CHECK_THROWS_AS(eval_hyper_kernel(p, pt({0.0}), pt({0.0}), pt({0.0}), pt({0.0})), Error);
}

TEST_CASE("pair index") {
  CHECK(pair_index(1, 1, 5) == 1);
  CHECK(pair_index(2, 3, 4) == 7);
  CHECK(pair_index(6, 6, 6) == 36);
  CHECK_THROWS_AS(pair_index(0, 1, 3), Error);
  CHECK_THROWS_AS(pair_index(1, 4, 3), Error);
  for (std::size_t m = 1; m <= 64; ++m)
    for (std::size_t i = 1; i <= m; ++i)
      for (std::size_t j = 1; j <= m; ++j) {
        const auto [i2, j2] = pair_from_index(pair_index(i, j, m), m);
        REQUIRE(i2 == i);
        REQUIRE(j2 == j);
      }
  const PairList pairs = all_pairs(3);
  REQUIRE(pairs.size() == 9);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    CHECK(pair_index(pairs[k].first + 1, pairs[k].second + 1, 3) == k + 1);
}

TEST_CASE("assembly over all pairs") {
  const HyperKernelParams p{1.0, 1.0, 2};
  const HyperGram one = assemble_hyper_gram(p, oracle::random_points(1, 2, 9));
  REQUIRE(one.size() == 1);
  CHECK(one.entries(0, 0) > 0.0);

  const PointSet X = oracle::random_points(5, 2, 77);
  const HyperGram g = assemble_hyper_gram(p, X);
  REQUIRE(g.size() == 25);
  CHECK(g.entries == g.entries.transpose());
  CHECK((g.entries.array() > 0.0).all());
  CHECK(oracle::min_eigenvalue(g.entries) >= -1e-8 * oracle::max_eigenvalue(g.entries));
  const Eigen::MatrixXd ref = oracle::hyper_gram(1.0, 1.0, X, oracle::all_pairs(5));
  CHECK(((g.entries - ref).cwiseAbs().array() <= 1e-12 * ref.cwiseAbs().array()).all());
}

TEST_CASE("assembly over an explicit landmark pair subset") {
  const HyperKernelParams p{0.8, 1.5, 3};
  const PointSet X = oracle::random_points(6, 3, 31);
  PairList pairs;
  for (Index i = 0; i < 6; ++i)
    for (Index l : {1, 4}) pairs.push_back({i, l});
  const HyperGram g = assemble_hyper_gram(p, X, std::span<const IndexPair>(pairs));
  CHECK(g.size() == 12);
  CHECK(g.pairs == pairs);
  CHECK(g.entries == g.entries.transpose());
  CHECK_THROWS_AS(assemble_hyper_gram(p, X, std::span<const IndexPair>(pairs), AssemblyLimits{10}), Error);
  try {
    assemble_hyper_gram(p, X, std::nullopt, AssemblyLimits{10});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResourceLimit);
  }
  PairList bad{{0, 6}};
  CHECK_THROWS_AS(assemble_hyper_gram(p, X, std::span<const IndexPair>(bad)), Error);
}

TEST_CASE("assembly is equivariant under point permutation") {
  const HyperKernelParams p{1.0, 0.5, 2};
  const Index m = 5;
  const PointSet X = oracle::random_points(m, 2, 13);
  std::vector<Index> perm(m);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointSet Xp(m, 2);
  for (Index r = 0; r < m; ++r) Xp.row(r) = X.row(perm[r]);
  const HyperGram g = assemble_hyper_gram(p, X);
  const HyperGram gp = assemble_hyper_gram(p, Xp);
  for (Index a = 0; a < m * m; ++a)
    for (Index b = 0; b < m * m; ++b) {
      const Index pa = perm[a / m] * m + perm[a % m];
      const Index pb = perm[b / m] * m + perm[b % m];
      REQUIRE(rel_close(gp.entries(a, b), g.entries(pa, pb), 1e-13));
    }
}

TEST_CASE("jitter, responses, coefficient matrix") {
  const HyperKernelParams p{1.0, 1.0, 1};
  const HyperGram g = assemble_hyper_gram(p, oracle::random_points(3, 1, 1));
  const double j0 = base_jitter(g.entries);
  CHECK(j0 == doctest::Approx(1e-10 * g.entries.trace() / 9.0));
  const HyperGram gj = with_jitter(with_jitter(g, 1e-3), 2e-3);
  CHECK(gj.jitter_applied == doctest::Approx(3e-3));
  CHECK((gj.entries - g.entries).diagonal().isConstant(3e-3, 1e-12));

  Eigen::MatrixXd Y(2, 2);
  Y << 1, 2, 3, 4;
  const PairList pairs = all_pairs(2);
  const Eigen::VectorXd y = gather_responses(Y, pairs);
  CHECK(y(0) == 1);
  CHECK(y(1) == 2);
  CHECK(y(2) == 3);
  CHECK(y(3) == 4);

  CoefficientField f;
  f.pairs = {{0, 1}, {2, 2}};
  f.values = Eigen::Vector2d(0.5, -1.5);
  const Eigen::MatrixXd B = f.as_matrix(3);
  CHECK(B(0, 1) == 0.5);
  CHECK(B(2, 2) == -1.5);
  CHECK(B.cwiseAbs().sum() == doctest::Approx(2.0));
}

TEST_CASE("binary cache round trip") {
  const HyperKernelParams p{1.0, 1.0, 2};
  const HyperGram g = assemble_hyper_gram(p, oracle::random_points(3, 2, 4));
  const auto path = std::filesystem::temp_directory_path() / "hyperkern_test_gram.bin";
  save_hyper_gram(path, g.entries);
  CHECK(std::filesystem::file_size(path) == 8 + 81 * 8);
  CHECK(load_hyper_gram(path) == g.entries);
  std::filesystem::resize_file(path, 20);
  CHECK_THROWS_AS(load_hyper_gram(path), Error);
  std::filesystem::remove(path);
}
