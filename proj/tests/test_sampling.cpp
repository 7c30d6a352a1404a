#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aq/sampling.hpp"
#include "test_util.hpp"

using namespace aq;
using aqtest::PerAxisPoly;
using aqtest::rel_err;

TEST_CASE("halton radical-inverse values in bases 2 and 3") {
  const MatrixXd h1 = halton_points(3, 1);
  CHECK(h1(0, 0) == 0.5);
  CHECK(h1(0, 1) == 0.25);
  CHECK(h1(0, 2) == 0.75);

  const MatrixXd h2 = halton_points(2, 2);
  CHECK(h2(0, 0) == 0.5);
  CHECK(h2(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(h2(0, 1) == 0.25);
  CHECK(h2(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("halton coordinates stay in (0,1) and prefixes are stable") {
  const MatrixXd big = halton_points(500, 3);
  CHECK((big.array() > 0.0).all());
  CHECK((big.array() < 1.0).all());
  const MatrixXd small = halton_points(200, 3);
  CHECK(big.leftCols(200) == small);
}

TEST_CASE("latin hypercube stratification and determinism") {
  MatrixXd pts = latin_hypercube(4, 1, 99);
  std::vector<double> xs(pts.data(), pts.data() + 4);
  std::sort(xs.begin(), xs.end());
  for (int k = 0; k < 4; ++k) {
    CHECK(xs[k] >= k / 4.0);
    CHECK(xs[k] < (k + 1) / 4.0);
  }

  CHECK(latin_hypercube(64, 2, 1234) == latin_hypercube(64, 2, 1234));
  CHECK(latin_hypercube(64, 2, 1234) != latin_hypercube(64, 2, 1235));

  // midpoint placement centres every stratum
  const MatrixXd mid = latin_hypercube(8, 1, 5, true);
  for (int i = 0; i < 8; ++i) {
    const double frac = mid(0, i) * 8.0 - std::floor(mid(0, i) * 8.0);
    CHECK(frac == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("latin hypercube mean estimate is within stratified 3 sigma") {
  // f(x,y) = x with n=100 strata: Var = 1/(12 n^3); averaged over 50 seeds
  const long n = 100;
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MatrixXd pts = latin_hypercube(n, 2, seed);
    mean += pts.row(0).mean();
  }
  mean /= 50.0;
  const double sigma = std::sqrt(1.0 / (12.0 * n * n * n) / 50.0);
  CHECK(std::abs(mean - 0.5) <= 3.0 * sigma);
}

TEST_CASE("monte carlo determinism and CLT-scale accuracy") {
  CHECK(mc_points(100, 2, 7) == mc_points(100, 2, 7));
  CHECK(mc_points(100, 2, 7) != mc_points(100, 2, 8));

  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    mean += mc_points(1000, 1, seed).row(0).mean();
  mean /= 200.0;
  CHECK(std::abs(mean - 0.5) <= 0.003);  // 3 sigma / sqrt(200) is ~1.9e-3
}

TEST_CASE("scattered sample integrates constants exactly") {
  VectorXd lo(2), w(2);
  lo << -1.0, 2.0;
  w << 2.0, 0.5;
  const std::vector<Box> domain = {Box(lo, w)};
  const CompositeQuadrature cq =
      scatter_sample(mc_points(250, 2, 3), mc_points(400, 2, 4), domain);
  CHECK(cq.primal_weights.size() == 250);
  CHECK(cq.reference_weights.size() == 400);
  CHECK(cq.primal_weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  for (Eigen::Index i = 0; i < 250; ++i) {
    CHECK(domain[0].contains(cq.primal_points.col(i)));
    CHECK(cq.primal_weights[i] > 0.0);
  }
}

TEST_CASE("uniform composite counts, exactness and weight sum") {
  const CompositeQuadrature cq = uniform_composite(2, 7, {unit_box(2)});
  CHECK(cq.primal_weights.size() == 196);
  CHECK(cq.primal_weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(cq.primal_weights.minCoeff() > 0.0);

  SplitMix64 rng(50);
  const PerAxisPoly poly = PerAxisPoly::random(2, 2 * 7 - 1, rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cq.primal_weights.size(); ++i)
    acc += cq.primal_weights[i] * poly(cq.primal_points.col(i));
  CHECK(rel_err(acc, poly.exact_integral(unit_box(2))) <= 1e-12);
}

TEST_CASE("nearest-rank quantile and budget matching examples") {
  CHECK(nearest_rank_quantile({140, 140, 140, 140}) == 140);
  std::vector<long> ramp;
  for (long v = 10; v <= 100; v += 10) ramp.push_back(v);
  CHECK(nearest_rank_quantile(ramp) == 90);
  CHECK_THROWS_AS(nearest_rank_quantile({}), std::invalid_argument);

  const PointBudget b = match_budget({140, 140, 140}, {200, 200, 200},
                                     {120, 130, 140}, 2);
  CHECK(b.primal_points == 140);
  CHECK(b.reference_points == 200);
  CHECK(b.uniform_partitions == 144);  // 12^2 is the nearest square >= 140
  CHECK(b.side(2) == 12);

  const PointBudget b1 = match_budget({140}, {200}, {140}, 1);
  CHECK(b1.uniform_partitions == 140);
}

TEST_CASE("strategy names round trip") {
  for (Strategy s : {Strategy::aq, Strategy::uniform, Strategy::mc, Strategy::qmc_lhc,
                     Strategy::qmc_halton})
    CHECK(strategy_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(strategy_from_string("bogus"), std::invalid_argument);
}
