#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aq/mlp.hpp"
#include "aq/sampling.hpp"

using namespace aq;

namespace {

MatrixXd random_points(int dim, int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  MatrixXd pts(dim, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) pts(j, i) = 2.0 * rng.uniform() - 1.0;
  return pts;
}

}  // namespace

TEST_CASE("glorot init hits the published parameter count and bounds") {
  const MlpArch arch{2, 1, 4, 25};
  CHECK(arch.param_count() == 2051);

  const MlpParams a = init_glorot(arch, 7);
  const MlpParams b = init_glorot(arch, 7);
  CHECK(a.values == b.values);
  CHECK(init_glorot(arch, 8).values != a.values);

  for (int l = 0; l < arch.n_affine(); ++l) {
    const double bound = std::sqrt(6.0 / (arch.cols(l) + arch.rows(l)));
    CHECK(a.weight(l).cwiseAbs().maxCoeff() <= bound);
    CHECK(a.bias(l).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward of the zero network is zero and stays finite far out") {
  MlpArch arch{2, 1, 2, 5};
  MlpParams p;
  p.arch = arch;
  p.values = VectorXd::Zero(arch.param_count());
  VectorXd x(2);
  x << 0.3, -0.7;
  CHECK(forward(p, x)[0] == 0.0);

  const MlpParams q = init_glorot(arch, 3);
  x << 1e6, -1e6;
  CHECK(std::isfinite(forward(q, x)[0]));
}

TEST_CASE("single-neuron network matches the closed form") {
  MlpArch arch{1, 1, 1, 1};
  MlpParams p;
  p.arch = arch;
  p.values.resize(arch.param_count());
  const double w1 = 1.3, b1 = -0.2, w2 = 0.7, b2 = 0.05;
  p.values << w1, b1, w2, b2;

  VectorXd x(1);
  x << 0.4;
  const double z = w1 * x[0] + b1;
  CHECK(forward(p, x)[0] == doctest::Approx(w2 * std::tanh(z) + b2).epsilon(1e-15));

  const SpatialJet jet = spatial_jet(p, x);
  const double th = std::tanh(z);
  const double d1 = 1.0 - th * th;
  CHECK(jet.value[0] == forward(p, x)[0]);  // bitwise
  CHECK(jet.gradient(0, 0) == doctest::Approx(w2 * w1 * d1).epsilon(1e-14));
  // tanh'' = -2 tanh (1 - tanh^2)
  CHECK(jet.hessian[0](0, 0) ==
        doctest::Approx(w2 * w1 * w1 * (-2.0 * th * d1)).epsilon(1e-13));
}

TEST_CASE("spatial jet matches central finite differences") {
  const MlpArch arch{2, 1, 3, 12};
  const MlpParams p = init_glorot(arch, 21);
  const MatrixXd pts = random_points(2, 20, 5);
  const double h = 1e-5;

  for (int i = 0; i < 20; ++i) {
    const VectorXd x = pts.col(i);
    const SpatialJet jet = spatial_jet(p, x);
    CHECK(jet.value[0] == forward(p, x)[0]);

    for (int a = 0; a < 2; ++a) {
      VectorXd xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double fd = (forward(p, xp)[0] - forward(p, xm)[0]) / (2.0 * h);
      CHECK(std::abs(jet.gradient(0, a) - fd) /
                std::max(1.0, std::abs(fd)) <=
            1e-6);
      // second derivatives against differences of the analytic gradient
      const SpatialJet jp = spatial_jet(p, xp);
      const SpatialJet jm = spatial_jet(p, xm);
      for (int b = 0; b < 2; ++b) {
        const double fd2 = (jp.gradient(0, b) - jm.gradient(0, b)) / (2.0 * h);
        CHECK(std::abs(jet.hessian[0](a, b) - fd2) /
                  std::max(1.0, std::abs(fd2)) <=
              1e-6);
      }
    }
  }
}

TEST_CASE("hessian channels are symmetric by construction") {
  const MlpArch arch{2, 1, 2, 8};
  const MlpParams p = init_glorot(arch, 33);
  const MatrixXd pts = random_points(2, 100, 6);
  for (int i = 0; i < 100; ++i) {
    const SpatialJet jet = spatial_jet(p, pts.col(i));
    CHECK((jet.hessian[0] - jet.hessian[0].transpose()).cwiseAbs().maxCoeff() <=
          1e-12);
  }
}

TEST_CASE("vjp parameter gradients match finite differences per channel") {
  const MlpArch arch{2, 1, 2, 7};
  const MlpParams p = init_glorot(arch, 55);
  const MatrixXd X = random_points(2, 9, 8);
  const int d = 2;
  SplitMix64 rng(77);
  VectorXd wq(9);
  for (int i = 0; i < 9; ++i) wq[i] = 0.5 + rng.uniform();

  // three scalar functionals touching different jet channels:
  //   sum w u, sum w du/dx1, sum w laplace(u)
  auto functional = [&](const MlpParams& params, int which) {
    const BatchJets jets = jet_forward(params, X, JetOrder::hessian);
    switch (which) {
      case 0: return wq.dot(jets.value.row(0).transpose());
      case 1: return wq.dot(jets.grad[1].row(0).transpose());
      default:
        return wq.dot((jets.hess[tri_index(0, 0, d)].row(0) +
                       jets.hess[tri_index(1, 1, d)].row(0))
                          .transpose());
    }
  };

  for (int which = 0; which < 3; ++which) {
    JetTrace trace;
    jet_forward(p, X, JetOrder::hessian, &trace);
    BatchJets seeds;
    if (which == 0) {
      seeds.value = wq.transpose();
    } else if (which == 1) {
      seeds.grad.resize(d);
      seeds.grad[1] = wq.transpose();
    } else {
      seeds.hess.resize(tri_count(d));
      seeds.hess[tri_index(0, 0, d)] = wq.transpose();
      seeds.hess[tri_index(1, 1, d)] = wq.transpose();
    }
    const VectorXd grad = jet_vjp(p, trace, seeds);

    SplitMix64 dir_rng(which + 1);
    for (int trial = 0; trial < 5; ++trial) {
      VectorXd v(p.values.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 2.0 * dir_rng.uniform() - 1.0;
      v.normalize();
      const double eps = 1e-5;
      MlpParams pp = p, pm = p;
      pp.values += eps * v;
      pm.values -= eps * v;
      const double fd = (functional(pp, which) - functional(pm, which)) / (2.0 * eps);
      CHECK(std::abs(grad.dot(v) - fd) / std::max(1.0, std::abs(fd)) <= 1e-6);
    }
  }
}

TEST_CASE("zero output weights freeze the hidden-layer gradient blocks") {
  const MlpArch arch{2, 1, 2, 6};
  MlpParams p = init_glorot(arch, 9);
  p.values.segment(p.weight_offset(2), 6).setZero();  // output weights

  JetTrace trace;
  jet_forward(p, random_points(2, 5, 10), JetOrder::value, &trace);
  BatchJets seeds;
  seeds.value = Eigen::RowVectorXd::Ones(5);
  const VectorXd grad = jet_vjp(p, trace, seeds);

  // everything upstream of the zero output map has zero gradient
  CHECK(grad.head(p.weight_offset(2)).cwiseAbs().maxCoeff() == 0.0);
  // the output layer itself still learns
  CHECK(grad.tail(arch.rows(2) * arch.cols(2) + 1).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoint files round trip and reject corruption") {
  namespace fs = std::filesystem;
  const MlpArch arch{1, 1, 2, 4};
  const MlpParams p = init_glorot(arch, 4242);
  const std::string path = (fs::temp_directory_path() / "aq_ckpt_test.bin").string();
  save_checkpoint(p, path);
  const MlpParams q = load_checkpoint(path);
  CHECK(q.values == p.values);
  CHECK(q.seed == p.seed);
  CHECK(q.arch.width == 4);

  std::FILE* f = std::fopen(path.c_str(), "r+b");
  std::fputs("XX", f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  fs::remove(path);
}
