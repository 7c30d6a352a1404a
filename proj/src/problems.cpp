#include "aq/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace aq {

void Problem::validate() const {
  if (domain.empty()) throw std::invalid_argument("Problem: empty domain");
  const int d = dim();
  for (const Box& b : domain)
    if (b.dim() != d) throw std::invalid_argument("Problem: mixed domain dimensions");
  if (has_boundary) {
    if (gamma_d <= 0.0) throw std::invalid_argument("Problem: penalty must be positive");
    if (domain.size() != 1)
      throw std::invalid_argument("Problem: boundary terms need a single-box domain");
    if (!dirichlet) throw std::invalid_argument("Problem: missing boundary data");
  }
  if (kind == PdeKind::advection_diffusion && beta.size() != d)
    throw std::invalid_argument("Problem: advection velocity dimension mismatch");
}

namespace {

// atan profile along the distance from a centre: v(x) = atan(k (rho - c))
struct RadialAtan {
  double k, c, x0, y0;

  double rho(double x, double y) const { return std::hypot(x - x0, y - y0); }

  double value(double x, double y) const { return std::atan(k * (rho(x, y) - c)); }

  // gradient; zero at the centre where the profile has a removable kink
  void grad(double x, double y, double& gx, double& gy) const {
    const double r = rho(x, y);
    if (r < 1e-300) {
      gx = gy = 0.0;
      return;
    }
    const double s = k * (r - c);
    const double f = k / (1.0 + s * s) / r;
    gx = f * (x - x0);
    gy = f * (y - y0);
  }

  // laplacian = u''(rho) + u'(rho)/rho
  double laplacian(double x, double y) const {
    const double r = rho(x, y);
    const double s = k * (r - c);
    const double q = 1.0 + s * s;
    return -2.0 * k * k * s / (q * q) + k / (q * r);
  }

  MatrixXd hess(double x, double y) const {
    const double r = rho(x, y);
    const double s = k * (r - c);
    const double q = 1.0 + s * s;
    const double d1 = k / q;                    // du/drho
    const double d2 = -2.0 * k * k * s / (q * q);  // d2u/drho2
    const double X = x - x0, Y = y - y0;
    MatrixXd H(2, 2);
    H(0, 0) = d2 * X * X / (r * r) + d1 * Y * Y / (r * r * r);
    H(1, 1) = d2 * Y * Y / (r * r) + d1 * X * X / (r * r * r);
    H(0, 1) = H(1, 0) = (d2 - d1 / r) * X * Y / (r * r);
    return H;
  }
};

}  // namespace

Problem make_fa_arctan_well() {
  Problem p;
  p.name = "fa-arctan-well";
  p.domain = {unit_box(2)};
  p.kind = PdeKind::fit;
  p.has_boundary = false;

  const RadialAtan t{200.0, 0.2, 0.35, 0.45};
  p.exact = [t](const MatrixXd& pts) {
    VectorXd v(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) v[i] = t.value(pts(0, i), pts(1, i));
    return v;
  };
  p.exact_grad = [t](const MatrixXd& pts) {
    MatrixXd g(2, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i)
      t.grad(pts(0, i), pts(1, i), g(0, i), g(1, i));
    return g;
  };
  p.exact_hess = [t](const VectorXd& x) { return t.hess(x[0], x[1]); };
  return p;
}

Problem make_adv_diff_1d(double eps, double gamma) {
  if (eps <= 0.0) throw std::invalid_argument("make_adv_diff_1d: eps must be positive");
  Problem p;
  p.name = "adv-diff-1d";
  p.domain = {interval(-1.0, 1.0)};
  p.kind = PdeKind::advection_diffusion;
  p.epsilon = eps;
  p.beta = VectorXd::Ones(1);
  p.gamma_d = gamma;
  p.has_boundary = true;

  p.source = [](const MatrixXd& pts) { return VectorXd::Ones(pts.cols()); };
  p.dirichlet = [](const MatrixXd& pts) { return VectorXd::Zero(pts.cols()); };

  const double denom = 1.0 - std::exp(-2.0 / eps);
  p.exact = [eps, denom](const MatrixXd& pts) {
    VectorXd v(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double x = pts(0, i);
      v[i] = 2.0 * (1.0 - std::exp((x - 1.0) / eps)) / denom + x - 1.0;
    }
    return v;
  };
  p.exact_grad = [eps, denom](const MatrixXd& pts) {
    MatrixXd g(1, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double x = pts(0, i);
      g(0, i) = 1.0 - 2.0 * std::exp((x - 1.0) / eps) / (eps * denom);
    }
    return g;
  };
  p.exact_hess = [eps, denom](const VectorXd& x) {
    MatrixXd H(1, 1);
    H(0, 0) = -2.0 * std::exp((x[0] - 1.0) / eps) / (eps * eps * denom);
    return H;
  };
  return p;
}

Problem make_poisson_arc_wavefront(double gamma) {
  Problem p;
  p.name = "poisson-arc";
  p.domain = {unit_box(2)};
  p.kind = PdeKind::poisson;
  p.gamma_d = gamma;
  p.has_boundary = true;

  const RadialAtan u{100.0, 0.7, -0.05, -0.05};
  auto values = [u](const MatrixXd& pts) {
    VectorXd v(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) v[i] = u.value(pts(0, i), pts(1, i));
    return v;
  };
  p.exact = values;
  p.dirichlet = values;
  // -laplace(u) = f, residual form is laplace(v) + f
  p.source = [u](const MatrixXd& pts) {
    VectorXd f(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i)
      f[i] = -u.laplacian(pts(0, i), pts(1, i));
    return f;
  };
  p.exact_grad = [u](const MatrixXd& pts) {
    MatrixXd g(2, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i)
      u.grad(pts(0, i), pts(1, i), g(0, i), g(1, i));
    return g;
  };
  p.exact_hess = [u](const VectorXd& x) { return u.hess(x[0], x[1]); };
  return p;
}

Problem make_problem(const std::string& name, double epsilon, double gamma) {
  if (name == "fa-arctan-well") return make_fa_arctan_well();
  if (name == "adv-diff-1d") return make_adv_diff_1d(epsilon, gamma);
  if (name == "poisson-arc") return make_poisson_arc_wavefront(gamma);
  throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace aq
