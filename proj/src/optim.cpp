#include "aq/optim.hpp"

#include <cmath>
#include <limits>

namespace aq {

void Optimizer::reset() {
  m_.resize(0);
  v_.resize(0);
  t_ = 0;
  history_.clear();
}

VectorXd Optimizer::lbfgs_direction(const VectorXd& grad) const {
  VectorXd q = -grad;
  if (history_.empty()) return q;
  std::vector<double> alpha(history_.size());
  for (std::size_t i = history_.size(); i-- > 0;) {
    const Curvature& c = history_[i];
    alpha[i] = c.rho * c.s.dot(q);
    q -= alpha[i] * c.y;
  }
  const Curvature& last = history_.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();  // H0 = gamma I
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const Curvature& c = history_[i];
    const double beta = c.rho * c.y.dot(q);
    q += (alpha[i] - beta) * c.s;
  }
  return q;
}

namespace {

struct Probe {
  double f;
  double dphi;  // g(theta + a d) . d
};

}  // namespace

StepReport Optimizer::step(const LossAndGrad& f, VectorXd& theta, double& value,
                           VectorXd& grad) {
  StepReport report;

  if (cfg_.kind == OptimizerConfig::Kind::adam) {
    if (t_ == 0) {
      m_ = VectorXd::Zero(theta.size());
      v_ = VectorXd::Zero(theta.size());
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() +
         (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const VectorXd mhat = m_ / bc1;
    const VectorXd vhat = v_ / bc2;
    theta -= cfg_.lr *
             mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                VectorXd::Constant(theta.size(), cfg_.adam_eps));
    value = f(theta, &grad);
    report.value = value;
    return report;
  }

  // L-BFGS with a strong-Wolfe line search (bracket + zoom).
  const VectorXd theta0 = theta;
  const double f0 = value;
  const VectorXd g0 = grad;
  VectorXd dir = lbfgs_direction(g0);
  double dphi0 = g0.dot(dir);
  if (!(dphi0 < 0.0)) {  // not a descent direction; drop history
    history_.clear();
    dir = -g0;
    dphi0 = g0.dot(dir);
  }

  const double c1 = cfg_.wolfe_c1, c2 = cfg_.wolfe_c2;
  VectorXd g_trial;
  auto probe = [&](double a) -> Probe {
    theta = theta0 + a * dir;
    const double fv = f(theta, &g_trial);
    return {fv, g_trial.dot(dir)};
  };

  bool found = false;
  double a_acc = 0.0, f_acc = f0;
  VectorXd g_acc;

  if (dphi0 < 0.0) {
    // bracketing phase
    double a_prev = 0.0, f_prev = f0, dphi_prev = dphi0;
    double a = 1.0;
    double lo = 0, hi = 0, f_lo = f0, dphi_lo = dphi0;
    bool bracketed = false;
    int evals = 0;
    for (; evals < cfg_.max_linesearch; ++evals) {
      Probe pr = probe(a);
      if (!std::isfinite(pr.f) || pr.f > f0 + c1 * a * dphi0 ||
          (evals > 0 && pr.f >= f_prev)) {
        lo = a_prev; hi = a; f_lo = f_prev; dphi_lo = dphi_prev;
        bracketed = true;
        break;
      }
      if (std::abs(pr.dphi) <= -c2 * dphi0) {
        found = true;
        a_acc = a; f_acc = pr.f; g_acc = g_trial;
        break;
      }
      if (pr.dphi >= 0.0) {
        lo = a; hi = a_prev; f_lo = pr.f; dphi_lo = pr.dphi;
        bracketed = true;
        break;
      }
      a_prev = a; f_prev = pr.f; dphi_prev = pr.dphi;
      a *= 2.0;
    }
    // zoom phase
    if (!found && bracketed) {
      for (; evals < cfg_.max_linesearch; ++evals) {
        const double a_mid = 0.5 * (lo + hi);
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
        Probe pr = probe(a_mid);
        if (!std::isfinite(pr.f) || pr.f > f0 + c1 * a_mid * dphi0 || pr.f >= f_lo) {
          hi = a_mid;
        } else {
          if (std::abs(pr.dphi) <= -c2 * dphi0) {
            found = true;
            a_acc = a_mid; f_acc = pr.f; g_acc = g_trial;
            break;
          }
          if (pr.dphi * (hi - lo) >= 0.0) hi = lo;
          lo = a_mid; f_lo = pr.f; dphi_lo = pr.dphi;
        }
      }
      // a sufficient-decrease point is still acceptable if zoom ran dry
      if (!found && f_lo < f0 && lo > 0.0) {
        Probe pr = probe(lo);
        found = true;
        a_acc = lo; f_acc = pr.f; g_acc = g_trial;
      }
    }
  }

  if (!found) {
    // fallback: steepest-descent update of length fallback_step
    report.linesearch_fallback = true;
    const double gn = g0.norm();
    if (gn == 0.0) {
      theta = theta0;
      value = f0;
      grad = g0;
      report.value = f0;
      return report;
    }
    theta = theta0 - (cfg_.fallback_step / gn) * g0;
    value = f(theta, &grad);
    report.value = value;
    history_.clear();
    return report;
  }

  theta = theta0 + a_acc * dir;
  // curvature update
  const VectorXd s = theta - theta0;
  const VectorXd y = g_acc - g0;
  const double sy = s.dot(y);
  if (sy > 1e-12 * s.norm() * y.norm()) {
    history_.push_back({s, y, 1.0 / sy});
    while (static_cast<int>(history_.size()) > cfg_.memory) history_.pop_front();
  }
  value = f_acc;
  grad = g_acc;
  report.value = f_acc;
  return report;
}

}  // namespace aq
