#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>

namespace aq {

using Eigen::VectorXd;

/// Scalar objective with gradient; `grad` may be null when only the value
/// is needed (line-search probes still request both here).
using LossAndGrad = std::function<double(const VectorXd& theta, VectorXd* grad)>;

struct OptimizerConfig {
  enum class Kind { adam, lbfgs };
  Kind kind = Kind::lbfgs;

  // adam
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // lbfgs
  int memory = 20;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch = 40;
  double fallback_step = 1e-3;
};

struct StepReport {
  double value = 0.0;
  bool linesearch_fallback = false;
};

/// Full-batch optimizer. The caller owns the current (value, gradient)
/// pair so an epoch costs one accepted step plus any line-search probes.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  /// One accepted step from (theta, value, grad); all three are updated
  /// in place to the new point.
  StepReport step(const LossAndGrad& f, VectorXd& theta, double& value,
                  VectorXd& grad);

  /// Drops accumulated curvature / moment state.
  void reset();

  const OptimizerConfig& config() const { return cfg_; }

 private:
  VectorXd lbfgs_direction(const VectorXd& grad) const;

  OptimizerConfig cfg_;
  // adam state
  VectorXd m_, v_;
  long t_ = 0;
  // lbfgs state
  struct Curvature {
    VectorXd s, y;
    double rho;
  };
  std::deque<Curvature> history_;
};

}  // namespace aq
