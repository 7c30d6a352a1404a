#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "aq/geometry.hpp"

namespace aq {

/// Thrown when an integrand produces a non-finite value; carries the point.
class evaluation_error : public std::runtime_error {
 public:
  evaluation_error(const std::string& what, VectorXd point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const VectorXd& point() const { return point_; }

 private:
  VectorXd point_;
};

/// Gauss-Legendre rule on [0,1]: nodes strictly increasing in (0,1),
/// weights positive and summing to 1, exact on degree <= 2*order - 1.
struct Rule1D {
  int order = 0;
  VectorXd nodes;
  VectorXd weights;
};

/// Tensor product of a Rule1D over [0,1]^dim. One point per column.
struct TensorRule {
  int dim = 0;
  int order = 0;
  MatrixXd points;    // dim x order^dim
  VectorXd weights;   // order^dim

  Eigen::Index size() const { return weights.size(); }
};

/// Primal (training) rule paired with a richer reference rule.
struct RulePair {
  TensorRule primal;
  TensorRule reference;
};

/// Primal and reference point/weight sets accumulated in physical space
/// over a partition. Points are stored cell-major, one column per point.
struct CompositeQuadrature {
  int dim = 0;
  long n_cells = 0;
  MatrixXd primal_points;
  VectorXd primal_weights;
  MatrixXd reference_points;
  VectorXd reference_weights;
};

constexpr int kMaxRuleOrder = 32;

/// Gauss-Legendre nodes/weights on [0,1], order in [1,32]. Cached per order.
const Rule1D& gauss_legendre_1d(int order);

TensorRule tensor_rule(int dim, int order);

RulePair make_rule_pair(int dim, int order_primal = 7, int order_reference = 10);

/// Batched integrand: maps a dim x n matrix of points (one per column)
/// to the n integrand values.
using Integrand = std::function<VectorXd(const MatrixXd&)>;

/// Lift a scalar point function into the batched integrand interface.
template <class F>
Integrand pointwise(F f) {
  return [f = std::move(f)](const MatrixXd& pts) {
    VectorXd out(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) out[i] = f(VectorXd(pts.col(i)));
    return out;
  };
}

/// Physical quadrature points of `rule` on `cell`, one per column.
inline MatrixXd mapped_points(const TensorRule& rule, const Box& cell) {
  return (cell.widths.asDiagonal() * rule.points).colwise() + cell.lower;
}

/// Checks a batch of integrand values for non-finite entries.
inline void check_finite(const VectorXd& values, const MatrixXd& pts) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw evaluation_error("integrand evaluated to a non-finite value",
                             pts.col(i));
  }
}

/// Q_K(f): pullback quadrature on `cell`, vol(cell) * sum_q w_q f(F(x_q)).
double apply_rule(const TensorRule& rule, const Box& cell, const Integrand& f);

/// Convenience overload for plain point functions.
template <class F>
double apply_rule_fn(const TensorRule& rule, const Box& cell, F&& f) {
  return apply_rule(rule, cell, pointwise(std::forward<F>(f)));
}

}  // namespace aq
