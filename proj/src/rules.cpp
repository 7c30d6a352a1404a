#include "aq/rules.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

namespace aq {

namespace {

// Legendre P_n(x) and derivative on [-1,1] by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

Rule1D compute_rule(int n) {
  Rule1D rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (n == 1) {
    rule.nodes[0] = 0.5;
    rule.weights[0] = 1.0;
    return rule;
  }
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Tricomi-style initial guess, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      auto [p, d] = legendre(n, z);
      dp = d;
      double dz = p / d;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        dp = legendre(n, z).second;
        break;
      }
    }
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // shift [-1,1] -> [0,1]; nodes stored increasing
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

const Rule1D& gauss_legendre_1d(int order) {
  if (order < 1 || order > kMaxRuleOrder)
    throw std::invalid_argument("gauss_legendre_1d: order must be in [1,32]");
  static std::once_flag flag;
  static std::vector<Rule1D> table;
  std::call_once(flag, [] {
    table.resize(kMaxRuleOrder + 1);
    for (int k = 1; k <= kMaxRuleOrder; ++k) table[k] = compute_rule(k);
  });
  return table[order];
}

TensorRule tensor_rule(int dim, int order) {
  if (dim < 1 || dim > 4)
    throw std::invalid_argument("tensor_rule: dim must be in [1,4]");
  const Rule1D& r1 = gauss_legendre_1d(order);
  const int k = r1.order;
  Eigen::Index n = 1;
  for (int i = 0; i < dim; ++i) n *= k;

  TensorRule rule;
  rule.dim = dim;
  rule.order = k;
  rule.points.resize(dim, n);
  rule.weights.resize(n);
  // lexicographic product, axis 0 fastest
  for (Eigen::Index q = 0; q < n; ++q) {
    Eigen::Index rem = q;
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      const int j = static_cast<int>(rem % k);
      rem /= k;
      rule.points(a, q) = r1.nodes[j];
      w *= r1.weights[j];
    }
    rule.weights[q] = w;
  }
  return rule;
}

RulePair make_rule_pair(int dim, int order_primal, int order_reference) {
  if (order_reference <= order_primal)
    throw std::invalid_argument("make_rule_pair: reference order must exceed primal order");
  return {tensor_rule(dim, order_primal), tensor_rule(dim, order_reference)};
}

double apply_rule(const TensorRule& rule, const Box& cell, const Integrand& f) {
  const MatrixXd pts = mapped_points(rule, cell);
  const VectorXd vals = f(pts);
  check_finite(vals, pts);
  return cell.volume() * rule.weights.dot(vals);
}

}  // namespace aq
