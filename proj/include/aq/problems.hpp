#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aq/geometry.hpp"
#include "aq/mlp.hpp"

namespace aq {

enum class PdeKind { fit, poisson, advection_diffusion };

/// A residual-minimisation problem: domain, residual operator coefficients,
/// boundary data with penalty, and (when available) the exact solution used
/// for error reporting.
struct Problem {
  std::string name;
  std::vector<Box> domain;
  PdeKind kind = PdeKind::fit;

  double epsilon = 0.0;  // diffusion coefficient
  VectorXd beta;         // advection velocity

  std::function<VectorXd(const MatrixXd&)> source;     // f_Omega, batched
  std::function<VectorXd(const MatrixXd&)> dirichlet;  // g on the boundary, batched
  double gamma_d = 10.0;
  bool has_boundary = false;

  std::function<VectorXd(const MatrixXd&)> exact;       // batched values
  std::function<MatrixXd(const MatrixXd&)> exact_grad;  // d x N
  std::function<MatrixXd(const VectorXd&)> exact_hess;  // d x d at one point

  int dim() const { return domain.empty() ? 0 : domain.front().dim(); }
  bool has_exact() const { return static_cast<bool>(exact); }

  /// Highest spatial derivative the residual operator consumes.
  JetOrder jet_order() const {
    switch (kind) {
      case PdeKind::fit: return JetOrder::value;
      case PdeKind::poisson: return JetOrder::hessian;
      case PdeKind::advection_diffusion:
        return epsilon != 0.0 ? JetOrder::hessian : JetOrder::gradient;
    }
    return JetOrder::value;
  }

  void validate() const;
};

/// 2D L2-misfit fit of the arc-tan well target on [0,1]^2.
Problem make_fa_arctan_well();

/// 1D advection-diffusion boundary-layer problem on (-1,1):
/// -eps u'' + u' = 1, u(-1) = u(1) = 0, with the closed-form solution.
Problem make_adv_diff_1d(double eps, double gamma = 10.0);

/// 2D Poisson problem on [0,1]^2 whose manufactured solution is a sharp
/// arc wavefront; Dirichlet data penalised with gamma.
Problem make_poisson_arc_wavefront(double gamma = 10.0);

/// Lookup by config name: fa-arctan-well | adv-diff-1d | poisson-arc.
Problem make_problem(const std::string& name, double epsilon, double gamma);

}  // namespace aq
