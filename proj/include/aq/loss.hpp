#pragma once

#include <utility>
#include <vector>

#include "aq/adaptive.hpp"
#include "aq/mlp.hpp"
#include "aq/problems.hpp"
#include "aq/sampling.hpp"

namespace aq {

enum class WhichRule { primal, reference };

/// Discrete loss split into its quadrature terms:
/// total = sqrt(domain + sum_i gamma_i * boundary_i).
struct LossBreakdown {
  double domain_term = 0.0;
  std::vector<double> boundary_terms;
  double total = 0.0;
  WhichRule which_rule = WhichRule::primal;
};

struct EtaIndicator {
  double eta = 0.0;
};

/// eta = |J - J'| / max(J', 1e-300) with J' the reference-rule loss.
EtaIndicator eta_indicator(const LossBreakdown& primal, const LossBreakdown& reference);

/// Domain quadrature plus one boundary quadrature per face, with the
/// bookkeeping of the builds that produced them.
struct QuadratureSet {
  CompositeQuadrature domain;
  std::vector<CompositeQuadrature> boundary;  // points stored embedded in R^d
  std::vector<CellRecord> domain_partition;   // empty for non-adaptive builds
  long n_cells = 0;
  long evals = 0;
  bool maxevals_flagged = false;
};

/// |R_Omega(u_theta)|^2 as a batched integrand (feeds the adaptive build).
Integrand residual_integrand(const Problem& p, const MlpParams& net);

/// |u_theta - g|^2 on a face, as an integrand over face coordinates.
Integrand boundary_residual_integrand(const Problem& p, const MlpParams& net,
                                      const Face& face);

/// Domain residual values R(u)(x_q) from precomputed jets.
VectorXd domain_residual(const Problem& p, const BatchJets& jets, const MatrixXd& pts);

/// Residual from explicit jet values at one point (analytic-ansatz checks).
double residual_from_jet(const Problem& p, double value, const VectorXd& grad,
                         const MatrixXd& hess, const VectorXd& x);

/// Weighted squared-residual sums over the chosen rule's points
/// (cell-major, point-major summation order).
LossBreakdown assemble_loss(const Problem& p, const MlpParams& net,
                            const QuadratureSet& quads, WhichRule rule);

/// Primal loss together with the gradient of total^2 w.r.t. the flat
/// parameter vector (quadrature points and weights held fixed).
std::pair<LossBreakdown, VectorXd> assemble_loss_gradient(const Problem& p,
                                                          const MlpParams& net,
                                                          const QuadratureSet& quads);

/// Relative L2 / H1 errors against the exact solution on a fine mesh.
std::pair<double, double> evaluate_errors(const Problem& p, const MlpParams& net,
                                          const CompositeQuadrature& fine_mesh);

/// Adaptive build of all loss-term quadratures at the current network state
/// (domain via the d-dimensional engine, faces via (d-1)-dimensional runs;
/// 1D boundary terms are plain endpoint evaluations).
QuadratureSet build_adaptive_quadrature(const Problem& p, const MlpParams& net,
                                        const RulePair& pair,
                                        const StoppingCriterion& crit,
                                        int base_per_axis);

/// Fixed-budget quadratures for the non-adaptive strategies.
QuadratureSet build_fixed_quadrature(const Problem& p, Strategy strategy,
                                     const PointBudget& budget, const RulePair& pair,
                                     std::uint64_t seed, bool lhc_midpoint = false);

/// Uniform evaluation mesh (domain + boundary) of the given per-axis size
/// and rule order; only the primal arrays are populated.
QuadratureSet build_eval_mesh(const Problem& p, int per_axis, int order);

/// Streamed evaluation of the domain term sum_q w_q |R(x_q)|^2 on a uniform
/// per_axis^d composite rule, without materialising the full point set.
double streamed_domain_term(const Problem& p, const MlpParams& net, int per_axis,
                            int order, long* n_points = nullptr);

/// Number of worker threads used by the chunked loss assembly (>= 1).
void set_loss_threads(int n);
int loss_threads();

}  // namespace aq
