#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "aq/geometry.hpp"
#include "aq/rules.hpp"

namespace aq {

/// Per-cell state: pullback quadratures Q_K and Q'_K, the error estimate
/// delta_K = |Q_K - Q'_K| and the fourth-difference direction indicators.
struct CellRecord {
  Box cell;
  double q_primal = 0.0;
  double q_reference = 0.0;
  double delta = 0.0;
  VectorXd zeta;        // one indicator per axis
  int best_axis = 0;    // argmax zeta, ties to the lowest axis
  std::uint64_t id = 0; // insertion sequence number
};

struct StoppingCriterion {
  double rtol = 1e-2;        // xi
  double atol = 1e-14;       // rho
  long maxevals = 10'000'000;
  double exponent = 1.0;     // q: stop once E^{1/q} <= max(rho, xi |S|^{1/q})

  void validate() const {
    if (!(rtol > 0.0 && rtol < 1.0))
      throw std::invalid_argument("StoppingCriterion: rtol must be in (0,1)");
    if (atol < 0.0) throw std::invalid_argument("StoppingCriterion: atol < 0");
    if (maxevals <= 0) throw std::invalid_argument("StoppingCriterion: maxevals <= 0");
    if (exponent < 1.0) throw std::invalid_argument("StoppingCriterion: exponent < 1");
  }
};

enum class Termination { tolerance, maxevals };

struct AdaptiveResult {
  double integral = 0.0;        // S = sum_K Q_K
  double error_estimate = 0.0;  // E = sum_K delta_K
  std::vector<CellRecord> partition;
  long evals_used = 0;
  Termination terminated_by = Termination::tolerance;
  std::vector<std::pair<std::uint64_t, int>> refine_log;  // (cell id, axis)
};

/// Genz-Malik style fourth-difference indicators of the pulled-back
/// integrand along each axis. Five symmetric points per axis at the
/// centroid and centroid +- w_j/8, +- w_j/4, all strictly interior.
VectorXd direction_indicators(const Integrand& f, const Box& cell);

CellRecord estimate_cell(const Integrand& f, const Box& cell, const RulePair& pair);

/// Algorithm: estimate every base cell, then repeatedly bisect the cell
/// with the largest delta_K along its dominant fourth-difference axis,
/// until E^{1/q} <= max(rho, xi |S|^{1/q}) or the evaluation budget is hit.
AdaptiveResult adapt_integrate(const Integrand& f, const std::vector<Box>& base,
                               const RulePair& pair, const StoppingCriterion& crit);

/// Flatten the final partition into physical point/weight arrays for both
/// rules (cell-major point order).
CompositeQuadrature materialise(const AdaptiveResult& result, const RulePair& pair);

/// One JSON object per line: {"lo":[...],"widths":[...],"delta":d,"qp":q}.
void dump_partition_jsonl(const std::vector<CellRecord>& partition, std::ostream& os);
void dump_partition_jsonl(const AdaptiveResult& result, std::ostream& os);

/// Split each box of `domain` into n^d congruent cells.
std::vector<Box> uniform_partition(const std::vector<Box>& domain, int per_axis);

}  // namespace aq
