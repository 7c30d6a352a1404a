#pragma once

#include <cstdint>
#include <vector>

#include "aq/geometry.hpp"
#include "aq/rules.hpp"

namespace aq {

/// splitmix64: the counter-based generator pinned for all random sampling,
/// so point sets are reproducible across platforms.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// uniform double in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

/// Derive an independent stream from (seed, tag); used to keep e.g. the
/// reference sample set decorrelated from the primal one.
inline SplitMix64 rng_stream(std::uint64_t seed, std::uint64_t tag) {
  SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ULL * (tag + 1)));
  mix.next();
  return mix;
}

/// First n Halton points in [0,1)^dim (prime bases 2,3,5,7; index starts
/// at 1 so no point sits on the origin). Prefix-stable by construction.
MatrixXd halton_points(long n, int dim);

/// Latin hypercube sample: each axis hits every stratum [k/n,(k+1)/n)
/// exactly once. `midpoint` places points at stratum centres instead of
/// at a random offset.
MatrixXd latin_hypercube(long n, int dim, std::uint64_t seed, bool midpoint = false);

/// n i.i.d. uniform points in [0,1)^dim.
MatrixXd mc_points(long n, int dim, std::uint64_t seed);

/// Fixed point counts for the non-adaptive baselines, matched to an
/// adaptive run's history.
struct PointBudget {
  long primal_points = 0;
  long reference_points = 0;
  long uniform_partitions = 0;  // total cells (a d-th power of the side)

  int side(int dim) const;  // cells per axis
};

/// Nearest-rank quantile: the ceil(q*N)-th order statistic.
long nearest_rank_quantile(std::vector<long> history, double q = 0.9);

/// 90% quantile budget rule: point budgets from the primal/reference point
/// histories; uniform partition count is the smallest d-th power of an
/// integer that is >= the quantile of the partition-count history.
PointBudget match_budget(const std::vector<long>& primal_point_history,
                         const std::vector<long>& reference_point_history,
                         const std::vector<long>& partition_history, int dim);

/// Composite Gauss-Legendre quadrature over an equal subdivision of each
/// domain box (primal side only).
CompositeQuadrature uniform_composite(int partitions_per_axis, int order,
                                      const std::vector<Box>& domain);

/// Same partition, both rules.
CompositeQuadrature uniform_composite(int partitions_per_axis, const RulePair& pair,
                                      const std::vector<Box>& domain);

/// Scatter unit-cube sample points into the domain boxes (allocation
/// proportional to volume) with equal weights vol/n per box.
CompositeQuadrature scatter_sample(const MatrixXd& primal_unit,
                                   const MatrixXd& reference_unit,
                                   const std::vector<Box>& domain);

enum class Strategy { aq, uniform, mc, qmc_lhc, qmc_halton };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

}  // namespace aq
