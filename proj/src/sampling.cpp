#include "aq/sampling.hpp"

#include "aq/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace aq {

namespace {

constexpr int kPrimes[4] = {2, 3, 5, 7};

double radical_inverse(long i, int base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (i > 0) {
    x += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return x;
}

}  // namespace

MatrixXd halton_points(long n, int dim) {
  if (dim < 1 || dim > 4) throw std::invalid_argument("halton_points: dim must be in [1,4]");
  if (n < 0) throw std::invalid_argument("halton_points: n < 0");
  MatrixXd pts(dim, n);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) pts(j, i) = radical_inverse(i + 1, kPrimes[j]);
  return pts;
}

MatrixXd latin_hypercube(long n, int dim, std::uint64_t seed, bool midpoint) {
  if (n < 1) throw std::invalid_argument("latin_hypercube: n < 1");
  MatrixXd pts(dim, n);
  SplitMix64 rng = rng_stream(seed, 1);
  std::vector<long> perm(n);
  for (int j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0L);
    // Fisher-Yates
    for (long i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<long>(rng.below(i + 1))]);
    for (long i = 0; i < n; ++i) {
      const double off = midpoint ? 0.5 : rng.uniform();
      pts(j, i) = (static_cast<double>(perm[i]) + off) / static_cast<double>(n);
    }
  }
  return pts;
}

MatrixXd mc_points(long n, int dim, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("mc_points: n < 1");
  MatrixXd pts(dim, n);
  SplitMix64 rng = rng_stream(seed, 2);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) pts(j, i) = rng.uniform();
  return pts;
}

int PointBudget::side(int dim) const {
  long s = 1;
  while (true) {
    long p = 1;
    for (int i = 0; i < dim; ++i) p *= s;
    if (p >= uniform_partitions) return static_cast<int>(s);
    ++s;
  }
}

long nearest_rank_quantile(std::vector<long> history, double q) {
  if (history.empty())
    throw std::invalid_argument("nearest_rank_quantile: empty history");
  std::sort(history.begin(), history.end());
  const auto n = static_cast<long>(history.size());
  long rank = static_cast<long>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp(rank, 1L, n);
  return history[rank - 1];
}

PointBudget match_budget(const std::vector<long>& primal_point_history,
                         const std::vector<long>& reference_point_history,
                         const std::vector<long>& partition_history, int dim) {
  PointBudget b;
  b.primal_points = nearest_rank_quantile(primal_point_history);
  b.reference_points = nearest_rank_quantile(reference_point_history);
  const long cells = nearest_rank_quantile(partition_history);
  // smallest integer side with side^dim >= cells
  long side = 1;
  auto pow_d = [dim](long s) {
    long p = 1;
    for (int i = 0; i < dim; ++i) p *= s;
    return p;
  };
  while (pow_d(side) < cells) ++side;
  b.uniform_partitions = pow_d(side);
  return b;
}

CompositeQuadrature uniform_composite(int partitions_per_axis, int order,
                                      const std::vector<Box>& domain) {
  if (partitions_per_axis < 1)
    throw std::invalid_argument("uniform_composite: partitions_per_axis < 1");
  if (domain.empty()) throw std::invalid_argument("uniform_composite: empty domain");
  const int d = domain.front().dim();
  const TensorRule rule = tensor_rule(d, order);
  const std::vector<Box> cells = uniform_partition(domain, partitions_per_axis);

  CompositeQuadrature cq;
  cq.dim = d;
  cq.n_cells = static_cast<long>(cells.size());
  const Eigen::Index np = rule.size();
  cq.primal_points.resize(d, cq.n_cells * np);
  cq.primal_weights.resize(cq.n_cells * np);
  Eigen::Index o = 0;
  for (const Box& c : cells) {
    cq.primal_points.middleCols(o, np) = mapped_points(rule, c);
    cq.primal_weights.segment(o, np) = c.volume() * rule.weights;
    o += np;
  }
  return cq;
}

CompositeQuadrature uniform_composite(int partitions_per_axis, const RulePair& pair,
                                      const std::vector<Box>& domain) {
  CompositeQuadrature cq = uniform_composite(partitions_per_axis, pair.primal.order, domain);
  CompositeQuadrature ref = uniform_composite(partitions_per_axis, pair.reference.order, domain);
  cq.reference_points = std::move(ref.primal_points);
  cq.reference_weights = std::move(ref.primal_weights);
  return cq;
}

CompositeQuadrature scatter_sample(const MatrixXd& primal_unit,
                                   const MatrixXd& reference_unit,
                                   const std::vector<Box>& domain) {
  if (domain.empty()) throw std::invalid_argument("scatter_sample: empty domain");
  const int d = domain.front().dim();
  const double total_vol =
      std::accumulate(domain.begin(), domain.end(), 0.0,
                      [](double a, const Box& b) { return a + b.volume(); });

  CompositeQuadrature cq;
  cq.dim = d;
  cq.n_cells = static_cast<long>(domain.size());

  auto scatter = [&](const MatrixXd& unit, MatrixXd& pts, VectorXd& wts) {
    const long n = unit.cols();
    pts.resize(d, n);
    wts.resize(n);
    // allocate points to boxes proportionally to volume (largest remainder)
    std::vector<long> alloc(domain.size(), 0);
    long assigned = 0;
    std::vector<std::pair<double, std::size_t>> rem;
    for (std::size_t k = 0; k < domain.size(); ++k) {
      const double share = static_cast<double>(n) * domain[k].volume() / total_vol;
      alloc[k] = static_cast<long>(std::floor(share));
      assigned += alloc[k];
      rem.emplace_back(share - std::floor(share), k);
    }
    std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (long i = 0; assigned < n; ++i, ++assigned) ++alloc[rem[i % rem.size()].second];

    long col = 0;
    for (std::size_t k = 0; k < domain.size(); ++k) {
      const Box& b = domain[k];
      for (long i = 0; i < alloc[k]; ++i, ++col) {
        pts.col(col) = b.map(unit.col(col));
        wts[col] = b.volume() / static_cast<double>(alloc[k]);
      }
    }
  };

  scatter(primal_unit, cq.primal_points, cq.primal_weights);
  if (reference_unit.cols() > 0)
    scatter(reference_unit, cq.reference_points, cq.reference_weights);
  return cq;
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::aq: return "aq";
    case Strategy::uniform: return "uniform";
    case Strategy::mc: return "mc";
    case Strategy::qmc_lhc: return "qmc-lhc";
    case Strategy::qmc_halton: return "qmc-halton";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "aq") return Strategy::aq;
  if (s == "uniform") return Strategy::uniform;
  if (s == "mc") return Strategy::mc;
  if (s == "qmc-lhc") return Strategy::qmc_lhc;
  if (s == "qmc-halton") return Strategy::qmc_halton;
  throw std::invalid_argument("unknown quadrature strategy: " + s);
}

}  // namespace aq
