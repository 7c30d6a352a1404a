#include "aq/adaptive.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <queue>

namespace aq {

namespace {

// evaluations consumed by one estimate_cell call
long evals_per_cell(int dim, const RulePair& pair) {
  return pair.primal.size() + pair.reference.size() + (4 * dim + 1);
}

struct QueueEntry {
  double delta;
  std::uint64_t id;
  // max-delta first; equal deltas resolved by earliest insertion
  bool operator<(const QueueEntry& o) const {
    if (delta != o.delta) return delta < o.delta;
    return id > o.id;
  }
};

}  // namespace

VectorXd direction_indicators(const Integrand& f, const Box& cell) {
  const int d = cell.dim();
  const VectorXd c = cell.centroid();
  // stencil: centroid plus 4 offsets per axis (lambda = 1/4 of half-width)
  MatrixXd pts(d, 1 + 4 * d);
  pts.col(0) = c;
  for (int j = 0; j < d; ++j) {
    const double h = 0.5 * cell.widths[j];  // half-width
    for (int s = 0; s < 4; ++s) pts.col(1 + 4 * j + s) = c;
    pts(j, 1 + 4 * j + 0) -= 0.50 * h;
    pts(j, 1 + 4 * j + 1) -= 0.25 * h;
    pts(j, 1 + 4 * j + 2) += 0.25 * h;
    pts(j, 1 + 4 * j + 3) += 0.50 * h;
  }
  const VectorXd v = f(pts);
  check_finite(v, pts);
  const double vol = cell.volume();  // Jacobian of the pullback
  VectorXd zeta(d);
  for (int j = 0; j < d; ++j) {
    const double fd = v[1 + 4 * j + 0] - 4.0 * v[1 + 4 * j + 1] + 6.0 * v[0] -
                      4.0 * v[1 + 4 * j + 2] + v[1 + 4 * j + 3];
    zeta[j] = vol * std::abs(fd);
  }
  return zeta;
}

CellRecord estimate_cell(const Integrand& f, const Box& cell, const RulePair& pair) {
  CellRecord rec;
  rec.cell = cell;
  rec.q_primal = apply_rule(pair.primal, cell, f);
  rec.q_reference = apply_rule(pair.reference, cell, f);
  rec.delta = std::abs(rec.q_primal - rec.q_reference);
  rec.zeta = direction_indicators(f, cell);
  rec.best_axis = 0;
  for (int j = 1; j < cell.dim(); ++j)
    if (rec.zeta[j] > rec.zeta[rec.best_axis]) rec.best_axis = j;
  return rec;
}

AdaptiveResult adapt_integrate(const Integrand& f, const std::vector<Box>& base,
                               const RulePair& pair, const StoppingCriterion& crit) {
  crit.validate();
  if (base.empty()) throw std::invalid_argument("adapt_integrate: empty base partition");
  const int d = base.front().dim();
  const long cell_cost = evals_per_cell(d, pair);
  if (crit.maxevals < cell_cost * static_cast<long>(base.size()))
    throw std::invalid_argument(
        "adapt_integrate: maxevals below the base-partition evaluation cost");

  // freeze threshold per axis: 1e-13 of the base domain extent
  VectorXd lo = base.front().lower, hi = base.front().lower + base.front().widths;
  for (const Box& b : base) {
    lo = lo.cwiseMin(b.lower);
    hi = hi.cwiseMax(b.lower + b.widths);
  }
  const VectorXd min_width = 1e-13 * (hi - lo);

  AdaptiveResult out;
  std::map<std::uint64_t, CellRecord> live;  // ordered by insertion id
  std::priority_queue<QueueEntry> queue;
  std::uint64_t next_id = 0;

  double S = 0.0, E = 0.0;
  auto admit = [&](CellRecord rec) {
    rec.id = next_id++;
    S += rec.q_primal;
    E += rec.delta;
    queue.push({rec.delta, rec.id});
    live.emplace(rec.id, std::move(rec));
    out.evals_used += cell_cost;
  };

  for (const Box& b : base) admit(estimate_cell(f, b, pair));

  const double q = crit.exponent;
  auto tolerance_met = [&] {
    const double lhs = std::pow(E, 1.0 / q);
    const double rhs = std::max(crit.atol, crit.rtol * std::pow(std::abs(S), 1.0 / q));
    return lhs <= rhs;
  };

  out.terminated_by = Termination::tolerance;
  while (!tolerance_met()) {
    if (out.evals_used + 2 * cell_cost > crit.maxevals || queue.empty()) {
      out.terminated_by = Termination::maxevals;
      break;
    }
    const QueueEntry top = queue.top();
    queue.pop();
    const CellRecord& marked = live.at(top.id);
    const int axis = marked.best_axis;
    if (marked.cell.widths[axis] < min_width[axis]) {
      // frozen: stays in the partition, its delta stays in E
      continue;
    }
    auto [left, right] = bisect(marked.cell, axis);
    out.refine_log.emplace_back(marked.id, axis);
    S -= marked.q_primal;
    E -= marked.delta;
    live.erase(top.id);
    admit(estimate_cell(f, left, pair));
    admit(estimate_cell(f, right, pair));
  }

  out.integral = S;
  out.error_estimate = E;
  out.partition.reserve(live.size());
  for (auto& [id, rec] : live) out.partition.push_back(std::move(rec));
  return out;
}

CompositeQuadrature materialise(const AdaptiveResult& result, const RulePair& pair) {
  if (result.partition.empty())
    throw std::invalid_argument("materialise: empty partition");
  const int d = result.partition.front().cell.dim();
  const Eigen::Index np = pair.primal.size(), nr = pair.reference.size();
  const long cells = static_cast<long>(result.partition.size());

  CompositeQuadrature cq;
  cq.dim = d;
  cq.n_cells = cells;
  cq.primal_points.resize(d, cells * np);
  cq.primal_weights.resize(cells * np);
  cq.reference_points.resize(d, cells * nr);
  cq.reference_weights.resize(cells * nr);

  Eigen::Index op = 0, orf = 0;
  for (const CellRecord& rec : result.partition) {
    const double vol = rec.cell.volume();
    cq.primal_points.middleCols(op, np) = mapped_points(pair.primal, rec.cell);
    cq.primal_weights.segment(op, np) = vol * pair.primal.weights;
    cq.reference_points.middleCols(orf, nr) = mapped_points(pair.reference, rec.cell);
    cq.reference_weights.segment(orf, nr) = vol * pair.reference.weights;
    op += np;
    orf += nr;
  }
  return cq;
}

void dump_partition_jsonl(const AdaptiveResult& result, std::ostream& os) {
  dump_partition_jsonl(result.partition, os);
}

void dump_partition_jsonl(const std::vector<CellRecord>& partition, std::ostream& os) {
  os.precision(17);
  for (const CellRecord& rec : partition) {
    os << "{\"lo\":[";
    for (int i = 0; i < rec.cell.dim(); ++i)
      os << (i ? "," : "") << rec.cell.lower[i];
    os << "],\"widths\":[";
    for (int i = 0; i < rec.cell.dim(); ++i)
      os << (i ? "," : "") << rec.cell.widths[i];
    os << "],\"delta\":" << rec.delta << ",\"qp\":" << rec.q_primal << "}\n";
  }
}

std::vector<Box> uniform_partition(const std::vector<Box>& domain, int per_axis) {
  if (per_axis < 1) throw std::invalid_argument("uniform_partition: per_axis < 1");
  std::vector<Box> cells;
  for (const Box& b : domain) {
    const int d = b.dim();
    const VectorXd w = b.widths / per_axis;
    long n = 1;
    for (int i = 0; i < d; ++i) n *= per_axis;
    for (long q = 0; q < n; ++q) {
      long rem = q;
      VectorXd lo = b.lower;
      for (int a = 0; a < d; ++a) {
        lo[a] += static_cast<double>(rem % per_axis) * w[a];
        rem /= per_axis;
      }
      cells.emplace_back(lo, w);
    }
  }
  return cells;
}

}  // namespace aq
