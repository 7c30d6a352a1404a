#include "aq/loss.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace aq {

namespace {

int g_threads = 1;
constexpr Eigen::Index kChunk = 16384;

struct ChunkResult {
  double sum = 0.0;
  VectorXd grad;
};

// Runs work(begin, count) over fixed-size chunks and folds the results in
// chunk order, so the outcome does not depend on the thread count.
template <class Work>
ChunkResult reduce_chunks(Eigen::Index total, const Work& work, bool with_grad,
                          Eigen::Index grad_size) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  for (Eigen::Index b = 0; b < total; b += kChunk)
    ranges.emplace_back(b, std::min(kChunk, total - b));

  std::vector<ChunkResult> partial(ranges.size());
  const int nt = std::min<int>(g_threads, static_cast<int>(ranges.size()));
  if (nt <= 1) {
    for (std::size_t i = 0; i < ranges.size(); ++i)
      partial[i] = work(ranges[i].first, ranges[i].second);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < ranges.size();
             i = next.fetch_add(1))
          partial[i] = work(ranges[i].first, ranges[i].second);
      });
    for (auto& th : pool) th.join();
  }

  ChunkResult out;
  if (with_grad) out.grad = VectorXd::Zero(grad_size);
  for (const ChunkResult& c : partial) {
    out.sum += c.sum;
    if (with_grad) out.grad += c.grad;
  }
  return out;
}

void require_scalar_output(const MlpParams& net) {
  if (net.arch.out_dim != 1)
    throw std::invalid_argument("residual losses require a scalar-output network");
}

// adjoint seeds of sum_q factor_q R_q for the (linear) residual operators
BatchJets residual_seeds(const Problem& p, const Eigen::RowVectorXd& factor, int d) {
  BatchJets seeds;
  switch (p.kind) {
    case PdeKind::fit:
      seeds.value = factor;
      break;
    case PdeKind::poisson:
      seeds.grad.resize(d);
      seeds.hess.resize(tri_count(d));
      for (int s = 0; s < d; ++s) seeds.hess[tri_index(s, s, d)] = factor;
      break;
    case PdeKind::advection_diffusion:
      seeds.grad.resize(d);
      seeds.hess.resize(tri_count(d));
      for (int t = 0; t < d; ++t)
        if (p.beta[t] != 0.0) seeds.grad[t] = p.beta[t] * factor;
      if (p.epsilon != 0.0)
        for (int s = 0; s < d; ++s)
          seeds.hess[tri_index(s, s, d)] = -p.epsilon * factor;
      break;
  }
  return seeds;
}

double weighted_square_sum(const VectorXd& w, const VectorXd& r) {
  return w.dot(r.cwiseProduct(r));
}

// sum_q w_q R(x_q)^2 over the given points, chunked; optionally its
// parameter gradient scaled by `scale` (the term's penalty factor).
ChunkResult domain_term(const Problem& p, const MlpParams& net, const MatrixXd& pts,
                        const VectorXd& wts, bool with_grad, double scale = 1.0) {
  const int d = p.dim();
  const JetOrder order = p.jet_order();
  auto work = [&](Eigen::Index begin, Eigen::Index n) {
    ChunkResult res;
    const MatrixXd x = pts.middleCols(begin, n);
    const VectorXd w = wts.segment(begin, n);
    JetTrace trace;
    const BatchJets jets = jet_forward(net, x, order, with_grad ? &trace : nullptr);
    const VectorXd r = domain_residual(p, jets, x);
    res.sum = weighted_square_sum(w, r);
    if (with_grad) {
      const Eigen::RowVectorXd factor =
          (2.0 * scale) * w.cwiseProduct(r).transpose();
      res.grad = jet_vjp(net, trace, residual_seeds(p, factor, d));
    }
    return res;
  };
  return reduce_chunks(pts.cols(), work, with_grad, net.values.size());
}

// sum_q w_q (u(x_q) - g(x_q))^2 on embedded boundary points
ChunkResult boundary_term(const Problem& p, const MlpParams& net, const MatrixXd& pts,
                          const VectorXd& wts, bool with_grad, double scale = 1.0) {
  auto work = [&](Eigen::Index begin, Eigen::Index n) {
    ChunkResult res;
    const MatrixXd x = pts.middleCols(begin, n);
    const VectorXd w = wts.segment(begin, n);
    JetTrace trace;
    const BatchJets jets =
        jet_forward(net, x, JetOrder::value, with_grad ? &trace : nullptr);
    const VectorXd r = jets.value.row(0).transpose() - p.dirichlet(x);
    res.sum = weighted_square_sum(w, r);
    if (with_grad) {
      BatchJets seeds;
      seeds.value = (2.0 * scale) * w.cwiseProduct(r).transpose();
      res.grad = jet_vjp(net, trace, seeds);
    }
    return res;
  };
  return reduce_chunks(pts.cols(), work, with_grad, net.values.size());
}

}  // namespace

void set_loss_threads(int n) { g_threads = std::max(1, n); }
int loss_threads() { return g_threads; }

EtaIndicator eta_indicator(const LossBreakdown& primal, const LossBreakdown& reference) {
  return {std::abs(primal.total - reference.total) / std::max(reference.total, 1e-300)};
}

VectorXd domain_residual(const Problem& p, const BatchJets& jets, const MatrixXd& pts) {
  const int d = static_cast<int>(pts.rows());
  const Eigen::Index n = pts.cols();
  switch (p.kind) {
    case PdeKind::fit:
      return jets.value.row(0).transpose() - p.exact(pts);
    case PdeKind::poisson: {
      VectorXd lap = VectorXd::Zero(n);
      for (int s = 0; s < d; ++s)
        lap += jets.hess[tri_index(s, s, d)].row(0).transpose();
      return lap + p.source(pts);
    }
    case PdeKind::advection_diffusion: {
      VectorXd r = -p.source(pts);
      for (int t = 0; t < d; ++t)
        if (p.beta[t] != 0.0) r += p.beta[t] * jets.grad[t].row(0).transpose();
      if (p.epsilon != 0.0)
        for (int s = 0; s < d; ++s)
          r -= p.epsilon * jets.hess[tri_index(s, s, d)].row(0).transpose();
      return r;
    }
  }
  throw std::logic_error("domain_residual: unknown kind");
}

double residual_from_jet(const Problem& p, double value, const VectorXd& grad,
                         const MatrixXd& hess, const VectorXd& x) {
  const MatrixXd pts = x;
  switch (p.kind) {
    case PdeKind::fit:
      return value - p.exact(pts)[0];
    case PdeKind::poisson:
      return hess.trace() + p.source(pts)[0];
    case PdeKind::advection_diffusion:
      return -p.epsilon * hess.trace() + p.beta.dot(grad) - p.source(pts)[0];
  }
  throw std::logic_error("residual_from_jet: unknown kind");
}

Integrand residual_integrand(const Problem& p, const MlpParams& net) {
  require_scalar_output(net);
  const JetOrder order = p.jet_order();
  return [p, net, order](const MatrixXd& pts) {
    const BatchJets jets = jet_forward(net, pts, order);
    const VectorXd r = domain_residual(p, jets, pts);
    return VectorXd(r.cwiseProduct(r));
  };
}

Integrand boundary_residual_integrand(const Problem& p, const MlpParams& net,
                                      const Face& face) {
  require_scalar_output(net);
  return [p, net, face](const MatrixXd& pts) {
    const MatrixXd x = face.embed(pts);
    const VectorXd r = forward_batch(net, x).row(0).transpose() - p.dirichlet(x);
    return VectorXd(r.cwiseProduct(r));
  };
}

LossBreakdown assemble_loss(const Problem& p, const MlpParams& net,
                            const QuadratureSet& quads, WhichRule rule) {
  require_scalar_output(net);
  auto pts_of = [rule](const CompositeQuadrature& q) -> const MatrixXd& {
    return rule == WhichRule::primal ? q.primal_points : q.reference_points;
  };
  auto wts_of = [rule](const CompositeQuadrature& q) -> const VectorXd& {
    return rule == WhichRule::primal ? q.primal_weights : q.reference_weights;
  };
  if (wts_of(quads.domain).size() == 0)
    throw std::invalid_argument("assemble_loss: requested rule has no points");

  LossBreakdown out;
  out.which_rule = rule;
  out.domain_term =
      domain_term(p, net, pts_of(quads.domain), wts_of(quads.domain), false).sum;
  double acc = out.domain_term;
  for (const CompositeQuadrature& bq : quads.boundary) {
    const double term = boundary_term(p, net, pts_of(bq), wts_of(bq), false).sum;
    out.boundary_terms.push_back(term);
    acc += p.gamma_d * term;
  }
  out.total = std::sqrt(acc);
  return out;
}

std::pair<LossBreakdown, VectorXd> assemble_loss_gradient(const Problem& p,
                                                          const MlpParams& net,
                                                          const QuadratureSet& quads) {
  require_scalar_output(net);
  LossBreakdown out;
  out.which_rule = WhichRule::primal;
  ChunkResult dom = domain_term(p, net, quads.domain.primal_points,
                                quads.domain.primal_weights, true);
  out.domain_term = dom.sum;
  double acc = dom.sum;
  VectorXd grad = std::move(dom.grad);
  for (const CompositeQuadrature& bq : quads.boundary) {
    ChunkResult b =
        boundary_term(p, net, bq.primal_points, bq.primal_weights, true, p.gamma_d);
    out.boundary_terms.push_back(b.sum);
    acc += p.gamma_d * b.sum;
    grad += b.grad;
  }
  out.total = std::sqrt(acc);
  return {out, std::move(grad)};
}

std::pair<double, double> evaluate_errors(const Problem& p, const MlpParams& net,
                                          const CompositeQuadrature& fine_mesh) {
  if (!p.has_exact() || !p.exact_grad)
    throw std::invalid_argument("evaluate_errors: problem has no exact solution");
  require_scalar_output(net);
  const MatrixXd& pts = fine_mesh.primal_points;
  const VectorXd& wts = fine_mesh.primal_weights;
  const int d = p.dim();

  double num_l2 = 0, den_l2 = 0, num_g = 0, den_g = 0;
  for (Eigen::Index b = 0; b < pts.cols(); b += kChunk) {
    const Eigen::Index n = std::min(kChunk, pts.cols() - b);
    const MatrixXd x = pts.middleCols(b, n);
    const VectorXd w = wts.segment(b, n);
    const BatchJets jets = jet_forward(net, x, JetOrder::gradient);
    const VectorXd ue = p.exact(x);
    const VectorXd du = jets.value.row(0).transpose() - ue;
    num_l2 += w.dot(du.cwiseProduct(du));
    den_l2 += w.dot(ue.cwiseProduct(ue));
    const MatrixXd ge = p.exact_grad(x);
    for (int t = 0; t < d; ++t) {
      const VectorXd dg = jets.grad[t].row(0).transpose() - ge.row(t).transpose();
      num_g += w.dot(dg.cwiseProduct(dg));
      den_g += w.dot(ge.row(t).transpose().cwiseProduct(ge.row(t).transpose()));
    }
  }
  const double l2 = std::sqrt(num_l2 / std::max(den_l2, 1e-300));
  const double h1 = std::sqrt((num_l2 + num_g) / std::max(den_l2 + den_g, 1e-300));
  return {l2, h1};
}

namespace {

CompositeQuadrature endpoint_quadrature(const Face& face) {
  CompositeQuadrature q;
  q.dim = 1;
  q.n_cells = 1;
  q.primal_points = face.embed(MatrixXd(0, 1));
  q.primal_weights = VectorXd::Ones(1);
  q.reference_points = q.primal_points;
  q.reference_weights = q.primal_weights;
  return q;
}

void embed_quadrature(CompositeQuadrature& q, const Face& face) {
  q.primal_points = face.embed(q.primal_points);
  if (q.reference_points.cols() > 0)
    q.reference_points = face.embed(q.reference_points);
  q.dim = face.parent_dim;
}

}  // namespace

QuadratureSet build_adaptive_quadrature(const Problem& p, const MlpParams& net,
                                        const RulePair& pair,
                                        const StoppingCriterion& crit,
                                        int base_per_axis) {
  p.validate();
  QuadratureSet out;
  AdaptiveResult res = adapt_integrate(residual_integrand(p, net),
                                       uniform_partition(p.domain, base_per_axis),
                                       pair, crit);
  out.domain = materialise(res, pair);
  out.n_cells = static_cast<long>(res.partition.size());
  out.evals = res.evals_used;
  out.maxevals_flagged = res.terminated_by == Termination::maxevals;
  out.domain_partition = std::move(res.partition);

  if (!p.has_boundary) return out;
  const std::vector<Face> faces = faces_of(p.domain.front());
  if (p.dim() == 1) {
    for (const Face& f : faces) out.boundary.push_back(endpoint_quadrature(f));
    return out;
  }
  const RulePair edge_pair =
      make_rule_pair(p.dim() - 1, pair.primal.order, pair.reference.order);
  for (const Face& f : faces) {
    AdaptiveResult r = adapt_integrate(boundary_residual_integrand(p, net, f),
                                       uniform_partition({f.tangent}, base_per_axis),
                                       edge_pair, crit);
    CompositeQuadrature bq = materialise(r, edge_pair);
    embed_quadrature(bq, f);
    out.evals += r.evals_used;
    out.maxevals_flagged |= r.terminated_by == Termination::maxevals;
    out.boundary.push_back(std::move(bq));
  }
  return out;
}

QuadratureSet build_fixed_quadrature(const Problem& p, Strategy strategy,
                                     const PointBudget& budget, const RulePair& pair,
                                     std::uint64_t seed, bool lhc_midpoint) {
  p.validate();
  if (strategy == Strategy::aq)
    throw std::invalid_argument("build_fixed_quadrature: aq is not a fixed strategy");
  const int d = p.dim();
  QuadratureSet out;
  long face_partitions = 1;

  if (strategy == Strategy::uniform) {
    const int side = budget.side(d);
    out.domain = uniform_composite(side, pair, p.domain);
    face_partitions = side;
  } else {
    const std::uint64_t ref_seed = rng_stream(seed, 0xAE5u).next();
    MatrixXd unit_p, unit_r;
    switch (strategy) {
      case Strategy::mc:
        unit_p = mc_points(budget.primal_points, d, seed);
        unit_r = mc_points(budget.reference_points, d, ref_seed);
        break;
      case Strategy::qmc_lhc:
        unit_p = latin_hypercube(budget.primal_points, d, seed, lhc_midpoint);
        unit_r = latin_hypercube(budget.reference_points, d, ref_seed, lhc_midpoint);
        break;
      case Strategy::qmc_halton:
        unit_p = halton_points(budget.primal_points, d);
        unit_r = halton_points(budget.reference_points, d);
        break;
      default:
        break;
    }
    out.domain = scatter_sample(unit_p, unit_r, p.domain);
    const double cells_equiv = static_cast<double>(budget.primal_points) /
                               std::pow(pair.primal.order, d);
    face_partitions =
        std::max<long>(1, std::llround(std::pow(cells_equiv, 1.0 / d)));
  }
  out.n_cells = out.domain.n_cells;

  if (!p.has_boundary) return out;
  const std::vector<Face> faces = faces_of(p.domain.front());
  if (d == 1) {
    for (const Face& f : faces) out.boundary.push_back(endpoint_quadrature(f));
    return out;
  }
  for (const Face& f : faces) {
    CompositeQuadrature bq = uniform_composite(static_cast<int>(face_partitions),
                                               make_rule_pair(d - 1, pair.primal.order,
                                                              pair.reference.order),
                                               {f.tangent});
    embed_quadrature(bq, f);
    out.boundary.push_back(std::move(bq));
  }
  return out;
}

QuadratureSet build_eval_mesh(const Problem& p, int per_axis, int order) {
  p.validate();
  QuadratureSet out;
  out.domain = uniform_composite(per_axis, order, p.domain);
  out.n_cells = out.domain.n_cells;
  if (!p.has_boundary) return out;
  for (const Face& f : faces_of(p.domain.front())) {
    if (p.dim() == 1) {
      out.boundary.push_back(endpoint_quadrature(f));
    } else {
      CompositeQuadrature bq = uniform_composite(per_axis, order, {f.tangent});
      embed_quadrature(bq, f);
      out.boundary.push_back(std::move(bq));
    }
  }
  return out;
}

double streamed_domain_term(const Problem& p, const MlpParams& net, int per_axis,
                            int order, long* n_points) {
  require_scalar_output(net);
  const int d = p.dim();
  const TensorRule rule = tensor_rule(d, order);
  const JetOrder jord = p.jet_order();
  const std::vector<Box> cells = uniform_partition(p.domain, per_axis);
  const Eigen::Index per_cell = rule.size();
  const Eigen::Index cells_per_chunk =
      std::max<Eigen::Index>(1, kChunk / per_cell);

  double acc = 0.0;
  long npts = 0;
  for (std::size_t c0 = 0; c0 < cells.size();) {
    const std::size_t nc = std::min<std::size_t>(cells_per_chunk, cells.size() - c0);
    MatrixXd pts(d, static_cast<Eigen::Index>(nc) * per_cell);
    VectorXd wts(static_cast<Eigen::Index>(nc) * per_cell);
    for (std::size_t i = 0; i < nc; ++i) {
      const Box& cell = cells[c0 + i];
      pts.middleCols(static_cast<Eigen::Index>(i) * per_cell, per_cell) =
          mapped_points(rule, cell);
      wts.segment(static_cast<Eigen::Index>(i) * per_cell, per_cell) =
          cell.volume() * rule.weights;
    }
    const BatchJets jets = jet_forward(net, pts, jord);
    const VectorXd r = domain_residual(p, jets, pts);
    acc += wts.dot(r.cwiseProduct(r));
    npts += static_cast<long>(nc) * per_cell;
    c0 += nc;
  }
  if (n_points) *n_points = npts;
  return acc;
}

}  // namespace aq
