#include "aq/trainer.hpp"

#include <chrono>
#include <cmath>

namespace aq {

void TrainerConfig::validate() const {
  aq.validate();
  if (refresh_tol < aq.rtol)
    throw std::invalid_argument("TrainerConfig: refresh_tol must be >= rtol");
  if (max_epochs < 0) throw std::invalid_argument("TrainerConfig: max_epochs < 0");
  if (base_partition < 1)
    throw std::invalid_argument("TrainerConfig: base_partition < 1");
  if (error_eval_stride < 1)
    throw std::invalid_argument("TrainerConfig: error_eval_stride < 1");
}

bool refresh_decision(double eta, double tau, long epoch) {
  if (tau <= 0.0) throw std::invalid_argument("refresh_decision: tau must be positive");
  return epoch == 0 || eta >= tau;
}

namespace {

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace

TrainingRun train(const Problem& problem, const MlpArch& arch, std::uint64_t seed,
                  const TrainerConfig& cfg, const StrategySpec& strategy,
                  const EpochObserver& observer) {
  problem.validate();
  cfg.validate();
  if (arch.in_dim != problem.dim())
    throw std::invalid_argument("train: network input dimension must match the problem");
  if (strategy.kind != Strategy::aq &&
      (strategy.budget.primal_points < 1 || strategy.budget.reference_points < 1 ||
       strategy.budget.uniform_partitions < 1))
    throw std::invalid_argument("train: non-adaptive strategies need a point budget");

  const Clock clock;
  TrainingRun run;
  const RulePair pair =
      make_rule_pair(problem.dim(), cfg.order_primal, cfg.order_reference);
  const QuadratureSet eval_mesh = problem.has_exact()
                                      ? build_eval_mesh(problem, cfg.eval_mesh_per_axis,
                                                        cfg.order_primal)
                                      : QuadratureSet{};

  MlpParams params = init_glorot(arch, seed);
  Optimizer optimizer(cfg.optimizer);

  QuadratureSet quads;
  double loss_primal = 0.0, loss_reference = 0.0, eta = 0.0;

  auto compute_losses = [&] {
    const LossBreakdown lp = assemble_loss(problem, params, quads, WhichRule::primal);
    const LossBreakdown lr = assemble_loss(problem, params, quads, WhichRule::reference);
    loss_primal = lp.total;
    loss_reference = lr.total;
    eta = eta_indicator(lp, lr).eta;
  };

  auto rebuild = [&](long epoch, double eta_before) {
    quads = build_adaptive_quadrature(problem, params, pair, cfg.aq,
                                      cfg.base_partition);
    run.partition_history.emplace_back(epoch, quads.domain_partition);
    compute_losses();
    RefreshEvent ev;
    ev.epoch = epoch;
    ev.eta_before = eta_before;
    ev.eta_after = eta;
    ev.loss_primal_after = loss_primal;
    ev.n_cells = quads.n_cells;
    ev.n_primal_points = quads.domain.primal_weights.size();
    ev.n_reference_points = quads.domain.reference_weights.size();
    ev.maxevals_flagged = quads.maxevals_flagged;
    run.refreshes.push_back(ev);
    if (cfg.reset_optimizer_on_refresh) optimizer.reset();
  };

  // epoch 0: the adaptive strategy always builds here, baselines are fixed
  if (strategy.kind == Strategy::aq) {
    rebuild(0, cfg.refresh_tol);
  } else {
    quads = build_fixed_quadrature(problem, strategy.kind, strategy.budget, pair, seed,
                                   strategy.lhc_midpoint);
    compute_losses();
  }

  const LossAndGrad objective = [&](const VectorXd& theta, VectorXd* grad) {
    MlpParams trial = params;
    trial.values = theta;
    if (grad) {
      auto [lb, g] = assemble_loss_gradient(problem, trial, quads);
      *grad = std::move(g);
      return lb.total * lb.total;
    }
    const LossBreakdown lb = assemble_loss(problem, trial, quads, WhichRule::primal);
    return lb.total * lb.total;
  };

  double l2 = std::numeric_limits<double>::quiet_NaN();
  double h1 = std::numeric_limits<double>::quiet_NaN();
  auto eval_errors_now = [&] {
    if (problem.has_exact())
      std::tie(l2, h1) = evaluate_errors(problem, params, eval_mesh.domain);
  };

  auto push_record = [&](long epoch, bool refreshed) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.wall_time = clock.seconds();
    rec.loss_primal = loss_primal;
    rec.loss_reference = loss_reference;
    rec.eta = eta;
    rec.l2_rel = l2;
    rec.h1_rel = h1;
    rec.n_primal_points = quads.domain.primal_weights.size();
    rec.n_cells = quads.n_cells > 0 ? quads.n_cells : quads.domain.n_cells;
    rec.refreshed = refreshed;
    run.records.push_back(rec);
    run.primal_point_history.push_back(rec.n_primal_points);
    run.reference_point_history.push_back(quads.domain.reference_weights.size());
    run.partition_count_history.push_back(rec.n_cells);
    if (observer) observer(rec, params, quads);
  };

  eval_errors_now();
  push_record(0, strategy.kind == Strategy::aq);

  double value = loss_primal * loss_primal;
  VectorXd grad;
  {
    auto [lb, g] = assemble_loss_gradient(problem, params, quads);
    grad = std::move(g);
    value = lb.total * lb.total;
  }

  int stall_streak = 0;
  for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    bool refreshed = false;
    if (strategy.kind == Strategy::aq && refresh_decision(eta, cfg.refresh_tol, epoch)) {
      rebuild(epoch, eta);
      refreshed = true;
      auto [lb, g] = assemble_loss_gradient(problem, params, quads);
      grad = std::move(g);
      value = lb.total * lb.total;
    }

    const double prev_value = value;
    VectorXd theta = params.values;
    optimizer.step(objective, theta, value, grad);
    params.values = std::move(theta);

    if (!std::isfinite(value)) {
      loss_primal = loss_reference = eta = std::numeric_limits<double>::quiet_NaN();
      push_record(epoch, refreshed);
      run.nonfinite_abort = true;
      run.stop_reason = "non-finite loss";
      break;
    }

    // the accepted step already evaluated the primal loss; eta needs only
    // the reference pass
    loss_primal = std::sqrt(value);
    const LossBreakdown lr =
        assemble_loss(problem, params, quads, WhichRule::reference);
    loss_reference = lr.total;
    eta = std::abs(loss_primal - loss_reference) / std::max(loss_reference, 1e-300);

    const bool last_epoch = epoch == cfg.max_epochs;
    if (epoch % cfg.error_eval_stride == 0 || refreshed || last_epoch) eval_errors_now();
    push_record(epoch, refreshed);

    const double progress =
        (prev_value - value) / std::max(std::abs(prev_value), 1e-300);
    stall_streak = progress < cfg.progress_tol ? stall_streak + 1 : 0;
    if (stall_streak >= cfg.progress_patience) {
      run.stop_reason = "unsatisfactory progress";
      break;
    }
    if (clock.seconds() > cfg.time_limit) {
      run.stop_reason = "time limit";
      break;
    }
  }
  if (run.stop_reason.empty() && !run.nonfinite_abort) run.stop_reason = "max epochs";

  run.final_params = std::move(params);
  return run;
}

}  // namespace aq
