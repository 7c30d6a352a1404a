#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "aq/loss.hpp"
#include "aq/optim.hpp"

namespace aq {

struct TrainerConfig {
  double refresh_tol = 5e-2;  // tau
  StoppingCriterion aq;       // xi, rho, maxevals, exponent
  int order_primal = 7;
  int order_reference = 10;
  int base_partition = 3;  // per-axis base mesh the adaptive build starts from

  long max_epochs = 1000;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  OptimizerConfig optimizer;
  bool reset_optimizer_on_refresh = false;

  // stagnation rule: stop after `progress_patience` consecutive epochs whose
  // relative loss decrease stays below `progress_tol`
  double progress_tol = 1e-12;
  int progress_patience = 200;

  // fixed fine evaluation mesh for L2/H1 error reporting
  int eval_mesh_per_axis = 100;
  long error_eval_stride = 1;  // epochs between error evaluations

  void validate() const;
};

struct EpochRecord {
  long epoch = 0;
  double wall_time = 0.0;
  double loss_primal = 0.0;
  double loss_reference = 0.0;
  double eta = 0.0;
  double l2_rel = std::numeric_limits<double>::quiet_NaN();
  double h1_rel = std::numeric_limits<double>::quiet_NaN();
  long n_primal_points = 0;
  long n_cells = 0;
  bool refreshed = false;
};

/// Diagnostics captured at each quadrature rebuild.
struct RefreshEvent {
  long epoch = 0;
  double eta_before = 0.0;       // indicator that triggered the rebuild
  double eta_after = 0.0;        // indicator right after the rebuild
  double loss_primal_after = 0.0;
  long n_cells = 0;
  long n_primal_points = 0;
  long n_reference_points = 0;
  bool maxevals_flagged = false;
};

struct TrainingRun {
  std::vector<EpochRecord> records;
  MlpParams final_params;
  std::vector<std::pair<long, std::vector<CellRecord>>> partition_history;
  std::vector<RefreshEvent> refreshes;

  // per-epoch histories consumed by match_budget
  std::vector<long> primal_point_history;
  std::vector<long> reference_point_history;
  std::vector<long> partition_count_history;

  bool nonfinite_abort = false;
  std::string stop_reason;
};

struct StrategySpec {
  Strategy kind = Strategy::aq;
  PointBudget budget;  // required for the non-adaptive strategies
  bool lhc_midpoint = false;
};

/// true iff this epoch must rebuild the quadrature (epoch 0 always adapts).
bool refresh_decision(double eta, double tau, long epoch);

/// Called after every appended record; the current parameters and live
/// quadrature are exposed for external probes.
using EpochObserver =
    std::function<void(const EpochRecord&, const MlpParams&, const QuadratureSet&)>;

TrainingRun train(const Problem& problem, const MlpArch& arch, std::uint64_t seed,
                  const TrainerConfig& cfg, const StrategySpec& strategy,
                  const EpochObserver& observer = nullptr);

}  // namespace aq
