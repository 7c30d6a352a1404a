#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "aq/config.hpp"
#include "aq/loss.hpp"
#include "aq/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// pinned network behind the committed arctan-well oracle fixture
constexpr std::uint64_t kFixtureSeed = 1234;
constexpr int kFixtureMesh = 1024;
constexpr int kFixtureOrder = 10;

aq::MlpArch fixture_arch() { return {2, 1, 4, 25}; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

aq::MlpParams net_for_integrand(const aq::RunConfig& cfg) {
  if (!cfg.checkpoint.empty()) return aq::load_checkpoint(cfg.checkpoint);
  return aq::init_glorot(cfg.make_arch(2), cfg.seed);
}

struct IntegrandSetup {
  aq::Integrand f;
  std::vector<aq::Box> domain;
};

IntegrandSetup make_integrand(const aq::RunConfig& cfg) {
  IntegrandSetup setup;
  setup.domain = {cfg.domain_override ? *cfg.domain_override : aq::unit_box(2)};
  if (cfg.integrand == "const") {
    setup.f = [](const aq::MatrixXd& pts) { return aq::VectorXd::Ones(pts.cols()); };
  } else if (cfg.integrand == "arctan-x" || cfg.integrand == "arctan-y") {
    const int axis = cfg.integrand == "arctan-x" ? 0 : 1;
    setup.f = [axis](const aq::MatrixXd& pts) {
      return aq::VectorXd(
          (200.0 * (pts.row(axis).array() - 0.5)).atan().matrix().transpose());
    };
  } else if (cfg.integrand == "fa-misfit") {
    const aq::Problem p = aq::make_fa_arctan_well();
    setup.domain = p.domain;
    setup.f = aq::residual_integrand(p, net_for_integrand(cfg));
  } else if (cfg.integrand == "residual") {
    const aq::Problem p = cfg.make_problem_instance();
    setup.domain = p.domain;
    if (cfg.checkpoint.empty())
      throw std::invalid_argument("integrate: residual integrand needs a checkpoint");
    setup.f = aq::residual_integrand(p, aq::load_checkpoint(cfg.checkpoint));
  } else {
    throw std::invalid_argument("integrate: unknown integrand \"" + cfg.integrand +
                                "\"");
  }
  return setup;
}

int cmd_integrate(const aq::RunConfig& cfg) {
  const IntegrandSetup setup = make_integrand(cfg);
  const int d = setup.domain.front().dim();
  const aq::RulePair pair =
      aq::make_rule_pair(d, cfg.trainer.order_primal, cfg.trainer.order_reference);
  const aq::AdaptiveResult res =
      aq::adapt_integrate(setup.f, aq::uniform_partition(setup.domain,
                                                         cfg.trainer.base_partition),
                          pair, cfg.trainer.aq);

  fs::create_directories(cfg.out_dir);
  std::ofstream os(fs::path(cfg.out_dir) / "partition.jsonl");
  aq::dump_partition_jsonl(res, os);
  write_text(fs::path(cfg.out_dir) / "config_resolved.json", cfg.resolved_json());

  std::printf("S = %.17g\nE = %.17g\ncells = %zu\nevals = %ld\nterminated = %s\n",
              res.integral, res.error_estimate, res.partition.size(), res.evals_used,
              res.terminated_by == aq::Termination::tolerance ? "tolerance"
                                                              : "maxevals");
  return 0;
}

// shared by train and compare: one full run with CSV/snapshot/checkpoint output
aq::TrainingRun run_strategy(const aq::RunConfig& cfg, const aq::Problem& problem,
                             const aq::StrategySpec& spec, const fs::path& out_dir,
                             const std::string& csv_name) {
  const aq::MlpArch arch = cfg.make_arch(problem.dim());
  aq::HistoryCsv csv((out_dir / csv_name).string());
  const long cadence = cfg.snapshot_cadence;

  aq::EpochObserver observer = [&](const aq::EpochRecord& rec, const aq::MlpParams&,
                                   const aq::QuadratureSet& quads) {
    csv.write_row(rec);
    const bool cadence_hit = cadence > 0 && rec.epoch % cadence == 0;
    if ((rec.refreshed || cadence_hit) && !quads.domain_partition.empty()) {
      std::ofstream os(out_dir /
                       ("partition_epoch_" + std::to_string(rec.epoch) + ".jsonl"));
      aq::dump_partition_jsonl(quads.domain_partition, os);
    }
  };

  aq::TrainingRun run = aq::train(problem, arch, cfg.seed, cfg.trainer, spec, observer);
  aq::save_checkpoint(run.final_params,
                      (out_dir / (std::string("checkpoint_") + aq::to_string(spec.kind) +
                                  ".bin"))
                          .string());
  return run;
}

int cmd_train(const aq::RunConfig& cfg) {
  const aq::Problem problem = cfg.make_problem_instance();
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config_resolved.json", cfg.resolved_json());

  aq::StrategySpec spec;
  spec.kind = cfg.strategy;
  spec.budget = cfg.budget;
  spec.lhc_midpoint = cfg.lhc_midpoint;

  const aq::TrainingRun run =
      run_strategy(cfg, problem, spec, cfg.out_dir, cfg.csv_name);
  const aq::EpochRecord& last = run.records.back();
  std::printf("epochs = %ld\nrefreshes = %zu\nloss_primal = %.8g\nl2_rel = %.8g\n"
              "stop = %s\n",
              last.epoch, run.refreshes.size(), last.loss_primal, last.l2_rel,
              run.stop_reason.c_str());
  return run.nonfinite_abort ? 1 : 0;
}

int cmd_compare(const aq::RunConfig& cfg, const std::vector<std::string>& strategy_names) {
  std::vector<aq::Strategy> strategies;
  for (const std::string& name : strategy_names) {
    const aq::Strategy s = aq::strategy_from_string(name);
    if (std::find(strategies.begin(), strategies.end(), s) != strategies.end()) {
      std::fprintf(stderr, "warning: duplicate strategy \"%s\" ignored\n", name.c_str());
      continue;
    }
    strategies.push_back(s);
  }
  if (strategies.empty())
    throw std::invalid_argument("compare: no strategies given");

  const aq::Problem problem = cfg.make_problem_instance();
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config_resolved.json", cfg.resolved_json());

  struct Row {
    std::string name;
    double l2, h1, wall;
    long points;
  };
  std::vector<Row> rows;

  // the adaptive run always goes first: it defines the point budget
  aq::StrategySpec aq_spec;
  aq_spec.kind = aq::Strategy::aq;
  const aq::TrainingRun aq_run =
      run_strategy(cfg, problem, aq_spec, cfg.out_dir, "history_aq.csv");
  const aq::PointBudget budget =
      aq::match_budget(aq_run.primal_point_history, aq_run.reference_point_history,
                       aq_run.partition_count_history, problem.dim());
  {
    const aq::EpochRecord& last = aq_run.records.back();
    rows.push_back({"aq", last.l2_rel, last.h1_rel, last.wall_time,
                    last.n_primal_points});
  }

  for (aq::Strategy s : strategies) {
    if (s == aq::Strategy::aq) continue;
    aq::StrategySpec spec;
    spec.kind = s;
    spec.budget = budget;
    spec.lhc_midpoint = cfg.lhc_midpoint;
    const std::string name = aq::to_string(s);
    const aq::TrainingRun run =
        run_strategy(cfg, problem, spec, cfg.out_dir, "history_" + name + ".csv");
    const aq::EpochRecord& last = run.records.back();
    rows.push_back({name, last.l2_rel, last.h1_rel, last.wall_time,
                    last.n_primal_points});
  }

  std::ofstream os(fs::path(cfg.out_dir) / "summary.csv");
  os << "strategy,final_l2_rel,final_h1_rel,n_points,wall_s\n";
  std::printf("%-12s %14s %14s %10s %10s\n", "strategy", "final_l2_rel",
              "final_h1_rel", "n_points", "wall_s");
  os.precision(10);
  for (const Row& r : rows) {
    os << r.name << ',' << r.l2 << ',' << r.h1 << ',' << r.points << ',' << r.wall
       << '\n';
    std::printf("%-12s %14.6g %14.6g %10ld %10.1f\n", r.name.c_str(), r.l2, r.h1,
                r.points, r.wall);
  }
  return 0;
}

int cmd_gen_fixtures(const std::string& out_dir) {
  const aq::Problem p = aq::make_fa_arctan_well();
  const aq::MlpParams net = aq::init_glorot(fixture_arch(), kFixtureSeed);
  long n_points = 0;
  const double integral =
      aq::streamed_domain_term(p, net, kFixtureMesh, kFixtureOrder, &n_points);

  json fixture;
  fixture["problem"] = p.name;
  fixture["arch"] = {{"layers", fixture_arch().hidden_layers},
                     {"width", fixture_arch().width},
                     {"in_dim", 2},
                     {"out_dim", 1}};
  fixture["seed"] = kFixtureSeed;
  fixture["mesh"] = kFixtureMesh;
  fixture["order"] = kFixtureOrder;
  fixture["n_points"] = n_points;
  fixture["integral"] = integral;
  fixture["loss"] = std::sqrt(integral);

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "fa_oracle.json", fixture.dump(2) + "\n");
  std::printf("fa_oracle: integral = %.17g over %ld points\n", integral, n_points);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anisotropic h-adaptive composite quadrature for residual training"};
  app.require_subcommand(1);

  std::string config_path, out_override, fixtures_out = ".";
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  int threads = 1;
  std::vector<std::string> strategy_names;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON config file");
    if (needs_config) opt->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--threads", threads, "worker threads for loss assembly")
        ->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed_override = s; has_seed = true; },
        "seed override");
  };

  CLI::App* integrate = app.add_subcommand("integrate", "run one adaptive build");
  add_common(integrate, true);
  CLI::App* train = app.add_subcommand("train", "train with the configured strategy");
  add_common(train, true);
  CLI::App* compare =
      app.add_subcommand("compare", "budget-matched strategy comparison");
  add_common(compare, true);
  compare->add_option("strategies", strategy_names, "strategies to compare");
  CLI::App* fixtures = app.add_subcommand("gen-fixtures", "recompute oracle fixtures");
  fixtures->add_option("--out", fixtures_out, "fixture output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    aq::set_loss_threads(threads);
    if (fixtures->parsed()) return cmd_gen_fixtures(fixtures_out);

    aq::RunConfig cfg = aq::RunConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (has_seed) cfg.seed = seed_override;

    if (integrate->parsed()) return cmd_integrate(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (compare->parsed()) {
      if (strategy_names.empty()) strategy_names = {"aq"};
      return cmd_compare(cfg, strategy_names);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
  return 0;
}
