#include "aq/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace aq {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key \"" + where + it.key() + "\"");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig cfg;
  json root = json::parse(text);
  reject_unknown(root, "",
                 {"problem", "net", "quadrature", "optimizer", "output", "integrate"});

  if (root.contains("problem")) {
    const json& p = root["problem"];
    reject_unknown(p, "problem.", {"name", "epsilon", "gamma_d", "domain"});
    read(p, "name", cfg.problem_name);
    read(p, "epsilon", cfg.epsilon);
    read(p, "gamma_d", cfg.gamma_d);
    if (p.contains("domain")) {
      const auto spans = p.at("domain").get<std::vector<std::vector<double>>>();
      const int d = static_cast<int>(spans.size());
      VectorXd lo(d), w(d);
      for (int i = 0; i < d; ++i) {
        if (spans[i].size() != 2)
          throw std::invalid_argument("config: problem.domain entries must be [lo, hi]");
        lo[i] = spans[i][0];
        w[i] = spans[i][1] - spans[i][0];
      }
      cfg.domain_override = Box(lo, w);
    }
  }

  if (root.contains("net")) {
    const json& n = root["net"];
    reject_unknown(n, "net.", {"layers", "width", "seed"});
    read(n, "layers", cfg.layers);
    read(n, "width", cfg.width);
    read(n, "seed", cfg.seed);
  }

  if (root.contains("quadrature")) {
    const json& q = root["quadrature"];
    reject_unknown(q, "quadrature.",
                   {"strategy", "order_primal", "order_reference", "base_partition",
                    "rtol", "atol", "q", "maxevals", "refresh_tol", "points",
                    "reference_points", "partitions", "lhc_midpoint"});
    if (q.contains("strategy"))
      cfg.strategy = strategy_from_string(q.at("strategy").get<std::string>());
    read(q, "order_primal", cfg.trainer.order_primal);
    read(q, "order_reference", cfg.trainer.order_reference);
    read(q, "base_partition", cfg.trainer.base_partition);
    read(q, "rtol", cfg.trainer.aq.rtol);
    read(q, "atol", cfg.trainer.aq.atol);
    read(q, "q", cfg.trainer.aq.exponent);
    read(q, "maxevals", cfg.trainer.aq.maxevals);
    read(q, "refresh_tol", cfg.trainer.refresh_tol);
    read(q, "points", cfg.budget.primal_points);
    read(q, "reference_points", cfg.budget.reference_points);
    read(q, "partitions", cfg.budget.uniform_partitions);
    read(q, "lhc_midpoint", cfg.lhc_midpoint);
  }

  if (root.contains("optimizer")) {
    const json& o = root["optimizer"];
    reject_unknown(o, "optimizer.",
                   {"kind", "lr", "beta1", "beta2", "memory", "reset_on_refresh",
                    "max_epochs", "time_limit_s", "progress_tol", "progress_patience"});
    if (o.contains("kind")) {
      const std::string kind = o.at("kind").get<std::string>();
      if (kind == "adam") {
        cfg.trainer.optimizer.kind = OptimizerConfig::Kind::adam;
      } else if (kind == "lbfgs") {
        cfg.trainer.optimizer.kind = OptimizerConfig::Kind::lbfgs;
      } else {
        throw std::invalid_argument("config: unknown optimizer kind " + kind);
      }
    }
    read(o, "lr", cfg.trainer.optimizer.lr);
    read(o, "beta1", cfg.trainer.optimizer.beta1);
    read(o, "beta2", cfg.trainer.optimizer.beta2);
    read(o, "memory", cfg.trainer.optimizer.memory);
    read(o, "reset_on_refresh", cfg.trainer.reset_optimizer_on_refresh);
    read(o, "max_epochs", cfg.trainer.max_epochs);
    read(o, "time_limit_s", cfg.trainer.time_limit);
    read(o, "progress_tol", cfg.trainer.progress_tol);
    read(o, "progress_patience", cfg.trainer.progress_patience);
  }

  if (root.contains("output")) {
    const json& o = root["output"];
    reject_unknown(o, "output.",
                   {"directory", "csv", "snapshot_cadence", "eval_mesh",
                    "error_eval_stride"});
    read(o, "directory", cfg.out_dir);
    read(o, "csv", cfg.csv_name);
    read(o, "snapshot_cadence", cfg.snapshot_cadence);
    read(o, "eval_mesh", cfg.trainer.eval_mesh_per_axis);
    read(o, "error_eval_stride", cfg.trainer.error_eval_stride);
  }

  if (root.contains("integrate")) {
    const json& i = root["integrate"];
    reject_unknown(i, "integrate.", {"integrand", "checkpoint"});
    read(i, "integrand", cfg.integrand);
    read(i, "checkpoint", cfg.checkpoint);
  }

  return cfg;
}

Problem RunConfig::make_problem_instance() const {
  Problem p = make_problem(problem_name, epsilon, gamma_d);
  if (domain_override) {
    if (domain_override->dim() != p.dim())
      throw std::invalid_argument("config: problem.domain dimension mismatch");
    p.domain = {*domain_override};
  }
  return p;
}

MlpArch RunConfig::make_arch(int in_dim) const {
  MlpArch arch;
  arch.in_dim = in_dim;
  arch.out_dim = 1;
  arch.hidden_layers = layers;
  arch.width = width;
  arch.validate();
  return arch;
}

std::string RunConfig::resolved_json() const {
  json root;
  root["problem"] = {{"name", problem_name}, {"epsilon", epsilon}, {"gamma_d", gamma_d}};
  if (domain_override) {
    json spans = json::array();
    for (int i = 0; i < domain_override->dim(); ++i)
      spans.push_back({domain_override->lower[i],
                       domain_override->lower[i] + domain_override->widths[i]});
    root["problem"]["domain"] = spans;
  }
  root["net"] = {{"layers", layers}, {"width", width}, {"seed", seed}};
  root["quadrature"] = {{"strategy", to_string(strategy)},
                        {"order_primal", trainer.order_primal},
                        {"order_reference", trainer.order_reference},
                        {"base_partition", trainer.base_partition},
                        {"rtol", trainer.aq.rtol},
                        {"atol", trainer.aq.atol},
                        {"q", trainer.aq.exponent},
                        {"maxevals", trainer.aq.maxevals},
                        {"refresh_tol", trainer.refresh_tol},
                        {"points", budget.primal_points},
                        {"reference_points", budget.reference_points},
                        {"partitions", budget.uniform_partitions},
                        {"lhc_midpoint", lhc_midpoint},
                        {"rng", "splitmix64"}};
  root["optimizer"] = {
      {"kind", trainer.optimizer.kind == OptimizerConfig::Kind::adam ? "adam" : "lbfgs"},
      {"lr", trainer.optimizer.lr},
      {"beta1", trainer.optimizer.beta1},
      {"beta2", trainer.optimizer.beta2},
      {"memory", trainer.optimizer.memory},
      {"reset_on_refresh", trainer.reset_optimizer_on_refresh},
      {"max_epochs", trainer.max_epochs},
      {"time_limit_s", std::isfinite(trainer.time_limit) ? json(trainer.time_limit)
                                                         : json(nullptr)},
      {"progress_tol", trainer.progress_tol},
      {"progress_patience", trainer.progress_patience}};
  root["output"] = {{"directory", out_dir},
                    {"csv", csv_name},
                    {"snapshot_cadence", snapshot_cadence},
                    {"eval_mesh", trainer.eval_mesh_per_axis},
                    {"error_eval_stride", trainer.error_eval_stride}};
  if (!integrand.empty())
    root["integrate"] = {{"integrand", integrand}, {"checkpoint", checkpoint}};
  return root.dump(2);
}

HistoryCsv::HistoryCsv(const std::string& path) {
  file_ = std::fopen(path.c_str(), "w");
  if (!file_) throw std::runtime_error("HistoryCsv: cannot open " + path);
  std::fputs(header(), file_);
  std::fputc('\n', file_);
  std::fflush(file_);
}

HistoryCsv::~HistoryCsv() {
  if (file_) std::fclose(file_);
}

const char* HistoryCsv::header() {
  return "epoch,wall_s,loss_primal,loss_reference,eta,l2_rel,h1_rel,n_points,n_cells,"
         "refreshed";
}

void HistoryCsv::write_row(const EpochRecord& rec) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%ld,%d\n",
                rec.epoch, rec.wall_time, rec.loss_primal, rec.loss_reference, rec.eta,
                rec.l2_rel, rec.h1_rel, rec.n_primal_points, rec.n_cells,
                rec.refreshed ? 1 : 0);
  std::fputs(buf, file_);
  std::fflush(file_);
}

}  // namespace aq
