#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "aq/problems.hpp"
#include "aq/sampling.hpp"
#include "aq/trainer.hpp"

namespace aq {

/// Fully-resolved run configuration parsed from a JSON config file.
/// Unknown keys anywhere in the tree are rejected.
struct RunConfig {
  // problem block
  std::string problem_name = "fa-arctan-well";
  double epsilon = 0.005;
  double gamma_d = 10.0;
  std::optional<Box> domain_override;

  // net block
  int layers = 4;
  int width = 25;
  std::uint64_t seed = 1234;

  // quadrature block
  Strategy strategy = Strategy::aq;
  PointBudget budget;        // baseline budgets (points / reference_points / partitions)
  bool lhc_midpoint = false;

  // quadrature + optimizer blocks land here
  TrainerConfig trainer;

  // output block
  std::string out_dir = "out";
  std::string csv_name = "history.csv";
  long snapshot_cadence = 0;  // 0 = snapshot at refreshes only

  // integrate block (cmd_integrate only)
  std::string integrand;   // const | arctan-x | arctan-y | fa-misfit | residual
  std::string checkpoint;  // optional parameter source for net-based integrands

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);

  Problem make_problem_instance() const;
  MlpArch make_arch(int in_dim) const;

  /// Serialised echo of the configuration with all defaults filled in.
  std::string resolved_json() const;
};

/// Append-only CSV history writer; each row is written with a single
/// flushed write so the file stays parseable after an abnormal stop.
class HistoryCsv {
 public:
  explicit HistoryCsv(const std::string& path);
  ~HistoryCsv();
  HistoryCsv(const HistoryCsv&) = delete;
  HistoryCsv& operator=(const HistoryCsv&) = delete;

  void write_row(const EpochRecord& rec);

  static const char* header();

 private:
  std::FILE* file_ = nullptr;
};

}  // namespace aq
