// SPDX-License-Identifier: Apache-2.0
/**
 * @file   pipeline.hpp
 * @brief  End-to-end orchestration: split, guidance, per-heuristic
 *         distillation with grid search, gated ensemble and evaluation.
 *
 * Config files are flat key=value text. Keys under "distill." apply to every
 * heuristic; "distill.<name>." keys (e.g. distill.cn.alpha=1) override them
 * for one heuristic. alpha, beta, delta and ensemble.lambda take
 * comma-separated grids.
 */
#ifndef LINKDISTILL_PIPELINE_HPP_
#define LINKDISTILL_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkdistill/data.hpp"
#include "linkdistill/distill.hpp"
#include "linkdistill/ensemble.hpp"
#include "linkdistill/heuristics.hpp"
#include "linkdistill/metrics.hpp"

namespace linkdistill {

/// Default search spaces.
inline const std::vector<double> kAlphaGrid = {0, 0.001, 1, 10};
inline const std::vector<double> kBetaGrid = {0, 0.001, 1, 10};
inline const std::vector<double> kDeltaGrid = {0.05, 0.1, 0.2};
inline const std::vector<double> kLambdaGrid = {0, 0.1, 1};

struct DistillGrid {
  std::vector<double> alpha = kAlphaGrid;
  std::vector<double> beta = kBetaGrid;
  std::vector<double> delta = kDeltaGrid;

  /// (alpha, beta, delta) points in lexicographic order. delta is only
  /// varied when alpha > 0, since it does nothing otherwise.
  std::vector<DistillConfig> expand(const DistillConfig& base) const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // dataset: either a LINQS pair or an edge list plus features
  std::string linqs_content;
  std::string linqs_cites;
  std::string graph_path;
  std::string features_path;
  std::string split_dir;  ///< reuse an existing split when set

  double val_frac = 0.05;
  double test_frac = 0.15;
  std::vector<HeuristicKind> heuristics = {HeuristicKind::cn(), HeuristicKind::aa(),
                                           HeuristicKind::ra(), HeuristicKind::csp(6)};
  std::size_t guidance_rounds = 10;
  DistillConfig distill;
  DistillGrid grid;
  /// Raw per-heuristic overrides: lower-case name -> key -> value.
  std::map<std::string, std::map<std::string, std::string>> heuristic_overrides;
  bool train_plain_baseline = true;

  EnsembleConfig ensemble;
  std::vector<double> lambda_grid = kLambdaGrid;

  std::vector<std::size_t> eval_ks = {20, 50, 100};
  std::size_t overlap_k = 10;  ///< cutoff for positive-edge-set analysis
  bool allow_custom_grid = false;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  ///< 0: LINKDISTILL_JOBS or one per heuristic
  bool verbose = false;

  /// Throws ConfigError on an empty or duplicated heuristic list, or grid
  /// values outside the defaults unless allow_custom_grid is set.
  void validate() const;

  /// Effective base config and grid for one heuristic.
  std::pair<DistillConfig, DistillGrid> distill_space(const HeuristicKind& kind) const;
};

/// Applies one key=value entry; throws ConfigError on unknown keys or
/// malformed values.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one distill key (alpha, epochs, hidden, ...) to a config/grid.
void apply_distill_key(DistillConfig& cfg, DistillGrid& grid, const std::string& key,
                       const std::string& value);

struct GridCandidate {
  std::vector<double> key;  ///< compared lexicographically on ties
  double metric = 0.0;
};

/// Index of the best candidate: highest metric, ties to the smallest key.
std::size_t grid_select(std::span<const GridCandidate> candidates);

struct StageTiming {
  double guidance = 0.0;  ///< wall clock of each stage
  double distill = 0.0;
  double ensemble = 0.0;
  double total = 0.0;
  double guidance_serial = 0.0;  ///< sum over heuristics
  double distill_serial = 0.0;
  double guidance_max = 0.0;  ///< slowest heuristic
  double distill_max = 0.0;
};

struct StudentOutcome {
  HeuristicKind kind;
  DistillConfig config;
  double valid_hits = 0.0;  ///< at distill.eval_k
  std::map<std::size_t, double> test_hits;
  std::filesystem::path checkpoint;
  double guidance_seconds = 0.0;
  double distill_seconds = 0.0;
  /// subset_ratio(teacher positive set, this student's set) at overlap_k
  Ratio teacher_subset;
};

struct RunResult {
  EdgeSplit split;
  std::vector<StudentOutcome> students;
  std::optional<StudentOutcome> plain;
  std::map<std::string, std::map<std::size_t, double>> teacher_test_hits;
  std::map<std::string, Ratio> plain_teacher_subset;
  double lambda = 0.0;
  double ensemble_valid_hits = 0.0;
  std::map<std::size_t, double> ensemble_test_hits;
  StageTiming timing;
  std::filesystem::path report;
};

/// Runs every stage, writing checkpoints, grid tables and report.txt under
/// cfg.out_dir. Errors are rethrown as std::runtime_error tagged with the
/// failing stage.
RunResult run_pipeline(const RunConfig& cfg);

/// Resolves --jobs / LINKDISTILL_JOBS.
std::size_t resolve_jobs(std::size_t requested, std::size_t tasks);

}  // namespace linkdistill

#endif  // LINKDISTILL_PIPELINE_HPP_
