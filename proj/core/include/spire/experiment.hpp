#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spire/eval.hpp"
#include "spire/schedule.hpp"
#include "spire/synthgen.hpp"
#include "spire/trainer.hpp"

namespace spire {

// ---------------------------------------------------------------------------
// Experiment orchestration: declarative configs, seeded run directories,
// ablation variants, evaluation reports and cross-run summaries. The CLI is
// a thin shell over the cmd_* entry points so everything here is testable
// in-process.
// ---------------------------------------------------------------------------

struct DatasetSpec {
  std::string preset = "D1";
  std::uint64_t seed = 1000;  // generator seed (fixed across training seeds)
  std::optional<GeneratorConfig> custom;  // overrides the preset when present
};

struct ModelSpec {
  int hidden = 64;
  int d_sh = 3;
  int d_pr = 3;
  int conv_halfwidth = 4;
  double dropout = 0.3;
  int lag = 3;
  bool bidirectional = false;
};

struct EvalOptions {
  int folds = 5;
  double ridge_lambda = -1;
  int decode_trees = 100;
  int decode_cap = 50000;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  std::string schedule_name = "synthetic_default";
  std::optional<ScheduleTable> schedule_inline;  // wins over schedule_name
  TrainConfig train;
  EvalOptions eval;
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "runs";
  std::string variant = "full";

  ExperimentConfig() { train.max_epochs = 500; }
};

std::string experiment_config_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
ScheduleTable resolve_schedule(const ExperimentConfig& c);

// Content hash over the canonical config with seeds and out_dir cleared;
// (hash, seed) identifies a run.
std::string config_hash(const ExperimentConfig& c);

// --- ablation registry ---

struct AblationSpec {
  std::string name;
  std::vector<std::string> zero_weights;  // loss-term names set to zero in every phase
  bool identity_aligner = false;
  bool no_private_ramp = false;
  bool no_freeze = false;
  bool no_var_guard = false;
};

const std::vector<AblationSpec>& ablation_registry();
AblationSpec ablation_by_name(const std::string& name);
void apply_ablation(const AblationSpec& spec, ScheduleTable& schedule, TrainControls& controls);

// --- run directories ---

// Relative paths are resolved under $SPIRE_OUT_ROOT when that is set.
std::string resolve_out_path(const std::string& path);

struct RunPaths {
  std::string dir;
  std::string config;
  std::string history;
  std::string ck_best;
  std::string ck_last;
  std::string done;
  std::string eval_dir;
};
RunPaths run_paths(const std::string& out_root, const std::string& run_name);
std::string run_name(const ExperimentConfig& c, std::uint64_t seed);

// Default dataset container location for a config.
std::string dataset_dir_for(const ExperimentConfig& c);

// --- commands (return ErrorCode-style process exit codes) ---

int cmd_generate(const std::string& preset, std::uint64_t seed, const std::string& out_dir);

// Trains every seed in the config (optionally in parallel). Completed runs
// (matching DONE marker) are skipped; with resume, partial runs continue
// from their last checkpoint.
int cmd_train(const ExperimentConfig& config, bool resume, int threads,
              const std::string& dataset_dir_override = "");

int cmd_eval(const std::vector<std::string>& run_dirs, const std::string& dataset_dir,
             const std::vector<std::string>& metrics);

int cmd_ablate(const ExperimentConfig& base, const std::vector<std::string>& variants,
               const std::vector<std::uint64_t>& seeds, int threads,
               const std::string& dataset_dir_override = "");

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

// --- in-process variants used by tests and the acceptance suite ---

struct RunResult {
  std::string dir;
  std::uint64_t seed = 0;
  bool skipped = false;  // already complete
};

// Single-seed training run with history/checkpoints on disk. Throws spire
// errors on failure.
RunResult run_training(const ExperimentConfig& config, std::uint64_t seed,
                       const TrialDataset& data, bool resume);

struct RunEvaluation {
  std::string run_dir;
  std::string variant;
  std::string preset;
  std::uint64_t seed = 0;
  int best_epoch = -1;
  double best_val = 0;
  LatentRecovery recovery;
  std::vector<SubsetMse> recon;
  std::vector<VariancePartition> partition;  // per region (when requested)
  bool has_recovery = false;
  bool has_partition = false;
};

RunEvaluation evaluate_run(const std::string& run_dir, const LoadedDataset& dataset,
                           const std::vector<std::string>& metrics);
void write_run_evaluation(const RunEvaluation& ev, const std::string& eval_dir);
RunEvaluation load_run_evaluation(const std::string& run_dir);

}  // namespace spire
