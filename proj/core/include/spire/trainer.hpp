#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spire/model.hpp"
#include "spire/schedule.hpp"
#include "spire/synthgen.hpp"

namespace spire {

struct TrainConfig {
  int max_epochs = 500;
  int batch_train = 8;
  int batch_val = 1;
  double lr = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  double clip_norm = 1.0;
  int early_stop_patience = 20;
  int early_stop_warmup = 140;  // epochs ignored by early stopping
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  bool standardize = true;
  int checkpoint_every = 25;  // resume-checkpoint interval in epochs

  void validate() const;
};

// Ablation control variants that change trainer behaviour rather than a
// loss weight.
struct TrainControls {
  bool pin_aligner_identity = false;  // kernels/mappers never leave identity
  bool gate_always_open = false;      // alpha_p == 1 from epoch 0
  bool disable_freeze = false;        // ignore the freeze window
};

struct SplitIndices {
  std::vector<int> train, val;
};

// Disjoint trial-level split, deterministic per seed.
SplitIndices split_trials(int n_trials, double fraction, std::uint64_t seed);
void tag_split(TrialDataset& data, const SplitIndices& split);

// Per-channel standardization fitted on training trials (raw channels,
// before lag augmentation).
struct Standardizer {
  std::vector<Vecf> mean, sd;  // per region
  bool identity = true;

  void fit(const TrialDataset& data, const std::vector<int>& train_idx);
  Matf apply(const Matf& trial, int region) const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // batch-averaged raw terms; .total uses the epoch's weights
  LossBreakdown val;    // trial-averaged raw terms; .total uses final-phase weights
  double lr = 0;
  double alpha = 0;
  int phase = 0;
  bool frozen = false;
  bool aligner_pinned = false;
  double grad_norm_pre = 0;   // max over the epoch's steps
  double grad_norm_post = 0;  // max over the epoch's steps, after clipping
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val = 0;
  bool early_stopped = false;
};

struct AdamState {
  std::vector<Matf> m, v;  // parallel to param_refs traversal
  long long step = 0;
};

// Everything needed to continue an interrupted run exactly.
struct TrainState {
  int next_epoch = 0;
  double lr = 0;
  double best_val = 0;
  int best_epoch = -1;
  double plateau_best = 0;
  int plateau_counter = 0;
  int early_counter = 0;
};

struct TrainResult {
  SpireParams<float> best;
  SpireParams<float> last;
  TrainHistory history;
  Standardizer norm;
  SplitIndices split;
  AdamState adam;
  TrainState state;
};

struct ResumeState {
  SpireParams<float> params;
  SpireParams<float> best_params;
  AdamState adam;
  TrainState state;
};

using EpochCallback =
    std::function<void(const EpochRecord&, const SpireParams<float>&, bool is_best)>;

// Resume checkpoints written every `every` epochs so interrupted runs can
// continue from the last saved state.
struct PeriodicCheckpoint {
  std::string dir;
  int every = 25;
};

// Full optimization loop: Adam with per-step global-norm clipping, phase
// weights from the schedule, the private-gate ramp, the shared-projection
// freeze window, plateau learning-rate halving and early stopping (never
// before early_stop_warmup). Deterministic per (data, dims, seed).
TrainResult train(const TrialDataset& data, const ModelDims& dims, const ScheduleTable& schedule,
                  const TrainConfig& cfg, const TrainControls& controls = {},
                  const EpochCallback& on_epoch = nullptr, const ResumeState* resume = nullptr,
                  const PeriodicCheckpoint* periodic = nullptr);

// Zeroes gradients of every shared projection when the epoch falls in the
// freeze window; aligners and everything else stay trainable.
void apply_freeze_window(const ScheduleTable& schedule, int epoch, SpireParams<float>& grads);

// --- checkpoint container ---

struct Checkpoint {
  SpireParams<float> params;
  Standardizer norm;
  ModelDims dims;
  std::uint64_t seed = 0;
  int epoch = 0;
  double val_loss = 0;
  std::optional<AdamState> adam;
  std::optional<TrainState> state;
  std::optional<SpireParams<float>> best_params;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& dir);

std::string model_dims_to_json(const ModelDims& dims);
ModelDims model_dims_from_json(const std::string& text);

// One UTF-8 JSON line per epoch for the training-history log.
std::string epoch_record_to_json(const EpochRecord& rec);
EpochRecord epoch_record_from_json(const std::string& line);

// Model-ready inputs: standardized, lag-augmented, transposed to
// (channels x time) per trial.
std::vector<std::vector<Matf>> prepare_inputs(const TrialDataset& data, const Standardizer& norm,
                                              int lag, const std::vector<int>& trial_idx);

}  // namespace spire
