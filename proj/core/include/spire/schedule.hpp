#pragma once

#include <string>
#include <vector>

#include "spire/losses.hpp"

namespace spire {

// Phase-scheduled loss weights plus the private-gate ramp, the shared
// projection freeze window, and the aligner identity warmup. Weights are
// piecewise constant; a boundary epoch belongs to the later phase.
struct ScheduleTable {
  std::vector<int> phase_starts;  // strictly increasing, first entry 0
  std::vector<LossWeights<double>> phases;
  int gate_start = 0;  // alpha_p == 0 before, 1 at/after gate_end, linear in between
  int gate_end = 0;    // gate_start == gate_end means the gate is always open
  int freeze_start = 0;  // [freeze_start, freeze_end) freezes shared projections
  int freeze_end = 0;
  int aligner_warmup = 0;  // epochs with aligners pinned to identity
  int max_epochs = 500;

  void validate() const;
};

const LossWeights<double>& schedule_weights(const ScheduleTable& table, int epoch);
int schedule_phase(const ScheduleTable& table, int epoch);
double private_gate(const ScheduleTable& table, int epoch);
bool in_freeze_window(const ScheduleTable& table, int epoch);

// Three-phase synthetic schedule (pre 0-80, ramp 80-140, post 140-500) with
// the gate ramp over 80-140 and the freeze window over 90-110.
ScheduleTable synthetic_schedule();
// Four-stage schedule used for real recordings: aligners pinned for the
// first 60 epochs, no freeze window, up to 200 epochs.
ScheduleTable real_schedule();

ScheduleTable schedule_from_name(const std::string& name);

std::string schedule_to_json(const ScheduleTable& t);
ScheduleTable schedule_from_json(const std::string& text);

template <typename S>
LossWeights<S> cast_weights(const LossWeights<double>& w) {
  LossWeights<S> o;
  o.rec = static_cast<S>(w.rec);
  o.cross = static_cast<S>(w.cross);
  o.self = static_cast<S>(w.self);
  o.align = static_cast<S>(w.align);
  o.orth = static_cast<S>(w.orth);
  o.mapid = static_cast<S>(w.mapid);
  o.align_reg = static_cast<S>(w.align_reg);
  o.var_sh = static_cast<S>(w.var_sh);
  o.var_pr = static_cast<S>(w.var_pr);
  o.tau = static_cast<S>(w.tau);
  o.vic_inv = static_cast<S>(w.vic_inv);
  o.vic_var = static_cast<S>(w.vic_var);
  o.vic_cov = static_cast<S>(w.vic_cov);
  o.vic_gamma = static_cast<S>(w.vic_gamma);
  o.vic_eps = static_cast<S>(w.vic_eps);
  return o;
}

}  // namespace spire
