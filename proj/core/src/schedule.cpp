#include "spire/schedule.hpp"

#include <nlohmann/json.hpp>

#include "spire/errors.hpp"

namespace spire {

using nlohmann::json;

void ScheduleTable::validate() const {
  check_config(!phase_starts.empty(), "schedule: needs at least one phase");
  check_config(phase_starts.front() == 0, "schedule: first phase must start at epoch 0");
  check_config(phase_starts.size() == phases.size(),
               "schedule: phase_starts and phases must align");
  for (std::size_t i = 1; i < phase_starts.size(); ++i)
    check_config(phase_starts[i] > phase_starts[i - 1],
                 "schedule: phase boundaries must be strictly increasing");
  check_config(gate_start <= gate_end, "schedule: gate interval inverted");
  check_config(freeze_start <= freeze_end, "schedule: freeze interval inverted");
  check_config(gate_start >= 0 && gate_end <= max_epochs, "schedule: gate interval out of range");
  check_config(freeze_start >= 0 && freeze_end <= max_epochs,
               "schedule: freeze interval out of range");
  check_config(aligner_warmup >= 0, "schedule: aligner_warmup must be >= 0");
  for (const auto& w : phases) {
    check_config(w.rec >= 0 && w.cross >= 0 && w.self >= 0 && w.align >= 0 && w.orth >= 0 &&
                     w.mapid >= 0 && w.align_reg >= 0 && w.var_sh >= 0 && w.var_pr >= 0,
                 "schedule: loss weights must be non-negative");
    check_config(w.tau > 0, "schedule: tau must be positive");
  }
}

int schedule_phase(const ScheduleTable& table, int epoch) {
  int phase = 0;
  for (std::size_t i = 0; i < table.phase_starts.size(); ++i)
    if (epoch >= table.phase_starts[i]) phase = static_cast<int>(i);
  return phase;
}

const LossWeights<double>& schedule_weights(const ScheduleTable& table, int epoch) {
  return table.phases[static_cast<std::size_t>(schedule_phase(table, epoch))];
}

double private_gate(const ScheduleTable& table, int epoch) {
  if (epoch >= table.gate_end) return 1.0;
  if (epoch < table.gate_start) return 0.0;
  return static_cast<double>(epoch - table.gate_start) /
         static_cast<double>(table.gate_end - table.gate_start);
}

bool in_freeze_window(const ScheduleTable& table, int epoch) {
  return epoch >= table.freeze_start && epoch < table.freeze_end;
}

ScheduleTable synthetic_schedule() {
  ScheduleTable t;
  t.phase_starts = {0, 80, 140};
  LossWeights<double> pre, ramp, post;
  pre.rec = 1.00;
  pre.align = 0.22;
  pre.cross = 0.03;
  pre.self = 0.02;
  pre.orth = 0.008;
  pre.mapid = 0.010;
  pre.align_reg = 1e-4;
  pre.var_sh = 0.005;
  pre.var_pr = 0.002;
  ramp = pre;
  ramp.align = 0.10;
  ramp.cross = 0.05;
  ramp.self = 0.04;
  ramp.orth = 0.015;
  ramp.mapid = 0.005;
  ramp.align_reg = 5e-4;
  post = pre;
  post.align = 0.08;
  post.cross = 0.07;
  post.self = 0.03;
  post.orth = 0.025;
  post.mapid = 0.000;
  post.align_reg = 1e-4;
  t.phases = {pre, ramp, post};
  t.gate_start = 80;
  t.gate_end = 140;
  t.freeze_start = 90;
  t.freeze_end = 110;
  t.aligner_warmup = 0;
  t.max_epochs = 500;
  return t;
}

ScheduleTable real_schedule() {
  ScheduleTable t;
  t.phase_starts = {0, 60, 100, 140};
  LossWeights<double> w0;
  w0.rec = 1.00;
  w0.align = 0.30;
  w0.orth = 0.012;
  w0.self = 0.03;
  w0.cross = 0.00;
  w0.mapid = 0.005;
  w0.align_reg = 0.0;
  w0.var_sh = 0.005;
  w0.var_pr = 0.002;
  LossWeights<double> w1 = w0;
  w1.self = 0.05;
  w1.cross = 0.05;
  w1.align_reg = 5e-5;
  LossWeights<double> w2 = w1;
  w2.align = 0.38;
  w2.orth = 0.015;
  w2.cross = 0.06;
  w2.mapid = 0.003;
  w2.align_reg = 7.5e-5;
  LossWeights<double> w3 = w2;
  w3.align = 0.45;
  w3.mapid = 0.000;
  w3.align_reg = 1e-4;
  t.phases = {w0, w1, w2, w3};
  t.gate_start = 0;
  t.gate_end = 0;  // private latents active from the start
  t.freeze_start = 0;
  t.freeze_end = 0;
  t.aligner_warmup = 60;
  t.max_epochs = 200;
  return t;
}

ScheduleTable schedule_from_name(const std::string& name) {
  if (name == "synthetic_default") return synthetic_schedule();
  if (name == "real_default") return real_schedule();
  throw ConfigError("unknown schedule preset '" + name + "'");
}

static json weights_to_json(const LossWeights<double>& w) {
  return json{{"rec", w.rec},
              {"cross", w.cross},
              {"self", w.self},
              {"align", w.align},
              {"orth", w.orth},
              {"mapid", w.mapid},
              {"align_reg", w.align_reg},
              {"var_sh", w.var_sh},
              {"var_pr", w.var_pr},
              {"tau", w.tau},
              {"vic_inv", w.vic_inv},
              {"vic_var", w.vic_var},
              {"vic_cov", w.vic_cov},
              {"vic_gamma", w.vic_gamma},
              {"vic_eps", w.vic_eps}};
}

static LossWeights<double> weights_from_json(const json& j) {
  LossWeights<double> w;
  w.rec = j.value("rec", 1.0);
  w.cross = j.value("cross", 0.0);
  w.self = j.value("self", 0.0);
  w.align = j.value("align", 0.0);
  w.orth = j.value("orth", 0.0);
  w.mapid = j.value("mapid", 0.0);
  w.align_reg = j.value("align_reg", 0.0);
  w.var_sh = j.value("var_sh", 0.0);
  w.var_pr = j.value("var_pr", 0.0);
  w.tau = j.value("tau", 0.1);
  w.vic_inv = j.value("vic_inv", 25.0);
  w.vic_var = j.value("vic_var", 25.0);
  w.vic_cov = j.value("vic_cov", 1.0);
  w.vic_gamma = j.value("vic_gamma", 1.0);
  w.vic_eps = j.value("vic_eps", 1e-4);
  return w;
}

std::string schedule_to_json(const ScheduleTable& t) {
  json j;
  j["phase_starts"] = t.phase_starts;
  j["phases"] = json::array();
  for (const auto& w : t.phases) j["phases"].push_back(weights_to_json(w));
  j["gate_start"] = t.gate_start;
  j["gate_end"] = t.gate_end;
  j["freeze_start"] = t.freeze_start;
  j["freeze_end"] = t.freeze_end;
  j["aligner_warmup"] = t.aligner_warmup;
  j["max_epochs"] = t.max_epochs;
  return j.dump();
}

ScheduleTable schedule_from_json(const std::string& text) {
  json j = json::parse(text);
  ScheduleTable t;
  t.phase_starts = j.at("phase_starts").get<std::vector<int>>();
  for (const auto& w : j.at("phases")) t.phases.push_back(weights_from_json(w));
  t.gate_start = j.value("gate_start", 0);
  t.gate_end = j.value("gate_end", 0);
  t.freeze_start = j.value("freeze_start", 0);
  t.freeze_end = j.value("freeze_end", 0);
  t.aligner_warmup = j.value("aligner_warmup", 0);
  t.max_epochs = j.value("max_epochs", 500);
  t.validate();
  return t;
}

}  // namespace spire
