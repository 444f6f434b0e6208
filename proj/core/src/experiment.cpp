#include "spire/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "spire/container.hpp"
#include "spire/errors.hpp"
#include "spire/hash.hpp"
#include "spire/plot.hpp"

namespace spire {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config serialization ---

static json train_config_to_json(const TrainConfig& t) {
  return json{{"max_epochs", t.max_epochs},
              {"batch_train", t.batch_train},
              {"batch_val", t.batch_val},
              {"lr", t.lr},
              {"plateau_factor", t.plateau_factor},
              {"plateau_patience", t.plateau_patience},
              {"clip_norm", t.clip_norm},
              {"early_stop_patience", t.early_stop_patience},
              {"early_stop_warmup", t.early_stop_warmup},
              {"split_fraction", t.split_fraction},
              {"seed", t.seed},
              {"standardize", t.standardize},
              {"checkpoint_every", t.checkpoint_every}};
}

static TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.max_epochs = j.value("max_epochs", 500);
  t.batch_train = j.value("batch_train", 8);
  t.batch_val = j.value("batch_val", 1);
  t.lr = j.value("lr", 1e-3);
  t.plateau_factor = j.value("plateau_factor", 0.5);
  t.plateau_patience = j.value("plateau_patience", 10);
  t.clip_norm = j.value("clip_norm", 1.0);
  t.early_stop_patience = j.value("early_stop_patience", 20);
  t.early_stop_warmup = j.value("early_stop_warmup", 140);
  t.split_fraction = j.value("split_fraction", 0.8);
  t.seed = j.value("seed", std::uint64_t{0});
  t.standardize = j.value("standardize", true);
  t.checkpoint_every = j.value("checkpoint_every", 25);
  return t;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"preset", c.dataset.preset}, {"seed", c.dataset.seed}};
  if (c.dataset.custom)
    j["dataset"]["generator"] = json::parse(generator_config_to_json(*c.dataset.custom));
  j["model"] = {{"hidden", c.model.hidden},
                {"d_sh", c.model.d_sh},
                {"d_pr", c.model.d_pr},
                {"conv_halfwidth", c.model.conv_halfwidth},
                {"dropout", c.model.dropout},
                {"lag", c.model.lag},
                {"bidirectional", c.model.bidirectional}};
  if (c.schedule_inline) {
    j["schedule"] = json::parse(schedule_to_json(*c.schedule_inline));
  } else {
    j["schedule"] = c.schedule_name;
  }
  j["train"] = train_config_to_json(c.train);
  j["eval"] = {{"folds", c.eval.folds},
               {"ridge_lambda", c.eval.ridge_lambda},
               {"decode_trees", c.eval.decode_trees},
               {"decode_cap", c.eval.decode_cap}};
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["variant"] = c.variant;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  ExperimentConfig c;
  if (j.contains("dataset")) {
    c.dataset.preset = j["dataset"].value("preset", "D1");
    c.dataset.seed = j["dataset"].value("seed", std::uint64_t{1000});
    if (j["dataset"].contains("generator"))
      c.dataset.custom = generator_config_from_json(j["dataset"]["generator"].dump());
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.hidden = m.value("hidden", 64);
    c.model.d_sh = m.value("d_sh", 3);
    c.model.d_pr = m.value("d_pr", 3);
    c.model.conv_halfwidth = m.value("conv_halfwidth", 4);
    c.model.dropout = m.value("dropout", 0.3);
    c.model.lag = m.value("lag", 3);
    c.model.bidirectional = m.value("bidirectional", false);
  }
  if (j.contains("schedule")) {
    if (j["schedule"].is_string()) {
      c.schedule_name = j["schedule"].get<std::string>();
    } else {
      c.schedule_inline = schedule_from_json(j["schedule"].dump());
    }
  }
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  if (j.contains("eval")) {
    c.eval.folds = j["eval"].value("folds", 5);
    c.eval.ridge_lambda = j["eval"].value("ridge_lambda", -1.0);
    c.eval.decode_trees = j["eval"].value("decode_trees", 100);
    c.eval.decode_cap = j["eval"].value("decode_cap", 50000);
  }
  c.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
  c.out_dir = j.value("out_dir", "runs");
  c.variant = j.value("variant", "full");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return experiment_config_from_json(text);
}

ScheduleTable resolve_schedule(const ExperimentConfig& c) {
  ScheduleTable t = c.schedule_inline ? *c.schedule_inline : schedule_from_name(c.schedule_name);
  t.validate();
  return t;
}

std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig canon = c;
  canon.seeds.clear();
  canon.out_dir.clear();
  return sha256_hex(experiment_config_to_json(canon));
}

// --- ablations ---

const std::vector<AblationSpec>& ablation_registry() {
  static const std::vector<AblationSpec> reg = [] {
    std::vector<AblationSpec> v;
    v.push_back({"full", {}, false, false, false, false});
    for (const char* term : {"align", "orth", "cross", "self", "mapid", "align_reg"})
      v.push_back({std::string("abl_no_w_") + term, {term}, false, false, false, false});
    v.push_back({"abl_family_alignment", {"align", "mapid", "align_reg"}, false, false, false,
                 false});
    v.push_back({"ctrl_identity_aligner", {}, true, false, false, false});
    v.push_back({"ctrl_no_private_ramp", {}, false, true, false, false});
    v.push_back({"ctrl_no_freeze", {}, false, false, true, false});
    v.push_back({"ctrl_no_var_guard", {"var_sh", "var_pr"}, false, false, false, true});
    return v;
  }();
  return reg;
}

AblationSpec ablation_by_name(const std::string& name) {
  for (const auto& a : ablation_registry())
    if (a.name == name) return a;
  throw ConfigError("unknown ablation variant '" + name + "'");
}

void apply_ablation(const AblationSpec& spec, ScheduleTable& schedule, TrainControls& controls) {
  for (auto& w : schedule.phases) {
    for (const auto& term : spec.zero_weights) {
      if (term == "align") w.align = 0;
      else if (term == "orth") w.orth = 0;
      else if (term == "cross") w.cross = 0;
      else if (term == "self") w.self = 0;
      else if (term == "mapid") w.mapid = 0;
      else if (term == "align_reg") w.align_reg = 0;
      else if (term == "var_sh") w.var_sh = 0;
      else if (term == "var_pr") w.var_pr = 0;
      else if (term == "rec") w.rec = 0;
      else throw ConfigError("unknown loss term '" + term + "' in ablation");
    }
  }
  controls.pin_aligner_identity = controls.pin_aligner_identity || spec.identity_aligner;
  controls.gate_always_open = controls.gate_always_open || spec.no_private_ramp;
  controls.disable_freeze = controls.disable_freeze || spec.no_freeze;
}

// --- paths ---

std::string resolve_out_path(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("SPIRE_OUT_ROOT"); root && *root)
    return (fs::path(root) / path).string();
  return path;
}

RunPaths run_paths(const std::string& out_root, const std::string& name) {
  RunPaths p;
  p.dir = (fs::path(resolve_out_path(out_root)) / name).string();
  p.config = p.dir + "/config.json";
  p.history = p.dir + "/history.jsonl";
  p.ck_best = p.dir + "/checkpoint_best";
  p.ck_last = p.dir + "/checkpoint_last";
  p.done = p.dir + "/DONE";
  p.eval_dir = p.dir + "/eval";
  return p;
}

std::string run_name(const ExperimentConfig& c, std::uint64_t seed) {
  std::string preset = c.dataset.custom ? "custom" : c.dataset.preset;
  return c.variant + "-" + preset + "-s" + std::to_string(seed);
}

std::string dataset_dir_for(const ExperimentConfig& c) {
  std::string name;
  if (c.dataset.custom) {
    name = "custom-" + sha256_hex(generator_config_to_json(*c.dataset.custom)).substr(0, 10);
  } else {
    name = c.dataset.preset + "-g" + std::to_string(c.dataset.seed);
  }
  return (fs::path(resolve_out_path(c.out_dir)) / "datasets" / name).string();
}

// --- training runs ---

namespace {

LoadedDataset ensure_dataset(const ExperimentConfig& config, const std::string& override_dir) {
  std::string dir = override_dir.empty() ? dataset_dir_for(config) : resolve_out_path(override_dir);
  if (!fs::exists(fs::path(dir) / "manifest.json")) {
    if (!override_dir.empty())
      throw DataError("dataset not found at " + dir);
    GeneratorConfig gc = config.dataset.custom
                             ? *config.dataset.custom
                             : preset_config(preset_from_string(config.dataset.preset),
                                             config.dataset.seed);
    if (config.dataset.custom) gc.seed = config.dataset.seed;
    auto [data, bundle] = generate_dataset(gc);
    save_dataset(dir, data, bundle, gc, config.dataset.custom ? "" : config.dataset.preset);
  }
  return load_dataset(dir);
}

void parallel_jobs(int threads, int n_jobs, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n_jobs));
  if (threads == 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

RunResult run_training(const ExperimentConfig& config, std::uint64_t seed,
                       const TrialDataset& data, bool resume) {
  RunPaths rp = run_paths(config.out_dir, run_name(config, seed));
  const std::string hash = config_hash(config);
  const std::string done_payload = hash + ":" + std::to_string(seed) + "\n";

  RunResult rr;
  rr.dir = rp.dir;
  rr.seed = seed;
  if (fs::exists(rp.done)) {
    std::ifstream in(rp.done);
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (payload == done_payload) {
      rr.skipped = true;
      return rr;
    }
    fs::remove(rp.done);  // stale config: retrain
  }
  fs::create_directories(rp.dir);

  ExperimentConfig resolved = config;
  resolved.seeds = {seed};
  resolved.train.seed = seed;
  {
    std::ofstream out(rp.config, std::ios::trunc);
    if (!out) throw IoError("cannot write " + rp.config);
    out << experiment_config_to_json(resolved);
  }

  ScheduleTable schedule = resolve_schedule(config);
  TrainControls controls;
  apply_ablation(ablation_by_name(config.variant), schedule, controls);

  ModelDims dims;
  dims.regions = data.n_regions();
  dims.hidden = config.model.hidden;
  dims.d_sh = config.model.d_sh;
  dims.d_pr = config.model.d_pr;
  dims.conv_halfwidth = config.model.conv_halfwidth;
  dims.dropout = config.model.dropout;
  dims.lag = config.model.lag;
  dims.bidirectional = config.model.bidirectional;
  for (int r = 0; r < data.n_regions(); ++r)
    dims.channels.push_back(data.channels(r) * (config.model.lag + 1));

  TrainConfig tc = resolved.train;

  std::optional<ResumeState> rs;
  if (resume && fs::exists(fs::path(rp.ck_last) / "manifest.json")) {
    Checkpoint ck = load_checkpoint(rp.ck_last);
    if (ck.adam && ck.state && ck.best_params) {
      ResumeState state;
      state.params = ck.params;
      state.best_params = *ck.best_params;
      state.adam = *ck.adam;
      state.state = *ck.state;
      rs = std::move(state);
      // keep only history records from before the checkpoint
      if (fs::exists(rp.history)) {
        std::ifstream in(rp.history);
        std::vector<std::string> keep;
        for (std::string line; std::getline(in, line);) {
          if (line.empty()) continue;
          EpochRecord rec = epoch_record_from_json(line);
          if (rec.epoch < rs->state.next_epoch) keep.push_back(line);
        }
        in.close();
        std::ofstream out(rp.history, std::ios::trunc);
        for (const auto& l : keep) out << l << "\n";
      }
    }
  }
  if (!rs && fs::exists(rp.history)) fs::remove(rp.history);

  std::ofstream hist(rp.history, std::ios::app);
  if (!hist) throw IoError("cannot write " + rp.history);

  const EpochCallback on_epoch = [&](const EpochRecord& rec, const SpireParams<float>&, bool) {
    hist << epoch_record_to_json(rec) << "\n";
    hist.flush();
  };
  PeriodicCheckpoint periodic{rp.ck_last, tc.checkpoint_every};

  TrainResult result =
      train(data, dims, schedule, tc, controls, on_epoch, rs ? &*rs : nullptr, &periodic);

  Checkpoint best;
  best.params = result.best;
  best.norm = result.norm;
  best.dims = dims;
  best.seed = seed;
  best.epoch = result.history.best_epoch;
  best.val_loss = result.history.best_val;
  save_checkpoint(rp.ck_best, best);

  Checkpoint last;
  last.params = result.last;
  last.best_params = result.best;
  last.norm = result.norm;
  last.dims = dims;
  last.seed = seed;
  last.epoch = result.state.next_epoch - 1;
  last.val_loss = result.history.epochs.empty() ? 0.0 : result.history.epochs.back().val.total;
  last.adam = result.adam;
  last.state = result.state;
  save_checkpoint(rp.ck_last, last);

  std::ofstream done(rp.done, std::ios::trunc);
  done << done_payload;
  return rr;
}

// --- evaluation ---

RunEvaluation evaluate_run(const std::string& run_dir, const LoadedDataset& dataset,
                           const std::vector<std::string>& metrics) {
  auto wants = [&](const std::string& m) {
    if (metrics.empty()) return true;
    for (const auto& s : metrics)
      if (s == m) return true;
    return false;
  };
  RunPaths rp = run_paths("", run_dir);
  rp.dir = run_dir;
  rp.config = run_dir + "/config.json";
  rp.ck_best = run_dir + "/checkpoint_best";
  rp.eval_dir = run_dir + "/eval";
  if (!fs::exists(rp.config)) throw DataError("run " + run_dir + " has no config.json");
  if (!fs::exists(fs::path(rp.ck_best) / "manifest.json"))
    throw DataError("run " + run_dir + " has no best checkpoint (incomplete run)");

  ExperimentConfig config = load_experiment_config(rp.config);
  Checkpoint ck = load_checkpoint(rp.ck_best);

  RunEvaluation ev;
  ev.run_dir = run_dir;
  ev.variant = config.variant;
  ev.preset = config.dataset.custom ? "custom" : config.dataset.preset;
  ev.seed = config.train.seed;
  ev.best_epoch = ck.epoch;
  ev.best_val = ck.val_loss;

  SplitIndices split =
      split_trials(dataset.data.n_trials(), config.train.split_fraction, config.train.seed);

  if (wants("cca") && dataset.has_ground_truth) {
    ev.recovery = evaluate_latent_recovery(ck.params, ck.norm, dataset.data, dataset.bundle,
                                           split.val);
    ev.has_recovery = true;
  }
  if (wants("recon")) {
    ev.recon = reconstruction_report(ck.params, ck.norm, dataset.data, split.val);
  }
  if (wants("fve")) {
    LatentExtraction ex = extract_latents(ck.params, ck.norm, dataset.data, split.val);
    const int L = ck.dims.lag, T = ex.T;
    for (int r = 0; r < ck.dims.regions; ++r) {
      const int C = dataset.data.channels(r);
      Matd y(static_cast<Eigen::Index>(split.val.size()) * T, C);
      for (std::size_t i = 0; i < split.val.size(); ++i) {
        Matf std_trial = ck.norm.apply(dataset.data.observations[r][split.val[i]], r);
        y.middleRows(static_cast<Eigen::Index>(i) * T, T) =
            std_trial.middleRows(L, T).cast<double>();
      }
      ev.partition.push_back(variance_partition(ex.z_sh[r], ex.z_pr[r], y,
                                                config.eval.ridge_lambda, config.eval.folds,
                                                config.train.seed));
    }
    ev.has_partition = true;
  }
  return ev;
}

static json run_evaluation_to_json(const RunEvaluation& ev) {
  json j;
  j["run_dir"] = ev.run_dir;
  j["variant"] = ev.variant;
  j["preset"] = ev.preset;
  j["seed"] = ev.seed;
  j["best_epoch"] = ev.best_epoch;
  j["best_val"] = ev.best_val;
  if (ev.has_recovery) {
    j["mean_shared_cca"] = ev.recovery.mean_shared;
    j["mean_private_cca"] = ev.recovery.mean_private;
    j["regions"] = json::array();
    for (const auto& r : ev.recovery.region) {
      json rr;
      rr["shared_cca"] = std::vector<double>(r.shared.correlations.data(),
                                             r.shared.correlations.data() +
                                                 r.shared.correlations.size());
      rr["private_cca"] = std::vector<double>(
          r.priv.correlations.data(), r.priv.correlations.data() + r.priv.correlations.size());
      rr["shared_pearson_aligned"] = std::vector<double>(
          r.shared.pearson_aligned.data(),
          r.shared.pearson_aligned.data() + r.shared.pearson_aligned.size());
      j["regions"].push_back(rr);
    }
  }
  if (!ev.recon.empty()) {
    j["recon"] = json::array();
    for (const auto& m : ev.recon)
      j["recon"].push_back({{"full", m.full},
                            {"shared_self", m.shared_self},
                            {"shared_cross", m.shared_cross},
                            {"private_only", m.private_only}});
  }
  if (ev.has_partition) {
    j["partition"] = json::array();
    for (const auto& v : ev.partition)
      j["partition"].push_back({{"fve_s", v.fve_s},
                                {"fve_p", v.fve_p},
                                {"fve_sp", v.fve_sp},
                                {"unique_shared", v.unique_shared},
                                {"unique_private", v.unique_private},
                                {"redundant", v.redundant},
                                {"undefined", v.undefined}});
  }
  return j;
}

void write_run_evaluation(const RunEvaluation& ev, const std::string& eval_dir) {
  fs::create_directories(eval_dir);
  {
    std::ofstream out(eval_dir + "/eval.json", std::ios::trunc);
    if (!out) throw IoError("cannot write eval.json in " + eval_dir);
    out << run_evaluation_to_json(ev).dump(2) << "\n";
  }
  {
    std::ofstream csv(eval_dir + "/metrics.csv", std::ios::trunc);
    csv << "run,variant,preset,seed,region,metric,value\n";
    auto row = [&](int region, const std::string& metric, double value) {
      csv << ev.run_dir << "," << ev.variant << "," << ev.preset << "," << ev.seed << ","
          << region << "," << metric << "," << value << "\n";
    };
    if (ev.has_recovery) {
      for (std::size_t r = 0; r < ev.recovery.region.size(); ++r) {
        const auto& reg = ev.recovery.region[r];
        for (Eigen::Index k = 0; k < reg.shared.correlations.size(); ++k)
          row(static_cast<int>(r), "shared_cca_dim" + std::to_string(k),
              reg.shared.correlations[k]);
        for (Eigen::Index k = 0; k < reg.priv.correlations.size(); ++k)
          row(static_cast<int>(r), "private_cca_dim" + std::to_string(k),
              reg.priv.correlations[k]);
        row(static_cast<int>(r), "shared_cca_mean", reg.shared.mean_correlation());
        row(static_cast<int>(r), "private_cca_mean", reg.priv.mean_correlation());
      }
    }
    for (std::size_t r = 0; r < ev.recon.size(); ++r) {
      row(static_cast<int>(r), "recon_full", ev.recon[r].full);
      row(static_cast<int>(r), "recon_shared_self", ev.recon[r].shared_self);
      row(static_cast<int>(r), "recon_shared_cross", ev.recon[r].shared_cross);
      row(static_cast<int>(r), "recon_private_only", ev.recon[r].private_only);
    }
    for (std::size_t r = 0; r < ev.partition.size(); ++r) {
      row(static_cast<int>(r), "unique_shared", ev.partition[r].unique_shared);
      row(static_cast<int>(r), "unique_private", ev.partition[r].unique_private);
      row(static_cast<int>(r), "redundant", ev.partition[r].redundant);
    }
  }
  {
    std::ofstream rep(eval_dir + "/report.txt", std::ios::trunc);
    rep << "run: " << ev.run_dir << "\nvariant: " << ev.variant << "\npreset: " << ev.preset
        << "\nseed: " << ev.seed << "\nbest epoch: " << ev.best_epoch
        << "\nbest validation loss: " << ev.best_val << "\n\n";
    if (ev.has_recovery) {
      rep << "latent recovery (CCA vs ground truth, held-out trials)\n";
      rep << "  mean shared CCA:  " << ev.recovery.mean_shared << "\n";
      rep << "  mean private CCA: " << ev.recovery.mean_private << "\n";
      for (std::size_t r = 0; r < ev.recovery.region.size(); ++r) {
        rep << "  region " << r << " shared: ";
        for (Eigen::Index k = 0; k < ev.recovery.region[r].shared.correlations.size(); ++k)
          rep << ev.recovery.region[r].shared.correlations[k] << " ";
        rep << " private: ";
        for (Eigen::Index k = 0; k < ev.recovery.region[r].priv.correlations.size(); ++k)
          rep << ev.recovery.region[r].priv.correlations[k] << " ";
        rep << "\n";
      }
    } else {
      rep << "latent recovery: skipped (no ground-truth latents in dataset)\n";
    }
    if (!ev.recon.empty()) {
      rep << "\nheld-out reconstruction MSE by latent subset\n";
      for (std::size_t r = 0; r < ev.recon.size(); ++r)
        rep << "  region " << r << ": full " << ev.recon[r].full << ", shared-self "
            << ev.recon[r].shared_self << ", shared-cross " << ev.recon[r].shared_cross
            << ", private-only " << ev.recon[r].private_only << "\n";
    }
    if (ev.has_partition) {
      rep << "\nvariance partition (cross-validated FVE)\n";
      for (std::size_t r = 0; r < ev.partition.size(); ++r)
        rep << "  region " << r << ": unique-shared " << ev.partition[r].unique_shared
            << ", unique-private " << ev.partition[r].unique_private << ", redundant "
            << ev.partition[r].redundant << "\n";
    }
  }
  if (ev.has_recovery) {
    std::vector<PlotBar> bars;
    const char* colors[] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231"};
    for (std::size_t r = 0; r < ev.recovery.region.size(); ++r) {
      bars.push_back({"shared r" + std::to_string(r),
                      ev.recovery.region[r].shared.mean_correlation(), 0.0, colors[r % 4]});
      bars.push_back({"private r" + std::to_string(r),
                      ev.recovery.region[r].priv.mean_correlation(), 0.0, colors[(r + 2) % 4]});
    }
    fs::create_directories(eval_dir + "/plots");
    svg_bar_chart(eval_dir + "/plots/cca_summary.svg", "CCA vs ground truth (held-out)", bars,
                  "canonical correlation");
  }
}

RunEvaluation load_run_evaluation(const std::string& run_dir) {
  std::string path = run_dir + "/eval/eval.json";
  std::ifstream in(path);
  if (!in) throw DataError("run " + run_dir + " has no eval results");
  json j = json::parse(std::string((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>()));
  RunEvaluation ev;
  ev.run_dir = j.value("run_dir", run_dir);
  ev.variant = j.value("variant", "full");
  ev.preset = j.value("preset", "");
  ev.seed = j.value("seed", std::uint64_t{0});
  ev.best_epoch = j.value("best_epoch", -1);
  ev.best_val = j.value("best_val", 0.0);
  if (j.contains("mean_shared_cca")) {
    ev.has_recovery = true;
    ev.recovery.mean_shared = j["mean_shared_cca"].get<double>();
    ev.recovery.mean_private = j["mean_private_cca"].get<double>();
  }
  if (j.contains("recon")) {
    for (const auto& r : j["recon"]) {
      SubsetMse m;
      m.full = r.value("full", 0.0);
      m.shared_self = r.value("shared_self", 0.0);
      m.shared_cross = r.value("shared_cross", 0.0);
      m.private_only = r.value("private_only", 0.0);
      ev.recon.push_back(m);
    }
  }
  if (j.contains("partition")) {
    ev.has_partition = true;
    for (const auto& p : j["partition"]) {
      VariancePartition v;
      v.fve_s = p.value("fve_s", 0.0);
      v.fve_p = p.value("fve_p", 0.0);
      v.fve_sp = p.value("fve_sp", 0.0);
      v.unique_shared = p.value("unique_shared", 0.0);
      v.unique_private = p.value("unique_private", 0.0);
      v.redundant = p.value("redundant", 0.0);
      ev.partition.push_back(v);
    }
  }
  return ev;
}

// --- commands ---

int cmd_generate(const std::string& preset, std::uint64_t seed, const std::string& out_dir) {
  try {
    PresetId id = preset_from_string(preset);
    GeneratorConfig gc = preset_config(id, seed);
    auto [data, bundle] = generate_dataset(gc);
    std::string dir = resolve_out_path(out_dir);
    save_dataset(dir, data, bundle, gc, to_string(id));
    std::cout << "dataset written to " << dir << "\n"
              << "trials: " << data.n_trials() << ", regions: " << data.n_regions()
              << ", T: " << data.T() << ", fs: " << data.fs << "\n"
              << "content hash: " << sha256_dir(dir) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
}

int cmd_train(const ExperimentConfig& config, bool resume, int threads,
              const std::string& dataset_dir_override) {
  try {
    LoadedDataset dataset = ensure_dataset(config, dataset_dir_override);
    std::mutex io_mutex;
    std::vector<std::pair<std::uint64_t, std::string>> failures;
    parallel_jobs(threads, static_cast<int>(config.seeds.size()), [&](int i) {
      std::uint64_t seed = config.seeds[i];
      try {
        RunResult rr = run_training(config, seed, dataset.data, resume);
        std::lock_guard<std::mutex> lk(io_mutex);
        std::cout << (rr.skipped ? "skipped (complete): " : "trained: ") << rr.dir << "\n";
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lk(io_mutex);
        failures.emplace_back(seed, e.what());
        std::cerr << "seed " << seed << " failed: " << e.what() << "\n";
      }
    });
    if (!failures.empty()) return static_cast<int>(ErrorCode::divergence);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
}

int cmd_eval(const std::vector<std::string>& run_dirs, const std::string& dataset_dir,
             const std::vector<std::string>& metrics) {
  if (run_dirs.empty()) {
    std::cerr << "error: no run directories given\n";
    return static_cast<int>(ErrorCode::config);
  }
  LoadedDataset dataset;
  try {
    dataset = load_dataset(resolve_out_path(dataset_dir));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
  int ok = 0;
  for (const auto& dir : run_dirs) {
    try {
      std::string resolved = resolve_out_path(dir);
      RunEvaluation ev = evaluate_run(resolved, dataset, metrics);
      write_run_evaluation(ev, resolved + "/eval");
      std::cout << "evaluated " << resolved;
      if (ev.has_recovery)
        std::cout << "  shared CCA " << ev.recovery.mean_shared << ", private CCA "
                  << ev.recovery.mean_private;
      std::cout << "\n";
      ++ok;
    } catch (const Error& e) {
      std::cerr << "run " << dir << " flagged: " << e.what() << "\n";
    }
  }
  return ok > 0 ? 0 : static_cast<int>(ErrorCode::data);
}

int cmd_ablate(const ExperimentConfig& base, const std::vector<std::string>& variants,
               const std::vector<std::uint64_t>& seeds, int threads,
               const std::string& dataset_dir_override) {
  try {
    std::vector<std::string> all = variants;
    if (std::find(all.begin(), all.end(), "full") == all.end())
      all.insert(all.begin(), "full");  // reference model
    for (const auto& v : all) ablation_by_name(v);  // validate names early

    LoadedDataset dataset = ensure_dataset(base, dataset_dir_override);
    struct Job {
      std::string variant;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& v : all)
      for (auto s : seeds) jobs.push_back({v, s});

    std::mutex io_mutex;
    std::vector<std::string> failures;
    parallel_jobs(threads, static_cast<int>(jobs.size()), [&](int i) {
      ExperimentConfig cfg = base;
      cfg.variant = jobs[i].variant;
      cfg.seeds = {jobs[i].seed};
      try {
        RunResult rr = run_training(cfg, jobs[i].seed, dataset.data, true);
        RunEvaluation ev = evaluate_run(rr.dir, dataset, {});
        write_run_evaluation(ev, rr.dir + "/eval");
        std::lock_guard<std::mutex> lk(io_mutex);
        std::cout << "ablation run done: " << rr.dir << "\n";
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lk(io_mutex);
        failures.push_back(jobs[i].variant + "-s" + std::to_string(jobs[i].seed) + ": " +
                           e.what());
        std::cerr << "ablation run failed (isolated): " << failures.back() << "\n";
      }
    });

    // comparison table against the full model, paired by seed
    std::string out_root = resolve_out_path(base.out_dir);
    fs::create_directories(out_root);
    std::ofstream csv(out_root + "/ablation_comparison.csv", std::ios::trunc);
    csv << "variant,seed,mean_shared_cca,mean_private_cca,delta_shared_vs_full,delta_private_vs_"
           "full,status\n";
    std::map<std::uint64_t, RunEvaluation> full;
    for (auto s : seeds) {
      ExperimentConfig cfg = base;
      cfg.variant = "full";
      try {
        full.emplace(s, load_run_evaluation(run_paths(cfg.out_dir, run_name(cfg, s)).dir));
      } catch (const Error&) {
      }
    }
    for (const auto& v : all) {
      for (auto s : seeds) {
        ExperimentConfig cfg = base;
        cfg.variant = v;
        std::string dir = run_paths(cfg.out_dir, run_name(cfg, s)).dir;
        try {
          RunEvaluation ev = load_run_evaluation(dir);
          double dsh = 0, dpr = 0;
          if (auto it = full.find(s); it != full.end() && ev.has_recovery) {
            dsh = ev.recovery.mean_shared - it->second.recovery.mean_shared;
            dpr = ev.recovery.mean_private - it->second.recovery.mean_private;
          }
          csv << v << "," << s << "," << ev.recovery.mean_shared << ","
              << ev.recovery.mean_private << "," << dsh << "," << dpr << ",ok\n";
        } catch (const Error&) {
          csv << v << "," << s << ",,,,,failed\n";
        }
      }
    }
    std::cout << "ablation comparison written to " << out_root << "/ablation_comparison.csv\n";
    return failures.empty() ? 0 : static_cast<int>(ErrorCode::divergence);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  if (run_dirs.empty()) {
    std::cerr << "error: no run directories given\n";
    return static_cast<int>(ErrorCode::config);
  }
  struct Group {
    std::vector<RunEvaluation> evals;
    std::vector<std::string> incomplete;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;  // (preset, variant)
  for (const auto& dir : run_dirs) {
    std::string resolved = resolve_out_path(dir);
    try {
      RunEvaluation ev = load_run_evaluation(resolved);
      groups[{ev.preset, ev.variant}].evals.push_back(std::move(ev));
    } catch (const Error&) {
      std::string preset = "?", variant = "?";
      try {
        ExperimentConfig cfg = load_experiment_config(resolved + "/config.json");
        preset = cfg.dataset.custom ? "custom" : cfg.dataset.preset;
        variant = cfg.variant;
      } catch (const Error&) {
      }
      groups[{preset, variant}].incomplete.push_back(resolved);
    }
  }

  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= std::max<std::size_t>(1, v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    s = v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0;
    return std::pair(m, s);
  };

  std::ostringstream rep;
  rep << "regime summary (mean +/- SD over seeds)\n";
  rep << "preset   variant                 seeds  shared_cca         private_cca        "
         "recon_full\n";
  for (const auto& [key, group] : groups) {
    std::vector<double> sh, pr, rf;
    for (const auto& ev : group.evals) {
      if (ev.has_recovery) {
        sh.push_back(ev.recovery.mean_shared);
        pr.push_back(ev.recovery.mean_private);
      }
      double f = 0;
      for (const auto& m : ev.recon) f += m.full;
      if (!ev.recon.empty()) rf.push_back(f / ev.recon.size());
    }
    auto [shm, shs] = mean_sd(sh);
    auto [prm, prs] = mean_sd(pr);
    auto [rfm, rfs] = mean_sd(rf);
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %-22s %5zu  %.4f +/- %.4f  %.4f +/- %.4f  %.5f +/- %.5f",
                  key.first.c_str(), key.second.c_str(), group.evals.size(), shm, shs, prm, prs,
                  rfm, rfs);
    rep << line;
    if (!group.incomplete.empty()) rep << "   [incomplete: " << group.incomplete.size() << " run(s)]";
    rep << "\n";
  }
  std::cout << rep.str();
  if (!out_path.empty()) {
    std::string resolved = resolve_out_path(out_path);
    std::ofstream out(resolved, std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot write " << resolved << "\n";
      return static_cast<int>(ErrorCode::io);
    }
    out << rep.str();
  }
  return 0;
}

}  // namespace spire
