#include "spire/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "spire/container.hpp"
#include "spire/errors.hpp"

namespace spire {

using nlohmann::json;

void TrainConfig::validate() const {
  check_config(max_epochs >= 1, "train config: max_epochs must be >= 1");
  check_config(batch_train >= 1 && batch_val >= 1, "train config: batch sizes must be >= 1");
  check_config(lr > 0, "train config: lr must be positive");
  check_config(plateau_factor > 0 && plateau_factor < 1, "train config: plateau_factor in (0,1)");
  check_config(plateau_patience >= 1, "train config: plateau_patience must be >= 1");
  check_config(clip_norm > 0, "train config: clip_norm must be positive");
  check_config(early_stop_patience >= 1, "train config: early_stop_patience must be >= 1");
  check_config(early_stop_warmup >= 0, "train config: early_stop_warmup must be >= 0");
  check_config(split_fraction > 0 && split_fraction < 1,
               "train config: split_fraction must be in (0,1)");
}

SplitIndices split_trials(int n_trials, double fraction, std::uint64_t seed) {
  check_config(n_trials >= 2, "split: need at least 2 trials");
  check_config(fraction > 0 && fraction < 1, "split: fraction must be in (0,1)");
  int n_train = static_cast<int>(std::lround(fraction * n_trials));
  if (n_train <= 0 || n_train >= n_trials)
    throw ConfigError("split: fraction leaves an empty train or validation set");
  std::vector<int> idx(n_trials);
  for (int i = 0; i < n_trials; ++i) idx[i] = i;
  Rng rng = Rng(seed).sub(stream::split);
  rng.shuffle(idx.begin(), idx.end());
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

void tag_split(TrialDataset& data, const SplitIndices& split) {
  data.split_tags.assign(data.n_trials(), SplitTag::unsplit);
  for (int i : split.train) data.split_tags[i] = SplitTag::train;
  for (int i : split.val) data.split_tags[i] = SplitTag::val;
}

void Standardizer::fit(const TrialDataset& data, const std::vector<int>& train_idx) {
  identity = false;
  mean.resize(data.n_regions());
  sd.resize(data.n_regions());
  for (int r = 0; r < data.n_regions(); ++r) {
    const int C = data.channels(r);
    Vecd acc = Vecd::Zero(C), acc2 = Vecd::Zero(C);
    long long n = 0;
    for (int i : train_idx) {
      const Matf& m = data.observations[r][i];
      acc += m.colwise().sum().transpose().cast<double>();
      acc2 += m.array().square().colwise().sum().transpose().matrix().cast<double>();
      n += m.rows();
    }
    Vecd mu = acc / static_cast<double>(n);
    Vecd var = acc2 / static_cast<double>(n) - mu.array().square().matrix();
    mean[r] = mu.cast<float>();
    sd[r] = var.array().max(0.0).sqrt().max(1e-8).cast<float>().matrix();
  }
}

Matf Standardizer::apply(const Matf& trial, int region) const {
  if (identity) return trial;
  Matf out = trial;
  out.rowwise() -= mean[region].transpose();
  out.array().rowwise() /= sd[region].transpose().array();
  return out;
}

std::vector<std::vector<Matf>> prepare_inputs(const TrialDataset& data, const Standardizer& norm,
                                              int lag, const std::vector<int>& trial_idx) {
  std::vector<std::vector<Matf>> out(data.n_regions());
  for (int r = 0; r < data.n_regions(); ++r) {
    out[r].reserve(trial_idx.size());
    for (int i : trial_idx) {
      Matf std_trial = norm.apply(data.observations[r][i], r);
      Matf aug = lag_augment(std_trial, lag);
      out[r].push_back(aug.transpose());  // (channels x time)
    }
  }
  return out;
}

namespace {

// Columns t*B+b of the batch matrix take sample t of trial b.
void assemble_batch(const std::vector<Matf>& trials, const std::vector<int>& members,
                    Matf& out) {
  const int B = static_cast<int>(members.size());
  const int C = static_cast<int>(trials[0].rows());
  const int T = static_cast<int>(trials[0].cols());
  out.resize(C, static_cast<Eigen::Index>(T) * B);
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) out.col(t * B + b) = trials[members[b]].col(t);
}

double global_grad_norm(std::vector<ParamRef<float>>& refs) {
  double sq = 0;
  for (auto& r : refs) sq += r.mat->cast<double>().squaredNorm();
  return std::sqrt(sq);
}

void accumulate_breakdown(LossBreakdown& acc, const LossBreakdown& b) {
  acc.rec += b.rec;
  acc.cross += b.cross;
  acc.self += b.self;
  acc.align += b.align;
  acc.orth += b.orth;
  acc.mapid += b.mapid;
  acc.align_reg += b.align_reg;
  acc.var_sh += b.var_sh;
  acc.var_pr += b.var_pr;
  acc.total += b.total;
}

void scale_breakdown(LossBreakdown& acc, double s) {
  acc.rec *= s;
  acc.cross *= s;
  acc.self *= s;
  acc.align *= s;
  acc.orth *= s;
  acc.mapid *= s;
  acc.align_reg *= s;
  acc.var_sh *= s;
  acc.var_pr *= s;
  acc.total *= s;
}

}  // namespace

void apply_freeze_window(const ScheduleTable& schedule, int epoch, SpireParams<float>& grads) {
  if (!in_freeze_window(schedule, epoch)) return;
  for (auto& ref : param_refs(grads))
    if (ref.group == ParamGroup::shared_proj) ref.mat->setZero();
}

TrainResult train(const TrialDataset& data, const ModelDims& dims, const ScheduleTable& schedule,
                  const TrainConfig& cfg, const TrainControls& controls,
                  const EpochCallback& on_epoch, const ResumeState* resume,
                  const PeriodicCheckpoint* periodic) {
  cfg.validate();
  dims.validate();
  schedule.validate();
  check_config(data.n_regions() == dims.regions, "train: dataset region count mismatch");
  for (int r = 0; r < dims.regions; ++r)
    check_config(dims.channels[r] == data.channels(r) * (dims.lag + 1),
                 "train: dims.channels must equal raw channels * (lag+1) for region " +
                     std::to_string(r));

  TrainResult res;
  res.split = split_trials(data.n_trials(), cfg.split_fraction, cfg.seed);
  if (cfg.standardize) res.norm.fit(data, res.split.train);

  auto train_inputs = prepare_inputs(data, res.norm, dims.lag, res.split.train);
  auto val_inputs = prepare_inputs(data, res.norm, dims.lag, res.split.val);
  const int T = static_cast<int>(train_inputs[0][0].cols());
  const int n_train = static_cast<int>(res.split.train.size());
  const int n_val = static_cast<int>(res.split.val.size());

  SpireParams<float> params =
      resume ? resume->params : init_params<float>(dims, cfg.seed);
  SpireParams<float> best = resume ? resume->best_params : params;
  SpireParams<float> grads = zero_like(params);
  auto prefs = param_refs(params);
  auto grefs = param_refs(grads);

  AdamState adam;
  if (resume) {
    adam = resume->adam;
  } else {
    adam.m.reserve(prefs.size());
    adam.v.reserve(prefs.size());
    for (auto& r : prefs) {
      adam.m.push_back(Matf::Zero(r.mat->rows(), r.mat->cols()));
      adam.v.push_back(Matf::Zero(r.mat->rows(), r.mat->cols()));
    }
  }
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  TrainState st;
  if (resume) {
    st = resume->state;
  } else {
    st.lr = cfg.lr;
    st.best_val = std::numeric_limits<double>::infinity();
    st.plateau_best = std::numeric_limits<double>::infinity();
  }

  const LossWeights<float> final_weights =
      cast_weights<float>(schedule.phases.back());
  const Rng root(cfg.seed);

  std::vector<int> order(n_train);
  for (int i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = st.next_epoch; epoch < cfg.max_epochs; ++epoch) {
    const LossWeights<float> weights = cast_weights<float>(schedule_weights(schedule, epoch));
    const float alpha = controls.gate_always_open
                            ? 1.0f
                            : static_cast<float>(private_gate(schedule, epoch));
    const bool frozen = !controls.disable_freeze && in_freeze_window(schedule, epoch);
    const bool pinned = controls.pin_aligner_identity || epoch < schedule.aligner_warmup;

    Rng shuffle_rng = root.sub(stream::shuffle, static_cast<std::uint64_t>(epoch));
    for (int i = 0; i < n_train; ++i) order[i] = i;
    shuffle_rng.shuffle(order.begin(), order.end());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = st.lr;
    rec.alpha = alpha;
    rec.phase = schedule_phase(schedule, epoch);
    rec.frozen = frozen;
    rec.aligner_pinned = pinned;

    ForwardCache<float> cache;
    CacheGrads<float> cg;
    std::vector<Matf> batch_x(dims.regions);
    int n_batches = 0;
    for (int start = 0; start < n_train; start += cfg.batch_train, ++n_batches) {
      const int B = std::min(cfg.batch_train, n_train - start);
      std::vector<int> members(order.begin() + start, order.begin() + start + B);
      for (int r = 0; r < dims.regions; ++r)
        assemble_batch(train_inputs[r], members, batch_x[r]);

      Rng drop_rng = root.sub(stream::dropout, static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(n_batches));
      spire_forward(params, batch_x, T, B, alpha, true, drop_rng, cache);

      for (auto& g : grefs) g.mat->setZero();
      cg.init(dims, T, B);
      LossBreakdown b = total_loss(params, batch_x, cache, weights, &cg, &grads);
      if (!b.finite())
        throw DivergenceError("loss term '" + b.first_non_finite() + "' is non-finite at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(n_batches));
      spire_backward(params, batch_x, cache, cg, grads);

      if (frozen) apply_freeze_window(schedule, epoch, grads);
      if (pinned) {
        for (auto& g : grefs)
          if (g.group == ParamGroup::aligner_kernel || g.group == ParamGroup::aligner_mapper)
            g.mat->setZero();
      }

      double norm = global_grad_norm(grefs);
      rec.grad_norm_pre = std::max(rec.grad_norm_pre, norm);
      if (norm > cfg.clip_norm) {
        const float scale = static_cast<float>(cfg.clip_norm / norm);
        for (auto& g : grefs) (*g.mat) *= scale;
        rec.grad_norm_post = std::max(rec.grad_norm_post, cfg.clip_norm);
      } else {
        rec.grad_norm_post = std::max(rec.grad_norm_post, norm);
      }

      // Frozen or pinned groups are skipped entirely: parameters stay
      // bit-identical and Adam moments are retained untouched.
      ++adam.step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
      for (std::size_t k = 0; k < prefs.size(); ++k) {
        if (frozen && prefs[k].group == ParamGroup::shared_proj) continue;
        if (pinned && (prefs[k].group == ParamGroup::aligner_kernel ||
                       prefs[k].group == ParamGroup::aligner_mapper))
          continue;
        Matf& g = *grefs[k].mat;
        adam.m[k] = static_cast<float>(beta1) * adam.m[k] + static_cast<float>(1 - beta1) * g;
        adam.v[k] = static_cast<float>(beta2) * adam.v[k] +
                    static_cast<float>(1 - beta2) * g.cwiseProduct(g);
        Matf mhat = adam.m[k] / static_cast<float>(bc1);
        Matf vhat = adam.v[k] / static_cast<float>(bc2);
        prefs[k].mat->array() -= static_cast<float>(st.lr) * mhat.array() /
                                 (vhat.array().sqrt() + static_cast<float>(adam_eps));
      }
      accumulate_breakdown(rec.train, b);
    }
    scale_breakdown(rec.train, 1.0 / std::max(1, n_batches));

    // Validation with the epoch's gate but final-phase weights, so the
    // monitored quantity matches the definition used to pick the best model.
    int n_val_batches = 0;
    for (int start = 0; start < n_val; start += cfg.batch_val, ++n_val_batches) {
      const int B = std::min(cfg.batch_val, n_val - start);
      std::vector<int> members(B);
      for (int b = 0; b < B; ++b) members[b] = start + b;
      for (int r = 0; r < dims.regions; ++r)
        assemble_batch(val_inputs[r], members, batch_x[r]);
      spire_forward(params, batch_x, T, B, alpha, false, root, cache);
      LossBreakdown vb = total_loss<float>(params, batch_x, cache, final_weights);
      accumulate_breakdown(rec.val, vb);
    }
    scale_breakdown(rec.val, 1.0 / std::max(1, n_val_batches));
    if (!rec.val.finite())
      throw DivergenceError("validation loss term '" + rec.val.first_non_finite() +
                            "' is non-finite at epoch " + std::to_string(epoch));
    const double val_total = rec.val.total;

    bool is_best = val_total < st.best_val;
    if (is_best) {
      st.best_val = val_total;
      st.best_epoch = epoch;
      best = params;
    }

    if (val_total < st.plateau_best) {
      st.plateau_best = val_total;
      st.plateau_counter = 0;
    } else if (++st.plateau_counter >= cfg.plateau_patience) {
      st.lr *= cfg.plateau_factor;
      st.plateau_counter = 0;
    }

    bool stop = false;
    if (epoch >= cfg.early_stop_warmup) {
      if (is_best) {
        st.early_counter = 0;
      } else if (++st.early_counter >= cfg.early_stop_patience) {
        stop = true;
      }
    }

    res.history.epochs.push_back(rec);
    st.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(rec, params, is_best);
    if (periodic && periodic->every > 0 && (epoch + 1) % periodic->every == 0) {
      Checkpoint ck;
      ck.params = params;
      ck.best_params = best;
      ck.norm = res.norm;
      ck.dims = dims;
      ck.seed = cfg.seed;
      ck.epoch = epoch;
      ck.val_loss = val_total;
      ck.adam = adam;
      ck.state = st;
      save_checkpoint(periodic->dir, ck);
    }
    if (stop) {
      res.history.early_stopped = true;
      break;
    }
  }

  res.history.best_epoch = st.best_epoch;
  res.history.best_val = st.best_val;
  res.best = std::move(best);
  res.last = std::move(params);
  res.adam = std::move(adam);
  res.state = st;
  return res;
}

// --- serialization ---

std::string model_dims_to_json(const ModelDims& dims) {
  json j;
  j["regions"] = dims.regions;
  j["channels"] = dims.channels;
  j["hidden"] = dims.hidden;
  j["d_sh"] = dims.d_sh;
  j["d_pr"] = dims.d_pr;
  j["conv_halfwidth"] = dims.conv_halfwidth;
  j["dropout"] = dims.dropout;
  j["lag"] = dims.lag;
  j["bidirectional"] = dims.bidirectional;
  return j.dump();
}

ModelDims model_dims_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelDims d;
  d.regions = j.value("regions", 2);
  d.channels = j.value("channels", std::vector<int>{});
  d.hidden = j.value("hidden", 64);
  d.d_sh = j.value("d_sh", 3);
  d.d_pr = j.value("d_pr", 3);
  d.conv_halfwidth = j.value("conv_halfwidth", 4);
  d.dropout = j.value("dropout", 0.3);
  d.lag = j.value("lag", 3);
  d.bidirectional = j.value("bidirectional", false);
  return d;
}

static json breakdown_to_json(const LossBreakdown& b) {
  return json{{"rec", b.rec},         {"cross", b.cross},   {"self", b.self},
              {"align", b.align},     {"orth", b.orth},     {"mapid", b.mapid},
              {"align_reg", b.align_reg}, {"var_sh", b.var_sh}, {"var_pr", b.var_pr},
              {"total", b.total}};
}

static LossBreakdown breakdown_from_json(const json& j) {
  LossBreakdown b;
  b.rec = j.value("rec", 0.0);
  b.cross = j.value("cross", 0.0);
  b.self = j.value("self", 0.0);
  b.align = j.value("align", 0.0);
  b.orth = j.value("orth", 0.0);
  b.mapid = j.value("mapid", 0.0);
  b.align_reg = j.value("align_reg", 0.0);
  b.var_sh = j.value("var_sh", 0.0);
  b.var_pr = j.value("var_pr", 0.0);
  b.total = j.value("total", 0.0);
  return b;
}

std::string epoch_record_to_json(const EpochRecord& rec) {
  json j;
  j["epoch"] = rec.epoch;
  j["train"] = breakdown_to_json(rec.train);
  j["val"] = breakdown_to_json(rec.val);
  j["lr"] = rec.lr;
  j["alpha"] = rec.alpha;
  j["phase"] = rec.phase;
  j["frozen"] = rec.frozen;
  j["aligner_pinned"] = rec.aligner_pinned;
  j["grad_norm_pre"] = rec.grad_norm_pre;
  j["grad_norm_post"] = rec.grad_norm_post;
  return j.dump();
}

EpochRecord epoch_record_from_json(const std::string& line) {
  json j = json::parse(line);
  EpochRecord rec;
  rec.epoch = j.value("epoch", 0);
  rec.train = breakdown_from_json(j.value("train", json::object()));
  rec.val = breakdown_from_json(j.value("val", json::object()));
  rec.lr = j.value("lr", 0.0);
  rec.alpha = j.value("alpha", 0.0);
  rec.phase = j.value("phase", 0);
  rec.frozen = j.value("frozen", false);
  rec.aligner_pinned = j.value("aligner_pinned", false);
  rec.grad_norm_pre = j.value("grad_norm_pre", 0.0);
  rec.grad_norm_post = j.value("grad_norm_post", 0.0);
  return rec;
}

void save_checkpoint(const std::string& dir, const Checkpoint& ck) {
  ContainerWriter w(dir);
  auto& m = w.manifest();
  m.kind = "checkpoint";
  m.seed = ck.seed;

  SpireParams<float> params_copy = ck.params;  // param_refs needs mutable access
  for (auto& ref : param_refs(params_copy)) w.add_matrix("param." + ref.name, *ref.mat);
  if (ck.best_params) {
    SpireParams<float> best_copy = *ck.best_params;
    for (auto& ref : param_refs(best_copy)) w.add_matrix("best." + ref.name, *ref.mat);
  }
  if (!ck.norm.identity) {
    for (std::size_t r = 0; r < ck.norm.mean.size(); ++r) {
      w.add_vector("norm.mean_r" + std::to_string(r), ck.norm.mean[r]);
      w.add_vector("norm.sd_r" + std::to_string(r), ck.norm.sd[r]);
    }
  }
  if (ck.adam) {
    for (std::size_t k = 0; k < ck.adam->m.size(); ++k) {
      w.add_matrix("adam.m" + std::to_string(k), ck.adam->m[k]);
      w.add_matrix("adam.v" + std::to_string(k), ck.adam->v[k]);
    }
  }

  json extra;
  extra["dims"] = json::parse(model_dims_to_json(ck.dims));
  extra["epoch"] = ck.epoch;
  extra["val_loss"] = ck.val_loss;
  extra["standardize"] = !ck.norm.identity;
  if (ck.adam) extra["adam_step"] = ck.adam->step;
  if (ck.state) {
    extra["state"] = {{"next_epoch", ck.state->next_epoch},
                      {"lr", ck.state->lr},
                      {"best_val", ck.state->best_val},
                      {"best_epoch", ck.state->best_epoch},
                      {"plateau_best", ck.state->plateau_best},
                      {"plateau_counter", ck.state->plateau_counter},
                      {"early_counter", ck.state->early_counter}};
  }
  m.extra = extra.dump();
  w.finish();
}

Checkpoint load_checkpoint(const std::string& dir) {
  ContainerReader reader(dir);
  const Manifest& m = reader.manifest();
  if (m.kind != "checkpoint") throw DataError(dir + " is not a checkpoint container");
  json extra = json::parse(m.extra);
  Checkpoint ck;
  ck.seed = m.seed;
  ck.dims = model_dims_from_json(extra.at("dims").dump());
  ck.epoch = extra.value("epoch", 0);
  ck.val_loss = extra.value("val_loss", 0.0);

  ck.params = init_params<float>(ck.dims, 0);
  for (auto& ref : param_refs(ck.params)) *ref.mat = reader.read_matrix("param." + ref.name);
  if (m.has_array("best.r0.enc.w_ih")) {
    SpireParams<float> best = init_params<float>(ck.dims, 0);
    for (auto& ref : param_refs(best)) *ref.mat = reader.read_matrix("best." + ref.name);
    ck.best_params = std::move(best);
  }
  if (extra.value("standardize", false)) {
    ck.norm.identity = false;
    ck.norm.mean.resize(ck.dims.regions);
    ck.norm.sd.resize(ck.dims.regions);
    for (int r = 0; r < ck.dims.regions; ++r) {
      ck.norm.mean[r] = reader.read_vector("norm.mean_r" + std::to_string(r));
      ck.norm.sd[r] = reader.read_vector("norm.sd_r" + std::to_string(r));
    }
  }
  if (extra.contains("adam_step")) {
    AdamState adam;
    adam.step = extra["adam_step"].get<long long>();
    for (std::size_t k = 0; m.has_array("adam.m" + std::to_string(k)); ++k) {
      adam.m.push_back(reader.read_matrix("adam.m" + std::to_string(k)));
      adam.v.push_back(reader.read_matrix("adam.v" + std::to_string(k)));
    }
    ck.adam = std::move(adam);
  }
  if (extra.contains("state")) {
    const auto& s = extra["state"];
    TrainState ts;
    ts.next_epoch = s.value("next_epoch", 0);
    ts.lr = s.value("lr", 0.0);
    ts.best_val = s.value("best_val", 0.0);
    ts.best_epoch = s.value("best_epoch", -1);
    ts.plateau_best = s.value("plateau_best", 0.0);
    ts.plateau_counter = s.value("plateau_counter", 0);
    ts.early_counter = s.value("early_counter", 0);
    ck.state = ts;
  }
  return ck;
}

}  // namespace spire
