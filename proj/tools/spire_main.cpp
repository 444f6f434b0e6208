// Command-line front end: dataset generation, training, evaluation,
// ablation sweeps and cross-run reports. Relative output paths resolve
// under $SPIRE_OUT_ROOT when that variable is set.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "spire/errors.hpp"
#include "spire/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    std::string tok = csv.substr(pos, comma - pos);
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
    pos = comma + 1;
  }
  if (seeds.empty()) throw spire::ConfigError("empty seed list");
  return seeds;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    std::string tok = csv.substr(pos, comma - pos);
    if (!tok.empty()) out.push_back(tok);
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shared-private latent factorization benchmark"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads for multi-run commands")
      ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset container");
  std::string gen_preset = "D1";
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--preset", gen_preset, "preset id (D0, D1, D2)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train one run per seed from a config");
  std::string tr_config;
  std::string tr_seeds;
  std::string tr_out;
  std::string tr_data;
  bool tr_resume = false;
  tr->add_option("--config", tr_config, "experiment config JSON")->required();
  tr->add_option("--seeds", tr_seeds, "comma-separated training seeds (overrides config)");
  tr->add_option("--out", tr_out, "output root (overrides config out_dir)");
  tr->add_option("--data", tr_data, "existing dataset container (otherwise generated)");
  tr->add_flag("--resume", tr_resume, "continue interrupted runs from their last checkpoint");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate completed runs against a dataset");
  std::vector<std::string> ev_runs;
  std::string ev_data;
  std::string ev_metrics = "cca,recon,fve";
  ev->add_option("--run", ev_runs, "run directory (repeatable)")->required();
  ev->add_option("--dataset", ev_data, "dataset container directory")->required();
  ev->add_option("--metrics", ev_metrics, "comma-separated metrics: cca,recon,fve")
      ->capture_default_str();

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and compare ablation variants");
  std::string ab_config;
  std::string ab_variants;
  std::string ab_seeds = "0";
  std::string ab_out;
  std::string ab_data;
  ab->add_option("--config", ab_config, "base experiment config JSON")->required();
  ab->add_option("--variants", ab_variants,
                 "comma-separated variant names (e.g. abl_no_w_align,ctrl_no_freeze)")
      ->required();
  ab->add_option("--seeds", ab_seeds, "comma-separated seeds")->capture_default_str();
  ab->add_option("--out", ab_out, "output root (overrides config out_dir)");
  ab->add_option("--data", ab_data, "existing dataset container");

  // report
  auto* rp = app.add_subcommand("report", "aggregate eval results across runs");
  std::vector<std::string> rp_runs;
  std::string rp_out;
  rp->add_option("--run", rp_runs, "run directory (repeatable)")->required();
  rp->add_option("--out", rp_out, "write the summary to this file as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return spire::cmd_generate(gen_preset, gen_seed, gen_out);
    if (*tr) {
      spire::ExperimentConfig config = spire::load_experiment_config(tr_config);
      if (!tr_seeds.empty()) config.seeds = parse_seed_list(tr_seeds);
      if (!tr_out.empty()) config.out_dir = tr_out;
      return spire::cmd_train(config, tr_resume, threads, tr_data);
    }
    if (*ev) return spire::cmd_eval(ev_runs, ev_data, split_csv(ev_metrics));
    if (*ab) {
      spire::ExperimentConfig config = spire::load_experiment_config(ab_config);
      if (!ab_out.empty()) config.out_dir = ab_out;
      return spire::cmd_ablate(config, split_csv(ab_variants), parse_seed_list(ab_seeds),
                               threads, ab_data);
    }
    if (*rp) return spire::cmd_report(rp_runs, rp_out);
  } catch (const spire::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(spire::ErrorCode::io);
  }
  return 0;
}
