#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spire/mat.hpp"
#include "spire/rng.hpp"

namespace spire {

// ---------------------------------------------------------------------------
// Ground-truth synthetic multi-region datasets: bursty-oscillator latents,
// optional warps and time-varying delays on the second region, randomized
// spatial mixing with optional nonlinearities, structured noise, and bipolar
// re-referencing.
// ---------------------------------------------------------------------------

struct ElectrodeGeometry {
  std::string name;
  int n_rows = 0;
  int contacts_per_row = 0;

  int contacts() const { return n_rows * contacts_per_row; }
  int bipolar_channels() const { return n_rows * (contacts_per_row - 1); }
};

enum class WarpKind { none, monotone, cubic };
enum class HeteroMode { abs, power, multiplicative };

const char* to_string(WarpKind k);
WarpKind warp_from_string(const std::string& s);
const char* to_string(HeteroMode m);
HeteroMode hetero_from_string(const std::string& s);

struct LatentDynamics {
  double base_freq_lo = 4.0;   // Hz
  double base_freq_hi = 12.0;  // Hz
  double burst_freq_lo = 30.0;
  double burst_freq_hi = 40.0;
  double burst_prob = 0.01;          // per-sample probability of starting a burst
  double burst_mean_samples = 25.0;  // mean burst length (50 ms at 500 Hz)
  double burst_amplitude = 0.8;      // relative to osc_amplitude
  double jump_prob = 0.005;          // per-sample probability of a base-frequency jump
  double osc_amplitude = 1.0;
  double ar_rho = 0.0;  // AR(1) coefficient of the additive noise component
  double ar_std = 0.0;  // stationary std of the AR(1) component
};

struct DelayConfig {
  double amplitude_samples = 0.0;  // 0 disables the delay
  double period_samples = 250.0;
};

struct MixingConfig {
  bool gain = false;      // per-contact tanh(g*x), g ~ U(slope_lo, slope_hi)
  bool bilinear = false;  // pairwise latent products mixed into contacts
  bool cross_terms = false;  // include shared x private product pairs
  double bilinear_scale = 0.25;
  double gain_slope_lo = 0.5;
  double gain_slope_hi = 2.0;
};

// Scales are relative to the per-region pre-noise signal std.
struct NoiseConfig {
  double one_over_f = 0.0;
  HeteroMode hetero_mode = HeteroMode::abs;
  double hetero = 0.0;
  double row_drift = 0.0;
  int common_mode_rank = 0;
  double common_mode = 0.0;
  double gaussian_floor = 0.0;
};

struct GeneratorConfig {
  int n_trials = 100;
  int T = 250;
  double fs = 500.0;
  int d_shared = 3;
  int d_private = 3;
  std::vector<ElectrodeGeometry> regions;
  LatentDynamics latent_dynamics;
  WarpKind warp = WarpKind::none;
  DelayConfig delay;
  MixingConfig mixing;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  bool normalize_latents = true;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct WarpDescriptor {
  WarpKind kind = WarpKind::none;
  // Monotone mode: per-dimension exponent of sign(z)*|z|^p.
  // Cubic mode: per-dimension coefficient c of z + c*z^3.
  std::vector<double> params;
};

// Ground-truth latent trajectories. Internally double so that downstream
// common-mode arithmetic can cancel exactly; persisted as float32.
struct LatentBundle {
  int T = 0;
  int d_shared = 0;
  int d_private = 0;
  // shared[region][trial]: T x d_shared; private_[region][trial]: T x d_private
  std::vector<std::vector<Matd>> shared;
  std::vector<std::vector<Matd>> private_;
  std::optional<Vecd> delay_profile;  // per-sample lag in samples
  WarpDescriptor warp;

  int regions() const { return static_cast<int>(shared.size()); }
  int trials() const { return shared.empty() ? 0 : static_cast<int>(shared[0].size()); }
};

enum class SplitTag { unsplit, train, val, test };
const char* to_string(SplitTag t);

struct TrialDataset {
  // observations[region][trial]: T x C_bipolar
  std::vector<std::vector<Matf>> observations;
  double fs = 0.0;
  std::vector<int> labels;  // optional per-trial condition tags; empty if none
  std::vector<ElectrodeGeometry> regions;
  std::string provenance_hash;  // hash of (config, seed)
  std::uint64_t seed = 0;
  std::vector<SplitTag> split_tags;  // per trial; empty means unsplit

  int n_regions() const { return static_cast<int>(observations.size()); }
  int n_trials() const { return observations.empty() ? 0 : static_cast<int>(observations[0].size()); }
  int T() const { return n_trials() == 0 ? 0 : static_cast<int>(observations[0][0].rows()); }
  int channels(int region) const { return static_cast<int>(observations[region][0].cols()); }
};

// --- pipeline stages ---

// Shared latents identical across regions (pre warp/delay); private latents
// independent per region. Deterministic in config.seed; each trial draws from
// its own substream so per-trial generation order is irrelevant.
LatentBundle generate_latents(const GeneratorConfig& config);

// Resamples every region r >= 1 shared latent from region 0 at t - lag(t)
// with linear interpolation and edge clamping; stores the profile.
void apply_time_varying_delay(LatentBundle& bundle, double amplitude_samples,
                              double period_samples);
// Same, with an arbitrary lag profile (used for constant-lag diagnostics).
void apply_delay_profile(LatentBundle& bundle, const Vecd& profile);

// Transforms shared latents of every region r >= 1 per dimension; region 0
// is the reference and stays untouched.
void apply_region_warp(LatentBundle& bundle, WarpKind kind, Rng rng,
                       double cubic_coef = 0.3);

struct MixingKernels {
  Matd spatial;         // contacts x (d_shared + d_private)
  Matd bilinear;        // contacts x n_pairs (empty when bilinear off)
  std::vector<std::pair<int, int>> pairs;  // latent index pairs for products
  Vecd gains;           // per-contact tanh slopes (empty when gain off)
};

MixingKernels draw_mixing_kernels(const ElectrodeGeometry& geom, int d_shared, int d_private,
                                  const MixingConfig& mixing, Rng rng);

// One region, one trial: latents (T x d_sh), (T x d_pr) -> contacts (T x C).
Matd apply_mixing(const Matd& shared, const Matd& priv, const MixingKernels& kernels,
                  const MixingConfig& mixing);

// All regions/trials: signals[region][trial] = T x contacts.
std::vector<std::vector<Matd>> mix_to_observations(const LatentBundle& bundle,
                                                   const std::vector<ElectrodeGeometry>& regions,
                                                   const MixingConfig& mixing, Rng rng);

// Adds the five noise sources in place (floor, 1/f, heteroscedastic,
// low-rank common mode, then row drift). Every non-drift contribution is
// quantized to float32 values and the drift is added last in double, so
// bipolar derivation cancels row-common terms bit-exactly.
void add_structured_noise(std::vector<std::vector<Matd>>& signals, const LatentBundle& bundle,
                          const std::vector<ElectrodeGeometry>& regions, const NoiseConfig& noise,
                          Rng rng);

// Differences of adjacent same-row contacts; channel count drops by n_rows.
Matd bipolar_rereference(const Matd& contacts, const ElectrodeGeometry& geom);

// Full pipeline for an arbitrary config.
std::pair<TrialDataset, LatentBundle> generate_dataset(const GeneratorConfig& config);

// --- presets ---

enum class PresetId { D0, D1, D2 };
PresetId preset_from_string(const std::string& s);
const char* to_string(PresetId p);

GeneratorConfig preset_config(PresetId preset, std::uint64_t seed);
std::pair<TrialDataset, LatentBundle> generate_preset(PresetId preset, std::uint64_t seed);

// --- persistence (dataset container) ---

void save_dataset(const std::string& dir, const TrialDataset& data, const LatentBundle& bundle,
                  const GeneratorConfig& config, const std::string& preset_name = "");
struct LoadedDataset {
  TrialDataset data;
  LatentBundle bundle;  // empty if the container carries no ground truth
  bool has_ground_truth = false;
  std::string preset;
};
LoadedDataset load_dataset(const std::string& dir);

// Canonical JSON used for provenance hashing and manifests.
std::string generator_config_to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const std::string& text);

}  // namespace spire
