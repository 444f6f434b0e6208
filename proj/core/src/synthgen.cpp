#include "spire/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "spire/container.hpp"
#include "spire/errors.hpp"
#include "spire/hash.hpp"

namespace spire {

using nlohmann::json;

const char* to_string(WarpKind k) {
  switch (k) {
    case WarpKind::none: return "none";
    case WarpKind::monotone: return "monotone";
    case WarpKind::cubic: return "cubic";
  }
  return "?";
}

WarpKind warp_from_string(const std::string& s) {
  if (s == "none") return WarpKind::none;
  if (s == "monotone" || s == "region_mismatch") return WarpKind::monotone;
  if (s == "cubic") return WarpKind::cubic;
  throw ConfigError("unknown warp kind '" + s + "'");
}

const char* to_string(HeteroMode m) {
  switch (m) {
    case HeteroMode::abs: return "abs";
    case HeteroMode::power: return "power";
    case HeteroMode::multiplicative: return "multiplicative";
  }
  return "?";
}

HeteroMode hetero_from_string(const std::string& s) {
  if (s == "abs") return HeteroMode::abs;
  if (s == "power") return HeteroMode::power;
  if (s == "multiplicative") return HeteroMode::multiplicative;
  throw ConfigError("unknown heteroscedastic mode '" + s + "'");
}

const char* to_string(SplitTag t) {
  switch (t) {
    case SplitTag::unsplit: return "unsplit";
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "?";
}

const char* to_string(PresetId p) {
  switch (p) {
    case PresetId::D0: return "D0";
    case PresetId::D1: return "D1";
    case PresetId::D2: return "D2";
  }
  return "?";
}

PresetId preset_from_string(const std::string& s) {
  if (s == "D0" || s == "d0") return PresetId::D0;
  if (s == "D1" || s == "d1") return PresetId::D1;
  if (s == "D2" || s == "d2") return PresetId::D2;
  throw ConfigError("unknown preset '" + s + "' (expected D0, D1 or D2)");
}

void GeneratorConfig::validate() const {
  check_config(n_trials >= 1, "generator config: n_trials must be >= 1");
  check_config(T >= 2, "generator config: T must be >= 2");
  check_config(fs > 0, "generator config: fs must be positive");
  check_config(d_shared >= 1, "generator config: d_shared must be >= 1");
  check_config(d_private >= 1, "generator config: d_private must be >= 1");
  check_config(!regions.empty(), "generator config: regions must be non-empty");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& g = regions[i];
    check_config(g.n_rows >= 1, "generator config: regions[" + std::to_string(i) + "].n_rows");
    check_config(g.contacts_per_row >= 2,
                 "generator config: regions[" + std::to_string(i) +
                     "].contacts_per_row must be >= 2 (bipolar derivation)");
  }
  const auto& d = latent_dynamics;
  check_config(d.base_freq_lo > 0 && d.base_freq_hi >= d.base_freq_lo,
               "generator config: latent_dynamics.base_freq range");
  check_config(d.burst_freq_lo > 0 && d.burst_freq_hi >= d.burst_freq_lo,
               "generator config: latent_dynamics.burst_freq range");
  check_config(d.burst_prob >= 0 && d.burst_prob <= 1,
               "generator config: latent_dynamics.burst_prob");
  check_config(d.jump_prob >= 0 && d.jump_prob <= 1, "generator config: latent_dynamics.jump_prob");
  check_config(d.burst_mean_samples > 0, "generator config: latent_dynamics.burst_mean_samples");
  check_config(d.ar_rho >= 0 && d.ar_rho < 1, "generator config: latent_dynamics.ar_rho");
  check_config(d.ar_std >= 0, "generator config: latent_dynamics.ar_std");
  check_config(d.osc_amplitude >= 0, "generator config: latent_dynamics.osc_amplitude");
  check_config(delay.amplitude_samples >= 0, "generator config: delay.amplitude_samples");
  if (delay.amplitude_samples > 0) {
    check_config(delay.period_samples > 0, "generator config: delay.period_samples");
    check_config(delay.amplitude_samples < T / 4.0,
                 "generator config: delay.amplitude_samples must be < T/4");
    check_config(T >= 2 * delay.amplitude_samples + 1,
                 "generator config: T must be >= 2*delay amplitude + 1");
  }
  check_config(mixing.bilinear_scale >= 0, "generator config: mixing.bilinear_scale");
  check_config(mixing.gain_slope_lo > 0 && mixing.gain_slope_hi >= mixing.gain_slope_lo,
               "generator config: mixing.gain_slope range");
  check_config(noise.one_over_f >= 0, "generator config: noise.one_over_f");
  check_config(noise.hetero >= 0, "generator config: noise.hetero");
  check_config(noise.row_drift >= 0, "generator config: noise.row_drift");
  check_config(noise.common_mode >= 0, "generator config: noise.common_mode");
  check_config(noise.common_mode_rank >= 0, "generator config: noise.common_mode_rank");
  check_config(noise.gaussian_floor >= 0, "generator config: noise.gaussian_floor");
}

// --- latent dynamics ---

namespace {

// One bursty-oscillator trajectory plus an independent AR(1) component.
Vecd latent_trajectory(const LatentDynamics& d, int T, double fs, Rng rng) {
  Vecd x = Vecd::Zero(T);
  double freq = rng.uniform(d.base_freq_lo, d.base_freq_hi);
  double phase = rng.uniform(0.0, 2.0 * M_PI);
  int burst_left = 0, burst_len = 0, burst_t0 = 0;
  double burst_freq = 0.0, burst_phase = 0.0;
  for (int t = 0; t < T; ++t) {
    double u_jump = rng.uniform();
    if (u_jump < d.jump_prob) freq = rng.uniform(d.base_freq_lo, d.base_freq_hi);
    phase += 2.0 * M_PI * freq / fs;
    x[t] = d.osc_amplitude * std::sin(phase);
    if (burst_left == 0) {
      double u_burst = rng.uniform();
      if (u_burst < d.burst_prob) {
        double u_len = rng.uniform();
        burst_len = std::max<int>(2, static_cast<int>(
                                         std::llround(-d.burst_mean_samples * std::log1p(-u_len))));
        burst_freq = rng.uniform(d.burst_freq_lo, d.burst_freq_hi);
        burst_phase = rng.uniform(0.0, 2.0 * M_PI);
        burst_t0 = t;
        burst_left = burst_len;
      }
    }
    if (burst_left > 0) {
      int k = t - burst_t0;
      double hann = burst_len > 1 ? 0.5 * (1.0 - std::cos(2.0 * M_PI * k / (burst_len - 1))) : 1.0;
      x[t] += d.osc_amplitude * d.burst_amplitude * hann *
              std::sin(2.0 * M_PI * burst_freq * k / fs + burst_phase);
      --burst_left;
    }
  }
  if (d.ar_std > 0) {
    const double innov = d.ar_std * std::sqrt(1.0 - d.ar_rho * d.ar_rho);
    double a = d.ar_std * rng.normal();  // stationary start
    x[0] += a;
    for (int t = 1; t < T; ++t) {
      a = d.ar_rho * a + innov * rng.normal();
      x[t] += a;
    }
  }
  return x;
}

void normalize_columns(Matd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double mean = m.col(j).mean();
    m.col(j).array() -= mean;
    double sd = std::sqrt(m.col(j).squaredNorm() / static_cast<double>(m.rows()));
    m.col(j) /= std::max(sd, 1e-12);
  }
}

inline double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

LatentBundle generate_latents(const GeneratorConfig& config) {
  config.validate();
  const int R = static_cast<int>(config.regions.size());
  LatentBundle b;
  b.T = config.T;
  b.d_shared = config.d_shared;
  b.d_private = config.d_private;
  b.shared.assign(R, std::vector<Matd>(config.n_trials));
  b.private_.assign(R, std::vector<Matd>(config.n_trials));

  Rng root(config.seed);
  for (int i = 0; i < config.n_trials; ++i) {
    Rng trial = root.sub(stream::latents, static_cast<std::uint64_t>(i));
    Matd sh(config.T, config.d_shared);
    for (int j = 0; j < config.d_shared; ++j) {
      sh.col(j) = latent_trajectory(config.latent_dynamics, config.T, config.fs,
                                    trial.sub(stream::shared, static_cast<std::uint64_t>(j)));
    }
    if (config.normalize_latents) normalize_columns(sh);
    for (int r = 0; r < R; ++r) b.shared[r][i] = sh;
    for (int r = 0; r < R; ++r) {
      Matd pr(config.T, config.d_private);
      for (int j = 0; j < config.d_private; ++j) {
        pr.col(j) = latent_trajectory(
            config.latent_dynamics, config.T, config.fs,
            trial.sub(stream::priv, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(j)));
      }
      if (config.normalize_latents) normalize_columns(pr);
      b.private_[r][i] = std::move(pr);
    }
  }
  return b;
}

void apply_delay_profile(LatentBundle& bundle, const Vecd& profile) {
  check_shape(profile.size() == bundle.T, "delay profile length must equal T");
  const int T = bundle.T;
  for (int r = 1; r < bundle.regions(); ++r) {
    for (int i = 0; i < bundle.trials(); ++i) {
      const Matd& src = bundle.shared[0][i];
      Matd out(T, src.cols());
      for (int t = 0; t < T; ++t) {
        double tau = static_cast<double>(t) - profile[t];
        tau = std::clamp(tau, 0.0, static_cast<double>(T - 1));
        int i0 = static_cast<int>(std::floor(tau));
        int i1 = std::min(i0 + 1, T - 1);
        double frac = tau - i0;
        out.row(t) = (1.0 - frac) * src.row(i0) + frac * src.row(i1);
      }
      bundle.shared[r][i] = std::move(out);
    }
  }
  bundle.delay_profile = profile;
}

void apply_time_varying_delay(LatentBundle& bundle, double amplitude_samples,
                              double period_samples) {
  check_config(amplitude_samples >= 0, "delay amplitude must be >= 0");
  check_config(amplitude_samples < bundle.T / 4.0, "delay amplitude must be < T/4");
  check_config(period_samples > 0, "delay period must be positive");
  Vecd profile(bundle.T);
  for (int t = 0; t < bundle.T; ++t)
    profile[t] = amplitude_samples * std::sin(2.0 * M_PI * t / period_samples);
  apply_delay_profile(bundle, profile);
}

void apply_region_warp(LatentBundle& bundle, WarpKind kind, Rng rng, double cubic_coef) {
  bundle.warp.kind = kind;
  bundle.warp.params.clear();
  if (kind == WarpKind::none) return;
  for (int r = 1; r < bundle.regions(); ++r) {
    for (int j = 0; j < bundle.d_shared; ++j) {
      double param = kind == WarpKind::monotone ? rng.uniform(0.6, 1.6) : cubic_coef;
      bundle.warp.params.push_back(param);
      for (int i = 0; i < bundle.trials(); ++i) {
        auto col = bundle.shared[r][i].col(j);
        for (int t = 0; t < bundle.T; ++t) {
          double z = col[t];
          col[t] = kind == WarpKind::monotone
                       ? (z >= 0 ? std::pow(z, param) : -std::pow(-z, param))
                       : z + cubic_coef * z * z * z;
        }
      }
    }
  }
}

// --- observation mixing ---

MixingKernels draw_mixing_kernels(const ElectrodeGeometry& geom, int d_shared, int d_private,
                                  const MixingConfig& mixing, Rng rng) {
  const int C = geom.contacts();
  const int D = d_shared + d_private;
  check_config(C >= 1, "mixing: geometry must have at least one contact");
  MixingKernels k;
  k.spatial.resize(C, D);
  const double sigma = std::max(1.0, geom.n_rows / 2.0);
  for (int l = 0; l < D; ++l) {
    double center = rng.uniform(0.0, static_cast<double>(geom.n_rows));
    for (int c = 0; c < C; ++c) {
      int row = c / geom.contacts_per_row;
      double falloff = std::exp(-0.5 * (row + 0.5 - center) * (row + 0.5 - center) / (sigma * sigma));
      k.spatial(c, l) = falloff * rng.normal();
    }
    double nrm = k.spatial.col(l).norm();
    if (nrm < 1e-12) {
      k.spatial(0, l) = 1.0;
      nrm = 1.0;
    }
    k.spatial.col(l) /= nrm;
  }
  if (mixing.bilinear) {
    for (int a = 0; a < d_shared; ++a)
      for (int b = a + 1; b < d_shared; ++b) k.pairs.emplace_back(a, b);
    for (int a = 0; a < d_private; ++a)
      for (int b = a + 1; b < d_private; ++b)
        k.pairs.emplace_back(d_shared + a, d_shared + b);
    if (mixing.cross_terms) {
      for (int a = 0; a < d_shared; ++a)
        for (int b = 0; b < d_private; ++b) k.pairs.emplace_back(a, d_shared + b);
    }
    const int P = static_cast<int>(k.pairs.size());
    k.bilinear.resize(C, P);
    const double scale = mixing.bilinear_scale / std::sqrt(static_cast<double>(std::max(1, P)));
    for (int p = 0; p < P; ++p)
      for (int c = 0; c < C; ++c) k.bilinear(c, p) = scale * rng.normal();
  }
  if (mixing.gain) {
    k.gains.resize(C);
    for (int c = 0; c < C; ++c) k.gains[c] = rng.uniform(mixing.gain_slope_lo, mixing.gain_slope_hi);
  }
  return k;
}

Matd apply_mixing(const Matd& shared, const Matd& priv, const MixingKernels& kernels,
                  const MixingConfig& mixing) {
  check_shape(shared.rows() == priv.rows(), "mixing: latent lengths differ");
  const int T = static_cast<int>(shared.rows());
  const int D = static_cast<int>(shared.cols() + priv.cols());
  check_shape(kernels.spatial.cols() == D, "mixing: kernel latent dimension mismatch");
  Matd z(T, D);
  z << shared, priv;
  Matd y = z * kernels.spatial.transpose();
  if (mixing.bilinear && kernels.bilinear.size() > 0) {
    Matd q(T, static_cast<Eigen::Index>(kernels.pairs.size()));
    for (std::size_t p = 0; p < kernels.pairs.size(); ++p) {
      auto [a, b] = kernels.pairs[p];
      q.col(static_cast<Eigen::Index>(p)) = z.col(a).cwiseProduct(z.col(b));
    }
    y += q * kernels.bilinear.transpose();
  }
  if (mixing.gain && kernels.gains.size() > 0) {
    for (Eigen::Index c = 0; c < y.cols(); ++c)
      y.col(c) = (kernels.gains[c] * y.col(c).array()).tanh();
  }
  return y;
}

std::vector<std::vector<Matd>> mix_to_observations(const LatentBundle& bundle,
                                                   const std::vector<ElectrodeGeometry>& regions,
                                                   const MixingConfig& mixing, Rng rng) {
  check_shape(static_cast<int>(regions.size()) == bundle.regions(),
              "mixing: geometry count must match bundle regions");
  std::vector<std::vector<Matd>> signals(regions.size());
  for (std::size_t r = 0; r < regions.size(); ++r) {
    MixingKernels kernels = draw_mixing_kernels(regions[r], bundle.d_shared, bundle.d_private,
                                                mixing, rng.sub(static_cast<std::uint64_t>(r)));
    signals[r].resize(bundle.trials());
    for (int i = 0; i < bundle.trials(); ++i)
      signals[r][i] = apply_mixing(bundle.shared[r][i], bundle.private_[r][i], kernels, mixing);
  }
  return signals;
}

// --- structured noise ---

namespace {

double pooled_std(const std::vector<Matd>& trials) {
  double sum = 0.0, sq = 0.0;
  long long n = 0;
  for (const auto& m : trials) {
    sum += m.sum();
    sq += m.squaredNorm();
    n += m.size();
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  return std::sqrt(std::max(var, 0.0));
}

// Sum-of-sinusoids synthesis with amplitude k^{-1/2}: expected PSD ~ 1/f.
Vecd one_over_f_series(int T, Rng rng) {
  const int K = T / 2;
  Vecd x = Vecd::Zero(T);
  double harm = 0.0;
  for (int k = 1; k <= K; ++k) harm += 1.0 / k;
  for (int k = 1; k <= K; ++k) {
    double amp = 1.0 / std::sqrt(static_cast<double>(k));
    double a = rng.normal(), b = rng.normal();
    double w = 2.0 * M_PI * k / T;
    for (int t = 0; t < T; ++t) x[t] += amp * (a * std::cos(w * t) + b * std::sin(w * t));
  }
  // Unit expected variance: var = harmonic sum (cos^2+sin^2 averages to 1/2 each).
  x /= std::sqrt(harm);
  return x;
}

Vecd ar1_series(int T, double rho, Rng rng) {
  Vecd x(T);
  double innov = std::sqrt(1.0 - rho * rho);
  x[0] = rng.normal();
  for (int t = 1; t < T; ++t) x[t] = rho * x[t - 1] + innov * rng.normal();
  return x;
}

Vecd random_walk_unit(int T, Rng rng) {
  Vecd x(T);
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    acc += rng.normal();
    x[t] = acc;
  }
  x.array() -= x.mean();
  double sd = std::sqrt(x.squaredNorm() / T);
  x /= std::max(sd, 1e-12);
  return x;
}

}  // namespace

void add_structured_noise(std::vector<std::vector<Matd>>& signals, const LatentBundle& bundle,
                          const std::vector<ElectrodeGeometry>& regions, const NoiseConfig& noise,
                          Rng rng) {
  check_config(noise.one_over_f >= 0 && noise.hetero >= 0 && noise.row_drift >= 0 &&
                   noise.common_mode >= 0 && noise.gaussian_floor >= 0,
               "noise scales must be non-negative");
  for (std::size_t r = 0; r < signals.size(); ++r) {
    auto& trials = signals[r];
    if (trials.empty()) continue;
    const int T = static_cast<int>(trials[0].rows());
    const int C = static_cast<int>(trials[0].cols());
    // All scales are relative to the pre-noise signal std; a silent region
    // falls back to unit scale so pure-noise streams stay usable.
    double sig = pooled_std(trials);
    if (sig < 1e-12) sig = 1.0;
    Rng rs = rng.sub(static_cast<std::uint64_t>(r));

    // Region-level common-mode loadings, unit RMS across contacts.
    std::vector<Vecd> loadings;
    for (int k = 0; k < noise.common_mode_rank; ++k) {
      Rng lr = rs.sub(5, static_cast<std::uint64_t>(k));
      Vecd v(C);
      for (int c = 0; c < C; ++c) v[c] = lr.normal();
      double rms = std::sqrt(v.squaredNorm() / C);
      loadings.push_back(v / std::max(rms, 1e-12));
    }

    for (std::size_t i = 0; i < trials.size(); ++i) {
      Matd& x = trials[i];
      const auto ti = static_cast<std::uint64_t>(i);
      if (noise.gaussian_floor > 0) {
        for (int c = 0; c < C; ++c) {
          Rng s = rs.sub(1, ti, static_cast<std::uint64_t>(c));
          for (int t = 0; t < T; ++t) x(t, c) += f32(noise.gaussian_floor * sig * s.normal());
        }
      }
      if (noise.one_over_f > 0) {
        for (int c = 0; c < C; ++c) {
          Vecd series = one_over_f_series(T, rs.sub(2, ti, static_cast<std::uint64_t>(c)));
          for (int t = 0; t < T; ++t) x(t, c) += f32(noise.one_over_f * sig * series[t]);
        }
      }
      if (noise.hetero > 0) {
        // Modulation from the region's ground-truth latent amplitude.
        Vecd mod(T);
        const Matd& sh = bundle.shared[r][i];
        const Matd& pr = bundle.private_[r][i];
        for (int t = 0; t < T; ++t) {
          double m = (sh.row(t).cwiseAbs().sum() + pr.row(t).cwiseAbs().sum()) /
                     (sh.cols() + pr.cols());
          switch (noise.hetero_mode) {
            case HeteroMode::abs: mod[t] = m; break;
            case HeteroMode::power: mod[t] = m * m; break;
            case HeteroMode::multiplicative: mod[t] = 1.0 + m; break;
          }
        }
        for (int c = 0; c < C; ++c) {
          Rng s = rs.sub(3, ti, static_cast<std::uint64_t>(c));
          for (int t = 0; t < T; ++t) x(t, c) += f32(noise.hetero * sig * mod[t] * s.normal());
        }
      }
      if (noise.common_mode > 0 && noise.common_mode_rank > 0) {
        for (int k = 0; k < noise.common_mode_rank; ++k) {
          Vecd u = ar1_series(T, 0.95, rs.sub(4, ti, static_cast<std::uint64_t>(k)));
          for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t)
              x(t, c) += f32(noise.common_mode * sig * u[t] * loadings[k][c]);
        }
      }
      // Row drift last, unquantized sums: bipolar differences cancel it
      // bit-exactly because every prior contribution is f32-representable.
      if (noise.row_drift > 0) {
        for (int row = 0; row < regions[r].n_rows; ++row) {
          Vecd d = random_walk_unit(T, rs.sub(6, ti, static_cast<std::uint64_t>(row)));
          for (int t = 0; t < T; ++t) {
            double v = f32(noise.row_drift * sig * d[t]);
            for (int j = 0; j < regions[r].contacts_per_row; ++j)
              x(t, row * regions[r].contacts_per_row + j) += v;
          }
        }
      }
    }
  }
}

Matd bipolar_rereference(const Matd& contacts, const ElectrodeGeometry& geom) {
  check_shape(contacts.cols() == geom.contacts(), "bipolar: contact count mismatch");
  check_config(geom.contacts_per_row >= 2, "bipolar: each row needs at least 2 contacts");
  Matd out(contacts.rows(), geom.bipolar_channels());
  int o = 0;
  for (int row = 0; row < geom.n_rows; ++row) {
    for (int j = 0; j + 1 < geom.contacts_per_row; ++j) {
      int c = row * geom.contacts_per_row + j;
      out.col(o++) = contacts.col(c) - contacts.col(c + 1);
    }
  }
  return out;
}

// --- full pipeline ---

std::pair<TrialDataset, LatentBundle> generate_dataset_impl(const GeneratorConfig& config,
                                                            const std::string& preset_name) {
  config.validate();
  Rng root(config.seed);
  LatentBundle bundle = generate_latents(config);
  if (config.delay.amplitude_samples > 0)
    apply_time_varying_delay(bundle, config.delay.amplitude_samples, config.delay.period_samples);
  if (config.warp != WarpKind::none)
    apply_region_warp(bundle, config.warp, root.sub(stream::warp));
  auto signals = mix_to_observations(bundle, config.regions, config.mixing, root.sub(stream::mixing));
  add_structured_noise(signals, bundle, config.regions, config.noise, root.sub(stream::noise));

  TrialDataset ds;
  ds.fs = config.fs;
  ds.seed = config.seed;
  ds.regions = config.regions;
  ds.provenance_hash = sha256_hex(generator_config_to_json(config));
  ds.observations.resize(config.regions.size());
  for (std::size_t r = 0; r < config.regions.size(); ++r) {
    ds.observations[r].resize(signals[r].size());
    for (std::size_t i = 0; i < signals[r].size(); ++i)
      ds.observations[r][i] = bipolar_rereference(signals[r][i], config.regions[r]).cast<float>();
  }
  (void)preset_name;
  return {std::move(ds), std::move(bundle)};
}

std::pair<TrialDataset, LatentBundle> generate_dataset(const GeneratorConfig& config) {
  return generate_dataset_impl(config, "");
}

GeneratorConfig preset_config(PresetId preset, std::uint64_t seed) {
  GeneratorConfig c;
  c.n_trials = 100;
  c.T = 250;
  c.fs = 500.0;
  c.d_shared = 3;
  c.d_private = 3;
  c.regions = {{"region1", 2, 5}, {"region2", 2, 5}};
  c.seed = seed;
  switch (preset) {
    case PresetId::D0:
      c.noise.gaussian_floor = 0.05;
      break;
    case PresetId::D2:
      c.delay.amplitude_samples = 3.0;
      c.delay.period_samples = 250.0;
      [[fallthrough]];
    case PresetId::D1:
      c.latent_dynamics.ar_rho = 0.8;
      c.latent_dynamics.ar_std = 0.5;
      c.warp = WarpKind::monotone;
      c.mixing.gain = true;
      c.mixing.bilinear = true;
      c.noise.one_over_f = 0.2;
      c.noise.hetero_mode = HeteroMode::abs;
      c.noise.hetero = 0.1;
      c.noise.row_drift = 0.1;
      c.noise.common_mode_rank = 1;
      c.noise.common_mode = 0.1;
      c.noise.gaussian_floor = 0.05;
      break;
  }
  return c;
}

std::pair<TrialDataset, LatentBundle> generate_preset(PresetId preset, std::uint64_t seed) {
  return generate_dataset_impl(preset_config(preset, seed), to_string(preset));
}

// --- config serialization ---

std::string generator_config_to_json(const GeneratorConfig& c) {
  json j;
  j["n_trials"] = c.n_trials;
  j["T"] = c.T;
  j["fs"] = c.fs;
  j["d_shared"] = c.d_shared;
  j["d_private"] = c.d_private;
  j["seed"] = c.seed;
  j["normalize_latents"] = c.normalize_latents;
  j["regions"] = json::array();
  for (const auto& r : c.regions)
    j["regions"].push_back(
        {{"name", r.name}, {"n_rows", r.n_rows}, {"contacts_per_row", r.contacts_per_row}});
  const auto& d = c.latent_dynamics;
  j["latent_dynamics"] = {{"base_freq_lo", d.base_freq_lo},
                          {"base_freq_hi", d.base_freq_hi},
                          {"burst_freq_lo", d.burst_freq_lo},
                          {"burst_freq_hi", d.burst_freq_hi},
                          {"burst_prob", d.burst_prob},
                          {"burst_mean_samples", d.burst_mean_samples},
                          {"burst_amplitude", d.burst_amplitude},
                          {"jump_prob", d.jump_prob},
                          {"osc_amplitude", d.osc_amplitude},
                          {"ar_rho", d.ar_rho},
                          {"ar_std", d.ar_std}};
  j["warp"] = to_string(c.warp);
  j["delay"] = {{"amplitude_samples", c.delay.amplitude_samples},
                {"period_samples", c.delay.period_samples}};
  j["mixing"] = {{"gain", c.mixing.gain},
                 {"bilinear", c.mixing.bilinear},
                 {"cross_terms", c.mixing.cross_terms},
                 {"bilinear_scale", c.mixing.bilinear_scale},
                 {"gain_slope_lo", c.mixing.gain_slope_lo},
                 {"gain_slope_hi", c.mixing.gain_slope_hi}};
  j["noise"] = {{"one_over_f", c.noise.one_over_f},
                {"hetero_mode", to_string(c.noise.hetero_mode)},
                {"hetero", c.noise.hetero},
                {"row_drift", c.noise.row_drift},
                {"common_mode_rank", c.noise.common_mode_rank},
                {"common_mode", c.noise.common_mode},
                {"gaussian_floor", c.noise.gaussian_floor}};
  return j.dump();
}

GeneratorConfig generator_config_from_json(const std::string& text) {
  json j = json::parse(text);
  GeneratorConfig c;
  c.n_trials = j.value("n_trials", c.n_trials);
  c.T = j.value("T", c.T);
  c.fs = j.value("fs", c.fs);
  c.d_shared = j.value("d_shared", c.d_shared);
  c.d_private = j.value("d_private", c.d_private);
  c.seed = j.value("seed", c.seed);
  c.normalize_latents = j.value("normalize_latents", c.normalize_latents);
  c.regions.clear();
  for (const auto& r : j.value("regions", json::array()))
    c.regions.push_back({r.at("name").get<std::string>(), r.at("n_rows").get<int>(),
                         r.at("contacts_per_row").get<int>()});
  if (j.contains("latent_dynamics")) {
    const auto& d = j["latent_dynamics"];
    auto& ld = c.latent_dynamics;
    ld.base_freq_lo = d.value("base_freq_lo", ld.base_freq_lo);
    ld.base_freq_hi = d.value("base_freq_hi", ld.base_freq_hi);
    ld.burst_freq_lo = d.value("burst_freq_lo", ld.burst_freq_lo);
    ld.burst_freq_hi = d.value("burst_freq_hi", ld.burst_freq_hi);
    ld.burst_prob = d.value("burst_prob", ld.burst_prob);
    ld.burst_mean_samples = d.value("burst_mean_samples", ld.burst_mean_samples);
    ld.burst_amplitude = d.value("burst_amplitude", ld.burst_amplitude);
    ld.jump_prob = d.value("jump_prob", ld.jump_prob);
    ld.osc_amplitude = d.value("osc_amplitude", ld.osc_amplitude);
    ld.ar_rho = d.value("ar_rho", ld.ar_rho);
    ld.ar_std = d.value("ar_std", ld.ar_std);
  }
  c.warp = warp_from_string(j.value("warp", "none"));
  if (j.contains("delay")) {
    c.delay.amplitude_samples = j["delay"].value("amplitude_samples", 0.0);
    c.delay.period_samples = j["delay"].value("period_samples", 250.0);
  }
  if (j.contains("mixing")) {
    const auto& m = j["mixing"];
    c.mixing.gain = m.value("gain", false);
    c.mixing.bilinear = m.value("bilinear", false);
    c.mixing.cross_terms = m.value("cross_terms", false);
    c.mixing.bilinear_scale = m.value("bilinear_scale", c.mixing.bilinear_scale);
    c.mixing.gain_slope_lo = m.value("gain_slope_lo", c.mixing.gain_slope_lo);
    c.mixing.gain_slope_hi = m.value("gain_slope_hi", c.mixing.gain_slope_hi);
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    c.noise.one_over_f = n.value("one_over_f", 0.0);
    c.noise.hetero_mode = hetero_from_string(n.value("hetero_mode", "abs"));
    c.noise.hetero = n.value("hetero", 0.0);
    c.noise.row_drift = n.value("row_drift", 0.0);
    c.noise.common_mode_rank = n.value("common_mode_rank", 0);
    c.noise.common_mode = n.value("common_mode", 0.0);
    c.noise.gaussian_floor = n.value("gaussian_floor", 0.0);
  }
  return c;
}

// --- persistence ---

void save_dataset(const std::string& dir, const TrialDataset& data, const LatentBundle& bundle,
                  const GeneratorConfig& config, const std::string& preset_name) {
  ContainerWriter w(dir);
  auto& m = w.manifest();
  m.kind = "dataset";
  m.preset = preset_name;
  m.seed = data.seed;
  m.n_trials = data.n_trials();
  m.T = data.T();
  m.fs = data.fs;
  for (const auto& g : data.regions) m.regions.push_back({g.name, g.n_rows, g.contacts_per_row});

  for (int r = 0; r < data.n_regions(); ++r)
    w.add_trials("observations_r" + std::to_string(r), data.observations[r]);
  for (int r = 0; r < bundle.regions(); ++r) {
    std::vector<Matf> sh(bundle.trials()), pr(bundle.trials());
    for (int i = 0; i < bundle.trials(); ++i) {
      sh[i] = bundle.shared[r][i].cast<float>();
      pr[i] = bundle.private_[r][i].cast<float>();
    }
    w.add_trials("shared_r" + std::to_string(r), sh);
    w.add_trials("private_r" + std::to_string(r), pr);
  }
  if (bundle.delay_profile) w.add_vector("delay_profile", bundle.delay_profile->cast<float>());
  if (!data.labels.empty()) {
    Vecf lab(data.labels.size());
    for (std::size_t i = 0; i < data.labels.size(); ++i) lab[i] = static_cast<float>(data.labels[i]);
    w.add_vector("labels", lab);
  }

  json extra;
  extra["generator_config"] = json::parse(generator_config_to_json(config));
  extra["provenance_hash"] = data.provenance_hash;
  extra["warp"] = {{"kind", to_string(bundle.warp.kind)}, {"params", bundle.warp.params}};
  m.extra = extra.dump();
  w.finish();
}

LoadedDataset load_dataset(const std::string& dir) {
  ContainerReader reader(dir);
  const Manifest& m = reader.manifest();
  if (m.kind != "dataset") throw DataError(dir + " is not a dataset container");
  LoadedDataset out;
  out.preset = m.preset;
  TrialDataset& ds = out.data;
  ds.fs = m.fs;
  ds.seed = m.seed;
  for (const auto& r : m.regions) ds.regions.push_back({r.name, r.n_rows, r.contacts_per_row});
  int R = static_cast<int>(m.regions.size());
  ds.observations.resize(R);
  for (int r = 0; r < R; ++r)
    ds.observations[r] = reader.read_trials("observations_r" + std::to_string(r));
  if (m.has_array("labels")) {
    Vecf lab = reader.read_vector("labels");
    ds.labels.resize(lab.size());
    for (Eigen::Index i = 0; i < lab.size(); ++i) ds.labels[i] = static_cast<int>(lab[i]);
  }
  if (!m.extra.empty()) {
    json extra = json::parse(m.extra);
    ds.provenance_hash = extra.value("provenance_hash", "");
  }
  if (m.has_array("shared_r0")) {
    out.has_ground_truth = true;
    LatentBundle& b = out.bundle;
    b.T = static_cast<int>(m.T);
    b.shared.resize(R);
    b.private_.resize(R);
    for (int r = 0; r < R; ++r) {
      auto sh = reader.read_trials("shared_r" + std::to_string(r));
      auto pr = reader.read_trials("private_r" + std::to_string(r));
      b.shared[r].resize(sh.size());
      b.private_[r].resize(pr.size());
      for (std::size_t i = 0; i < sh.size(); ++i) b.shared[r][i] = sh[i].cast<double>();
      for (std::size_t i = 0; i < pr.size(); ++i) b.private_[r][i] = pr[i].cast<double>();
    }
    b.d_shared = static_cast<int>(b.shared[0][0].cols());
    b.d_private = static_cast<int>(b.private_[0][0].cols());
    if (m.has_array("delay_profile"))
      b.delay_profile = reader.read_vector("delay_profile").cast<double>();
    if (!m.extra.empty()) {
      json extra = json::parse(m.extra);
      if (extra.contains("warp")) {
        b.warp.kind = warp_from_string(extra["warp"].value("kind", "none"));
        b.warp.params = extra["warp"].value("params", std::vector<double>{});
      }
    }
  }
  return out;
}

}  // namespace spire
