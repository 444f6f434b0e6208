#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <spire/errors.hpp>
#include <spire/synthgen.hpp>

#include "oracles.hpp"

using namespace spire;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.n_trials = 10;
  c.T = 250;
  c.fs = 500;
  c.d_shared = 2;
  c.d_private = 2;
  c.regions = {{"region1", 2, 5}, {"region2", 2, 5}};
  c.seed = 11;
  return c;
}

bool bundles_equal(const LatentBundle& a, const LatentBundle& b) {
  if (a.regions() != b.regions() || a.trials() != b.trials()) return false;
  for (int r = 0; r < a.regions(); ++r)
    for (int i = 0; i < a.trials(); ++i)
      if (a.shared[r][i] != b.shared[r][i] || a.private_[r][i] != b.private_[r][i]) return false;
  return true;
}

}  // namespace

TEST_CASE("generate_latents shapes and determinism") {
  GeneratorConfig c;
  c.n_trials = 100;
  c.T = 250;
  c.d_shared = 3;
  c.d_private = 3;
  c.regions = {{"region1", 2, 5}, {"region2", 2, 5}};
  c.seed = 3;
  LatentBundle b = generate_latents(c);
  CHECK(b.regions() == 2);
  CHECK(b.trials() == 100);
  CHECK(b.shared[0][0].rows() == 250);
  CHECK(b.shared[0][0].cols() == 3);
  CHECK(b.private_[1][99].cols() == 3);
  // shared latents identical across regions before warp/delay
  CHECK(b.shared[0][17] == b.shared[1][17]);
  CHECK(b.private_[0][17] != b.private_[1][17]);
  CHECK(bundles_equal(b, generate_latents(c)));
}

TEST_CASE("generate_latents rejects bad configs by field") {
  GeneratorConfig c = small_config();
  c.n_trials = 0;
  CHECK_THROWS_WITH_AS(generate_latents(c), doctest::Contains("n_trials"), ConfigError);
  c = small_config();
  c.latent_dynamics.ar_rho = 1.0;
  CHECK_THROWS_WITH_AS(generate_latents(c), doctest::Contains("ar_rho"), ConfigError);
  c = small_config();
  c.delay.amplitude_samples = 70;  // >= T/4
  CHECK_THROWS_WITH_AS(generate_latents(c), doctest::Contains("T/4"), ConfigError);
  c = small_config();
  c.regions[0].contacts_per_row = 1;
  CHECK_THROWS_WITH_AS(generate_latents(c), doctest::Contains("contacts_per_row"), ConfigError);
}

TEST_CASE("pure sinusoid has cosine lag-1 autocorrelation") {
  GeneratorConfig c = small_config();
  c.latent_dynamics.base_freq_lo = c.latent_dynamics.base_freq_hi = 6.0;
  c.latent_dynamics.burst_prob = 0;
  c.latent_dynamics.jump_prob = 0;
  c.latent_dynamics.ar_std = 0;
  LatentBundle b = generate_latents(c);
  const double expected = std::cos(2.0 * M_PI * 6.0 / c.fs);
  for (int i = 0; i < 5; ++i) {
    Vecd x = b.shared[0][i].col(0);
    CHECK(oracle::sample_autocorr(x, 1) == doctest::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("pure AR(1) latents recover rho") {
  GeneratorConfig c = small_config();
  c.n_trials = 100;
  c.latent_dynamics.osc_amplitude = 0;
  c.latent_dynamics.burst_prob = 0;
  c.latent_dynamics.jump_prob = 0;
  c.latent_dynamics.ar_rho = 0.9;
  c.latent_dynamics.ar_std = 1.0;
  LatentBundle b = generate_latents(c);
  double acc = 0;
  for (int i = 0; i < c.n_trials; ++i) acc += oracle::sample_autocorr(b.shared[0][i].col(0), 1);
  acc /= c.n_trials;
  CHECK(acc == doctest::Approx(0.9).epsilon(0.056));  // +-0.05 absolute
  CHECK(std::abs(acc - 0.9) < 0.05);
}

TEST_CASE("warp: none is identity, monotone preserves ranks, cubic matches hand values") {
  GeneratorConfig c = small_config();
  LatentBundle b = generate_latents(c);
  LatentBundle b0 = b;
  apply_region_warp(b0, WarpKind::none, Rng(5));
  CHECK(bundles_equal(b, b0));

  LatentBundle bm = b;
  apply_region_warp(bm, WarpKind::monotone, Rng(5));
  for (int j = 0; j < c.d_shared; ++j) {
    CHECK(bm.shared[0][0].col(j) == b.shared[0][0].col(j));  // region 0 untouched
    CHECK(oracle::spearman(b.shared[1][0].col(j), bm.shared[1][0].col(j)) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(bm.warp.kind == WarpKind::monotone);
  CHECK(bm.warp.params.size() == static_cast<std::size_t>(c.d_shared));

  // cubic g(z) = z + 0.3 z^3 on [-1, 0, 1] -> [-1.3, 0, 1.3]
  LatentBundle tiny;
  tiny.T = 3;
  tiny.d_shared = 1;
  tiny.d_private = 1;
  Matd z(3, 1);
  z << -1, 0, 1;
  tiny.shared = {{z}, {z}};
  tiny.private_ = {{Matd::Zero(3, 1)}, {Matd::Zero(3, 1)}};
  apply_region_warp(tiny, WarpKind::cubic, Rng(0), 0.3);
  CHECK(tiny.shared[1][0](0, 0) == doctest::Approx(-1.3));
  CHECK(tiny.shared[1][0](1, 0) == doctest::Approx(0.0));
  CHECK(tiny.shared[1][0](2, 0) == doctest::Approx(1.3));
  CHECK(tiny.shared[0][0] == z);
}

TEST_CASE("delay: zero amplitude is identity, constant integer lag shifts exactly") {
  GeneratorConfig c = small_config();
  LatentBundle b = generate_latents(c);
  LatentBundle b0 = b;
  apply_time_varying_delay(b0, 0.0, 250.0);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < b.trials(); ++i) CHECK(b0.shared[r][i] == b.shared[r][i]);
  CHECK(b0.delay_profile.has_value());

  // ramp signal, constant lag 2: out[t] = in[t-2] for t >= 2
  LatentBundle ramp;
  ramp.T = 10;
  ramp.d_shared = 1;
  ramp.d_private = 1;
  Matd z(10, 1);
  for (int t = 0; t < 10; ++t) z(t, 0) = t;
  ramp.shared = {{z}, {z}};
  ramp.private_ = {{Matd::Zero(10, 1)}, {Matd::Zero(10, 1)}};
  apply_delay_profile(ramp, Vecd::Constant(10, 2.0));
  for (int t = 2; t < 10; ++t) CHECK(ramp.shared[1][0](t, 0) == doctest::Approx(t - 2));
  CHECK(ramp.shared[1][0](0, 0) == doctest::Approx(0));  // clamped at the edge
}

TEST_CASE("D2 sinusoidal delay is recoverable by windowed cross-correlation") {
  GeneratorConfig c = small_config();
  c.n_trials = 30;
  c.latent_dynamics.base_freq_lo = 4;
  c.latent_dynamics.base_freq_hi = 12;
  c.latent_dynamics.ar_rho = 0.8;
  c.latent_dynamics.ar_std = 0.5;
  LatentBundle b = generate_latents(c);
  apply_time_varying_delay(b, 3.0, 250.0);
  REQUIRE(b.delay_profile.has_value());
  CHECK(b.delay_profile->cwiseAbs().maxCoeff() == doctest::Approx(3.0).epsilon(0.01));

  // average estimated lag around the profile's positive peak (t ~ 62)
  double est = 0;
  int count = 0;
  for (int i = 0; i < b.trials(); ++i) {
    for (int j = 0; j < c.d_shared; ++j) {
      est += oracle::window_lag(b.shared[0][i].col(j), b.shared[1][i].col(j), 47, 78, 6);
      ++count;
    }
  }
  est /= count;
  CHECK(est > 2.0);
  CHECK(est < 4.0);
}

TEST_CASE("linear mixing is exactly identifiable from latents") {
  GeneratorConfig c = small_config();
  LatentBundle b = generate_latents(c);
  auto signals = mix_to_observations(b, c.regions, c.mixing, Rng(77));
  const int T = c.T, n = b.trials();
  Matd z(n * T, c.d_shared + c.d_private), y(n * T, c.regions[0].contacts());
  for (int i = 0; i < n; ++i) {
    z.middleRows(i * T, T) << b.shared[0][i], b.private_[0][i];
    y.middleRows(i * T, T) = signals[0][i];
  }
  CHECK(oracle::ridge_fve_insample(z, y, 1e-10) >= 1.0 - 1e-6);
}

TEST_CASE("unit kernel with one latent and one contact reproduces the latent") {
  MixingKernels k;
  k.spatial = Matd::Ones(1, 1);
  MixingConfig mix;
  Matd sh(5, 1);
  sh << 1, -2, 0.5, 3, -1;
  Matd pr(5, 0);
  Matd y = apply_mixing(sh, pr, k, mix);
  CHECK(y == sh);
}

TEST_CASE("bilinear mixing injects the latent product term") {
  // one contact, known kernels: y = z0 + 0.7 z1 + 0.5 z0 z1
  MixingKernels k;
  k.spatial = Matd(1, 2);
  k.spatial << 1.0, 0.7;
  k.pairs = {{0, 1}};
  k.bilinear = Matd(1, 1);
  k.bilinear << 0.5;
  MixingConfig mix;
  mix.bilinear = true;

  Rng rng(4);
  const int n = 5000;
  Matd z(n, 2);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    z(i, 1) = rng.normal();
  }
  Matd y = apply_mixing(z.leftCols(1), z.rightCols(1), k, mix);

  // residual after the linear fit should be the product component
  Matd w = (z.transpose() * z).ldlt().solve(z.transpose() * y);
  Vecd resid = y - z * w;
  Vecd prod = z.col(0).cwiseProduct(z.col(1));
  CHECK(oracle::pearson(resid, prod) > 0.99);
  double slope = resid.dot(prod) / prod.squaredNorm();
  CHECK(slope == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("noise: zero scales leave signals unchanged") {
  GeneratorConfig c = small_config();
  LatentBundle b = generate_latents(c);
  auto signals = mix_to_observations(b, c.regions, c.mixing, Rng(77));
  auto copy = signals;
  add_structured_noise(signals, b, c.regions, NoiseConfig{}, Rng(5));
  for (std::size_t r = 0; r < signals.size(); ++r)
    for (std::size_t i = 0; i < signals[r].size(); ++i) CHECK(signals[r][i] == copy[r][i]);

  NoiseConfig neg;
  neg.hetero = -1;
  CHECK_THROWS_AS(add_structured_noise(signals, b, c.regions, neg, Rng(5)), ConfigError);
}

TEST_CASE("pure 1/f noise has log-log PSD slope near -1") {
  GeneratorConfig c = small_config();
  c.n_trials = 50;
  c.regions = {{"region1", 1, 2}};
  LatentBundle b = generate_latents(c);
  std::vector<std::vector<Matd>> zeros(1);
  for (int i = 0; i < c.n_trials; ++i) zeros[0].push_back(Matd::Zero(c.T, 2));
  NoiseConfig noise;
  noise.one_over_f = 1.0;
  add_structured_noise(zeros, b, c.regions, noise, Rng(5));
  std::vector<Vecd> series;
  for (int i = 0; i < c.n_trials; ++i) series.push_back(zeros[0][i].col(0));
  double slope = oracle::psd_slope(series, c.fs, 2.0, 100.0);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.3));
  CHECK(slope > -1.3);
  CHECK(slope < -0.7);
}

TEST_CASE("rank-1 common mode dominates the first principal component") {
  GeneratorConfig c = small_config();
  c.n_trials = 20;
  LatentBundle b = generate_latents(c);
  std::vector<std::vector<Matd>> zeros(2);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < c.n_trials; ++i) zeros[r].push_back(Matd::Zero(c.T, 10));
  NoiseConfig noise;
  noise.common_mode_rank = 1;
  noise.common_mode = 10.0;
  noise.gaussian_floor = 0.1;
  add_structured_noise(zeros, b, c.regions, noise, Rng(5));
  Matd pooled(c.n_trials * c.T, 10);
  for (int i = 0; i < c.n_trials; ++i) pooled.middleRows(i * c.T, c.T) = zeros[0][i];
  CHECK(oracle::pca_first_ratio(pooled) > 0.9);
}

TEST_CASE("bipolar derivation: definition, shape, and exact common-mode rejection") {
  ElectrodeGeometry geom{"g", 1, 3};
  Matd x(2, 3);
  x << 1, 2, 4, 0.5, -1, 3;
  Matd y = bipolar_rereference(x, geom);
  REQUIRE(y.cols() == 2);
  CHECK(y(0, 0) == doctest::Approx(-1));
  CHECK(y(0, 1) == doctest::Approx(-2));
  CHECK(y(1, 0) == doctest::Approx(1.5));
  CHECK(y(1, 1) == doctest::Approx(-4));

  ElectrodeGeometry bad{"g", 1, 1};
  CHECK_THROWS_AS(bipolar_rereference(Matd::Zero(2, 1), bad), Error);

  // exact rejection: float-quantized signals plus a float-quantized common
  // series; see the generator's noise pipeline for the same discipline
  ElectrodeGeometry g2{"g", 2, 4};
  Rng rng(8);
  const int T = 100;
  Matd sig(T, 8);
  for (int i = 0; i < sig.size(); ++i)
    sig.data()[i] = static_cast<double>(static_cast<float>(rng.normal()));
  Matd withc = sig;
  for (int row = 0; row < 2; ++row) {
    for (int t = 0; t < T; ++t) {
      double v = static_cast<double>(static_cast<float>(3.0 * rng.normal()));
      for (int j = 0; j < 4; ++j) withc(t, row * 4 + j) += v;
    }
  }
  Matd clean = bipolar_rereference(sig, g2);
  Matd common = bipolar_rereference(withc, g2);
  CHECK(clean == common);  // bitwise
}

TEST_CASE("row drift is cancelled bit-exactly by bipolar rereferencing") {
  GeneratorConfig with_drift = preset_config(PresetId::D1, 12);
  GeneratorConfig no_drift = with_drift;
  no_drift.noise.row_drift = 0.0;
  with_drift.n_trials = no_drift.n_trials = 8;
  auto [a, ba] = generate_dataset(with_drift);
  auto [b, bb] = generate_dataset(no_drift);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 8; ++i) CHECK(a.observations[r][i] == b.observations[r][i]);
}

TEST_CASE("presets: determinism, shapes, provenance") {
  auto [d1, b1] = generate_preset(PresetId::D0, 0);
  auto [d2, b2] = generate_preset(PresetId::D0, 0);
  CHECK(d1.provenance_hash == d2.provenance_hash);
  CHECK(d1.n_trials() == 100);
  CHECK(d1.T() == 250);
  CHECK(d1.fs == 500.0);
  CHECK(d1.n_regions() == 2);
  CHECK(d1.channels(0) == 8);  // 2 rows x (5-1)
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 100; ++i) CHECK(d1.observations[r][i] == d2.observations[r][i]);

  auto [dd2, bd2] = generate_preset(PresetId::D2, 0);
  REQUIRE(bd2.delay_profile.has_value());
  CHECK(bd2.delay_profile->cwiseAbs().maxCoeff() == doctest::Approx(3.0).epsilon(0.01));
  CHECK(bd2.warp.kind == WarpKind::monotone);

  CHECK_THROWS_AS(preset_from_string("D7"), ConfigError);
}

TEST_CASE("D0 ground-truth latents explain the observations") {
  auto [data, bundle] = generate_preset(PresetId::D0, 1);
  const int T = data.T(), n = 20;  // a subset is plenty
  for (int r = 0; r < 2; ++r) {
    Matd z(n * T, 6), y(n * T, data.channels(r));
    for (int i = 0; i < n; ++i) {
      z.middleRows(i * T, T) << bundle.shared[r][i], bundle.private_[r][i];
      y.middleRows(i * T, T) = data.observations[r][i].cast<double>();
    }
    CHECK(oracle::ridge_fve_insample(z, y, 1e-8) >= 0.95);
  }
}

TEST_CASE("dataset container round trip") {
  GeneratorConfig c = small_config();
  c.delay.amplitude_samples = 2;
  auto [data, bundle] = generate_dataset(c);
  std::string dir = (fs::temp_directory_path() /
                     ("spire_ds_" + std::to_string(::getpid())))
                        .string();
  fs::remove_all(dir);
  save_dataset(dir, data, bundle, c, "custom");
  LoadedDataset loaded = load_dataset(dir);
  CHECK(loaded.data.n_trials() == data.n_trials());
  CHECK(loaded.data.fs == data.fs);
  CHECK(loaded.data.provenance_hash == data.provenance_hash);
  CHECK(loaded.has_ground_truth);
  CHECK(loaded.data.observations[1][3] == data.observations[1][3]);
  // ground truth persists at float precision
  CHECK(loaded.bundle.shared[1][2] == bundle.shared[1][2].cast<float>().cast<double>());
  REQUIRE(loaded.bundle.delay_profile.has_value());
  fs::remove_all(dir);
}

TEST_CASE("trial generation is order-independent (parallel-safe substreams)") {
  GeneratorConfig c = small_config();
  LatentBundle full = generate_latents(c);
  GeneratorConfig first = c;
  first.n_trials = 3;
  LatentBundle head = generate_latents(first);
  for (int i = 0; i < 3; ++i) {
    CHECK(full.shared[0][i] == head.shared[0][i]);
    CHECK(full.private_[1][i] == head.private_[1][i]);
  }
}
