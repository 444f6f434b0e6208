#include <doctest.h>

#include <spire/losses.hpp>
#include <spire/model.hpp>

using namespace spire;

namespace {

ModelDims tiny_dims(bool bidir = false) {
  ModelDims d;
  d.regions = 2;
  d.channels = {3, 3};
  d.hidden = 4;
  d.d_sh = 2;
  d.d_pr = 2;
  d.conv_halfwidth = 1;
  d.dropout = 0.0;
  d.lag = 0;
  d.bidirectional = bidir;
  return d;
}

std::vector<Matd> random_inputs(const ModelDims& dims, int N, Rng& rng) {
  std::vector<Matd> x(dims.regions);
  for (int r = 0; r < dims.regions; ++r) {
    x[r].resize(dims.channels[r], N);
    for (int i = 0; i < x[r].size(); ++i) x[r].data()[i] = rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("lag_augment shapes and values") {
  Matf x(250, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(i);
  Matf a = lag_augment(x, 3);
  CHECK(a.rows() == 247);
  CHECK(a.cols() == 12);

  CHECK(lag_augment(x, 0) == x);

  Matf s(4, 1);
  s << 1, 2, 3, 4;
  Matf l = lag_augment(s, 1);
  REQUIRE(l.rows() == 3);
  REQUIRE(l.cols() == 2);
  CHECK(l(0, 0) == 1);
  CHECK(l(0, 1) == 2);
  CHECK(l(1, 0) == 2);
  CHECK(l(1, 1) == 3);
  CHECK(l(2, 0) == 3);
  CHECK(l(2, 1) == 4);

  // feature j*C+c at time t is channel c at time t+j
  Matf two(5, 2);
  for (int t = 0; t < 5; ++t) {
    two(t, 0) = static_cast<float>(10 + t);
    two(t, 1) = static_cast<float>(20 + t);
  }
  Matf aug = lag_augment(two, 2);
  CHECK(aug(1, 0) == 11);      // j=0, c=0 -> x(1,0)
  CHECK(aug(1, 2 * 1 + 1) == 22);  // j=1, c=1 -> x(2,1)
  CHECK(aug(0, 2 * 2 + 0) == 12);  // j=2, c=0 -> x(2,0)

  CHECK_THROWS_AS(lag_augment(s, 4), ShapeError);
}

TEST_CASE("gru forward matches a hand-rolled recurrence") {
  GruParams<double> p;
  const int H = 2, C = 1, T = 3;
  p.w_ih.resize(3 * H, C);
  p.w_ih << 0.5, -0.3, 0.2, 0.7, -0.4, 0.1;
  p.w_hh.resize(3 * H, H);
  p.w_hh << 0.1, 0.2, -0.1, 0.3, 0.2, -0.2, 0.4, 0.1, -0.3, 0.2, 0.1, 0.5;
  p.b_ih.resize(3 * H, 1);
  p.b_ih << 0.01, -0.02, 0.03, 0.0, 0.05, -0.01;
  p.b_hh.resize(3 * H, 1);
  p.b_hh << -0.03, 0.02, 0.0, 0.04, -0.05, 0.01;

  Mat<double> x(1, 3);
  x << 1.0, -0.5, 0.25;
  GruCache<double> cache;
  gru_forward(p, x, T, 1, cache);

  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  Vecd h = Vecd::Zero(H);
  for (int t = 0; t < T; ++t) {
    Vecd gx = p.w_ih * x.col(t) + p.b_ih;
    Vecd gh = p.w_hh * h + p.b_hh;
    Vecd r(H), z(H), n(H), hn(H);
    for (int i = 0; i < H; ++i) {
      r[i] = sigmoid(gx[i] + gh[i]);
      z[i] = sigmoid(gx[H + i] + gh[H + i]);
      n[i] = std::tanh(gx[2 * H + i] + r[i] * gh[2 * H + i]);
      hn[i] = (1 - z[i]) * n[i] + z[i] * h[i];
    }
    h = hn;
    for (int i = 0; i < H; ++i) CHECK(cache.h(i, t) == doctest::Approx(h[i]).epsilon(1e-12));
  }
}

TEST_CASE("encode: zero projection, determinism, shape errors") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 1);
  const int T = 6, B = 2, N = T * B;
  Rng rng(3);
  auto x = random_inputs(dims, N, rng);

  P.region[0].w_sh.setZero();
  ForwardCache<double> c1, c2;
  spire_forward(P, x, T, B, 1.0, false, Rng(0), c1);
  CHECK(c1.z_sh[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(c1.z_pr[0].cwiseAbs().maxCoeff() > 0.0);

  spire_forward(P, x, T, B, 1.0, false, Rng(99), c2);  // eval mode: rng irrelevant
  CHECK(c1.z_sh[1] == c2.z_sh[1]);
  CHECK(c1.full[1].x_hat == c2.full[1].x_hat);

  auto bad = x;
  bad[0] = Matd::Zero(5, N);
  CHECK_THROWS_AS(spire_forward(P, bad, T, B, 1.0, false, Rng(0), c1), ShapeError);
}

TEST_CASE("conv aligner: impulse identity, shifted impulse, scaled mapper") {
  const int d = 2, T = 7, B = 2;
  Rng rng(5);
  Matd z(d, T * B);
  for (int i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();

  Matd impulse = impulse_kernels<double>(d, 5);
  Matd out;
  detail::conv_align_forward(impulse, z, T, B, out);
  CHECK(out == z);  // impulse has no off-center mass, so identity everywhere

  Matd shifted = Matd::Zero(d, 5);
  shifted.col(3).setOnes();  // offset +1 from center
  detail::conv_align_forward(shifted, z, T, B, out);
  for (int t = 1; t < T; ++t)
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < d; ++j)
        CHECK(out(j, t * B + b) == doctest::Approx(z(j, (t - 1) * B + b)));
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < d; ++j) CHECK(out(j, b) == 0.0);  // zero padding at t = 0

  // doubling mapper doubles the output
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 1);
  P.pair[0].mapper = 2.0 * Matd::Identity(dims.d_sh, dims.d_sh);
  const int N = T * B;
  auto x = random_inputs(dims, N, rng);
  ForwardCache<double> c;
  spire_forward(P, x, T, B, 1.0, false, Rng(0), c);
  CHECK((c.z_tilde[0] - 2.0 * c.z_sh[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decode: gate semantics and zero fixed point") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 2);
  const int T = 5, B = 2, N = T * B;
  Rng rng(4);
  auto x = random_inputs(dims, N, rng);

  // alpha_p = 0 must equal an explicit zeroed private path: the self decode
  // uses the same shared latents with no private input
  ForwardCache<double> c;
  spire_forward(P, x, T, B, 0.0, false, Rng(0), c);
  CHECK(c.full[0].x_hat == c.self_[0].x_hat);
  CHECK(c.full[1].x_hat == c.self_[1].x_hat);

  // zero latents + zero biases -> zero output
  DecodePath<double> path;
  RegionParams<double>& rp = P.region[0];
  rp.dec_in_b.setZero();
  rp.dec.b_ih.setZero();
  rp.dec.b_hh.setZero();
  rp.b_out.setZero();
  Matd zsh = Matd::Zero(dims.d_sh, N), zpr = Matd::Zero(dims.d_pr, N);
  detail::decode_forward(rp, dims.d_sh, &zsh, &zpr, 1.0, T, B, path);
  CHECK(path.x_hat.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward bundles two full, self and cross paths for R=2") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 3);
  const int T = 6, B = 2;
  Rng rng(6);
  auto x = random_inputs(dims, T * B, rng);
  ForwardCache<double> c;
  spire_forward(P, x, T, B, 0.5, false, Rng(0), c);
  CHECK(c.full.size() == 2);
  CHECK(c.self_.size() == 2);
  CHECK(c.cross.size() == 2);
  CHECK(c.z_tilde.size() == 2);
  // identity-initialized aligners: z_tilde(0->1) equals z_sh(0)
  CHECK(c.z_tilde[0] == c.z_sh[0]);
  // every path preserves the time length
  CHECK(c.full[0].x_hat.cols() == T * B);
  CHECK(c.cross[1].x_hat.cols() == T * B);
}

TEST_CASE("init contracts: identity mappers, impulse kernels, seeded determinism") {
  ModelDims dims = tiny_dims();
  auto a = init_params<float>(dims, 42);
  auto b = init_params<float>(dims, 42);
  auto c = init_params<float>(dims, 43);
  for (auto [pa, pb] : {std::pair(&a.pair[0].mapper, &b.pair[0].mapper)}) CHECK(*pa == *pb);
  CHECK((a.pair[0].mapper - Matf::Identity(2, 2)).norm() == 0.0f);
  CHECK(convalign_reg_loss<float>(a.pair[0].kernels) == 0.0);
  CHECK(mapper_identity_loss<float>(a.pair[1].mapper) == 0.0);

  auto ra = param_refs(a), rb = param_refs(b), rc = param_refs(c);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (*ra[i].mat != *rb[i].mat) all_equal = false;
    if (*ra[i].mat != *rc[i].mat) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("dropout fires only in training mode and is seed-deterministic") {
  ModelDims dims = tiny_dims();
  dims.dropout = 0.4;
  auto P = init_params<double>(dims, 9);
  const int T = 6, B = 2;
  Rng rng(1);
  auto x = random_inputs(dims, T * B, rng);
  ForwardCache<double> eval1, eval2, tr1, tr2, tr3;
  spire_forward(P, x, T, B, 1.0, false, Rng(0), eval1);
  spire_forward(P, x, T, B, 1.0, false, Rng(1), eval2);
  CHECK(eval1.z_sh[0] == eval2.z_sh[0]);
  spire_forward(P, x, T, B, 1.0, true, Rng(5), tr1);
  spire_forward(P, x, T, B, 1.0, true, Rng(5), tr2);
  spire_forward(P, x, T, B, 1.0, true, Rng(6), tr3);
  CHECK(tr1.z_sh[0] == tr2.z_sh[0]);
  CHECK(tr1.z_sh[0] != tr3.z_sh[0]);
  CHECK(tr1.z_sh[0] != eval1.z_sh[0]);
}

TEST_CASE("bidirectional encoder doubles the feature width and stays deterministic") {
  ModelDims dims = tiny_dims(true);
  dims.validate();
  auto P = init_params<double>(dims, 11);
  CHECK(P.region[0].w_sh.cols() == 2 * dims.hidden);
  const int T = 6, B = 2;
  Rng rng(2);
  auto x = random_inputs(dims, T * B, rng);
  ForwardCache<double> c1, c2;
  spire_forward(P, x, T, B, 1.0, false, Rng(0), c1);
  spire_forward(P, x, T, B, 1.0, false, Rng(0), c2);
  CHECK(c1.full[0].x_hat == c2.full[0].x_hat);
  CHECK(c1.h_cat[0].rows() == 2 * dims.hidden);
}

TEST_CASE("model dims validation") {
  ModelDims d = tiny_dims();
  d.hidden = 1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = tiny_dims();
  d.dropout = 1.0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = tiny_dims();
  d.channels = {3};
  CHECK_THROWS_AS(d.validate(), ConfigError);
}
