#include <doctest.h>

#include <spire/losses.hpp>
#include <spire/model.hpp>
#include <spire/schedule.hpp>

#include "oracles.hpp"

using namespace spire;

namespace {

Matd random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Matd m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

ModelDims tiny_dims() {
  ModelDims d;
  d.regions = 2;
  d.channels = {3, 3};
  d.hidden = 4;
  d.d_sh = 2;
  d.d_pr = 2;
  d.conv_halfwidth = 1;
  d.dropout = 0.0;
  d.lag = 0;
  return d;
}

}  // namespace

TEST_CASE("recon loss: fixed points and oracle equivalence") {
  Rng rng(1);
  Matd x = random_mat(4, 6, rng);
  CHECK(mse_loss<double>(x, x) == 0.0);

  Matd zero = Matd::Zero(3, 5), one = Matd::Ones(3, 5);
  CHECK(mse_loss<double>(zero, one) == doctest::Approx(1.0));

  for (int i = 0; i < 100; ++i) {
    Matd a = random_mat(2, 12, rng), b = random_mat(2, 12, rng);
    CHECK(rel_err(mse_loss<double>(a, b), oracle::mse(a, b)) < 1e-6);
  }
}

TEST_CASE("vicreg: fixed points and oracle equivalence") {
  LossWeights<double> W;

  // identical inputs with per-feature std >= 1 and diagonal covariance
  Matd z(2, 4);
  z << 1.5, -1.5, 1.5, -1.5, 1.5, 1.5, -1.5, -1.5;
  CHECK(vicreg_align_loss<double>(z, z, W) == doctest::Approx(0.0).epsilon(1e-9));

  // constant shift: with pure invariance coefficients the value is c^2
  LossWeights<double> Winv = W;
  Winv.vic_inv = 1;
  Winv.vic_var = 0;
  Winv.vic_cov = 0;
  Matd shifted = z.array() + 3.0;
  CHECK(vicreg_align_loss<double>(z, shifted, Winv) == doctest::Approx(9.0));

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Matd a = random_mat(3, 8, rng), b = random_mat(3, 8, rng, 0.7);
    double got = vicreg_align_loss<double>(a, b, W);
    double want = oracle::vicreg(a, b, W.vic_inv, W.vic_var, W.vic_cov, W.vic_gamma, W.vic_eps);
    CHECK(rel_err(got, want) < 1e-6);
  }

  Matd tiny = random_mat(2, 1, rng);
  CHECK_THROWS_AS(vicreg_align_loss<double>(tiny, tiny, W), ShapeError);
}

TEST_CASE("orthogonality: null, duplicated, exact two-sample cases, oracle") {
  Rng rng(3);
  // independent standard normals: loss ~ d_sh*d_pr/N
  Matd a = random_mat(3, 10000, rng), b = random_mat(3, 10000, rng);
  CHECK(orthogonality_loss<double>(a, b) < 0.01);

  // z_pr equal to z_sh: correlation matrix is the identity, loss ~ d
  Matd c = random_mat(3, 500, rng);
  CHECK(orthogonality_loss<double>(c, c) == doctest::Approx(3.0).epsilon(0.05));

  // N=2 with an exact affine copy per feature: every correlation is +-1
  Matd s(2, 2), p(2, 2);
  s << 0.0, 1.0, 5.0, -1.0;
  p << 2.0, 4.0, 1.0, 7.0;  // affine images of the rows of s
  CHECK(orthogonality_loss<double>(s, p) == doctest::Approx(4.0).epsilon(1e-12));

  for (int i = 0; i < 100; ++i) {
    Matd zs = random_mat(2, 9, rng), zp = random_mat(3, 9, rng);
    CHECK(rel_err(orthogonality_loss<double>(zs, zp), oracle::orthogonality(zs, zp)) < 1e-6);
  }
}

TEST_CASE("orthogonality is invariant to per-feature positive affine maps") {
  Rng rng(4);
  Matd zs = random_mat(3, 40, rng), zp = random_mat(2, 40, rng);
  double base = orthogonality_loss<double>(zs, zp);
  Matd zs2 = zs, zp2 = zp;
  for (int j = 0; j < 3; ++j) zs2.row(j) = 3.7 * zs.row(j).array() + 11.0;
  for (int j = 0; j < 2; ++j) zp2.row(j) = 0.02 * zp.row(j).array() - 5.0;
  CHECK(rel_err(orthogonality_loss<double>(zs2, zp2), base) < 1e-9);
}

TEST_CASE("variance guards: fixed points and oracle equivalence") {
  Rng rng(5);
  // exactly unit unbiased std -> zero shared guard
  Matd z = random_mat(3, 20, rng);
  for (int j = 0; j < 3; ++j) {
    double mu = z.row(j).mean();
    double sd = std::sqrt((z.row(j).array() - mu).square().sum() / 19.0);
    z.row(j) /= sd;
  }
  CHECK(variance_guard_shared<double>(z) < 1e-24);

  // private feature above the floor contributes nothing
  Matd above = 0.25 * random_mat(1, 50, rng);  // std ~ 0.25 > tau = 0.1
  CHECK(variance_guard_private<double>(above, 0.1) == 0.0);

  // constant private feature with tau = 0.1 contributes 0.01
  Matd flat = Matd::Constant(1, 10, 2.0);
  CHECK(variance_guard_private<double>(flat, 0.1) == doctest::Approx(0.01));

  for (int i = 0; i < 100; ++i) {
    Matd m = random_mat(3, 7, rng, 0.5);
    CHECK(rel_err(variance_guard_shared<double>(m), oracle::var_guard_shared(m)) < 1e-6);
    CHECK(rel_err(variance_guard_private<double>(m, 0.6) + 1.0,
                  oracle::var_guard_private(m, 0.6) + 1.0) < 1e-6);
  }
}

TEST_CASE("mapper identity penalty") {
  Matd eye = Matd::Identity(3, 3);
  CHECK(mapper_identity_loss<double>(eye) == 0.0);
  Matd bumped = eye;
  bumped(0, 2) += 0.1;
  CHECK(mapper_identity_loss<double>(bumped) == doctest::Approx(0.01));
  CHECK_THROWS_AS(mapper_identity_loss<double>(Matd::Zero(2, 3)), ShapeError);

  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    Matd m = random_mat(3, 3, rng);
    CHECK(rel_err(mapper_identity_loss<double>(m), oracle::mapper_identity(m)) < 1e-6);
  }
}

TEST_CASE("aligner kernel regularizer") {
  Matd imp = impulse_kernels<double>(2, 9);
  CHECK(convalign_reg_loss<double>(imp) == 0.0);

  Matd uniform = Matd::Constant(1, 9, 1.0 / 9.0);
  CHECK(convalign_reg_loss<double>(uniform) == doctest::Approx(8.0 / 9.0));

  Matd twice = 2.0 * impulse_kernels<double>(1, 9);
  CHECK(convalign_reg_loss<double>(twice) == doctest::Approx(2.0));

  CHECK_THROWS_AS(convalign_reg_loss<double>(Matd::Zero(1, 4)), ShapeError);

  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    Matd k = random_mat(2, 5, rng);
    CHECK(rel_err(convalign_reg_loss<double>(k), oracle::convalign_reg(k)) < 1e-6);
  }
}

TEST_CASE("total loss: weighting, additivity, skip semantics") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 7);
  Rng rng(8);
  const int T = 6, B = 2, N = T * B;
  std::vector<Matd> x(2);
  for (int r = 0; r < 2; ++r) x[r] = random_mat(3, N, rng);
  ForwardCache<double> c;
  spire_forward(P, x, T, B, 0.5, false, Rng(0), c);

  LossWeights<double> only_rec;
  only_rec.rec = 1;
  LossBreakdown b1 = total_loss<double>(P, x, c, only_rec);
  CHECK(b1.total == doctest::Approx(b1.rec));
  CHECK(b1.align == 0.0);

  LossWeights<double> full = cast_weights<double>(synthetic_schedule().phases[0]);
  LossBreakdown bf = total_loss<double>(P, x, c, full);
  double weighted = full.rec * bf.rec + full.cross * bf.cross + full.self * bf.self +
                    full.align * bf.align + full.orth * bf.orth + full.mapid * bf.mapid +
                    full.align_reg * bf.align_reg + full.var_sh * bf.var_sh +
                    full.var_pr * bf.var_pr;
  CHECK(rel_err(bf.total, weighted) < 1e-12);

  LossWeights<double> doubled = full;
  doubled.rec *= 2;
  doubled.cross *= 2;
  doubled.self *= 2;
  doubled.align *= 2;
  doubled.orth *= 2;
  doubled.mapid *= 2;
  doubled.align_reg *= 2;
  doubled.var_sh *= 2;
  doubled.var_pr *= 2;
  CHECK(rel_err(total_loss<double>(P, x, c, doubled).total, 2.0 * bf.total) < 1e-12);

  // zero-weight terms are truly skipped: poisoned tensors do not propagate
  ForwardCache<double> poisoned = c;
  poisoned.z_tilde[0].setConstant(std::numeric_limits<double>::quiet_NaN());
  poisoned.cross[0].x_hat.setConstant(std::numeric_limits<double>::quiet_NaN());
  LossWeights<double> no_align = full;
  no_align.align = 0;
  no_align.cross = 0;
  LossBreakdown bp = total_loss<double>(P, x, poisoned, no_align);
  CHECK(bp.finite());

  // Table A.1 post-phase weights are reproduced exactly
  const LossWeights<double>& post = synthetic_schedule().phases[2];
  CHECK(post.rec == 1.00);
  CHECK(post.align == 0.08);
  CHECK(post.cross == 0.07);
  CHECK(post.self == 0.03);
  CHECK(post.orth == 0.025);
  CHECK(post.mapid == 0.000);
  CHECK(post.align_reg == 1e-4);
  CHECK(post.var_sh == 0.005);
  CHECK(post.var_pr == 0.002);
}

TEST_CASE("cross/self reconstruction terms match the oracle on real forward outputs") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 17);
  Rng rng(9);
  const int T = 5, B = 2, N = T * B;
  std::vector<Matd> x(2);
  for (int r = 0; r < 2; ++r) x[r] = random_mat(3, N, rng);
  ForwardCache<double> c;
  spire_forward(P, x, T, B, 1.0, false, Rng(0), c);

  auto [lc, ls] = cross_self_recon_loss<double>(x, c, 2);
  double want_cross = oracle::mse(x[1], c.cross[0].x_hat) + oracle::mse(x[0], c.cross[1].x_hat);
  double want_self = oracle::mse(x[0], c.self_[0].x_hat) + oracle::mse(x[1], c.self_[1].x_hat);
  CHECK(rel_err(lc, want_cross) < 1e-9);
  CHECK(rel_err(ls, want_self) < 1e-9);

  // perfect cross reconstruction drives the term to zero
  ForwardCache<double> perfect = c;
  perfect.cross[0].x_hat = x[1];
  perfect.cross[1].x_hat = x[0];
  CHECK(cross_self_recon_loss<double>(x, perfect, 2).first == 0.0);
}

TEST_CASE("every term is non-negative on random inputs") {
  ModelDims dims = tiny_dims();
  auto P = init_params<double>(dims, 23);
  Rng rng(10);
  LossWeights<double> W = cast_weights<double>(synthetic_schedule().phases[1]);
  for (int i = 0; i < 20; ++i) {
    const int T = 4 + static_cast<int>(rng.uniform_int(4));
    const int B = 2;
    std::vector<Matd> x(2);
    for (int r = 0; r < 2; ++r) x[r] = random_mat(3, T * B, rng, 2.0);
    ForwardCache<double> c;
    spire_forward(P, x, T, B, 0.7, false, Rng(0), c);
    LossBreakdown b = total_loss<double>(P, x, c, W);
    for (std::size_t t = 0; t < 9; ++t) CHECK(b.term(t) >= 0.0);
  }
}
