#pragma once

#include "spire/errors.hpp"
#include "spire/mat.hpp"
#include "spire/rng.hpp"

namespace spire {

// Single-layer GRU over channel-by-(time*batch) sequences, gates stacked
// [reset; update; candidate], reset applied to the recurrent candidate term.
// Input projections for all timesteps run as one GEMM; the recurrence keeps
// one (3H x H) x (H x B) product per step.

template <typename S>
struct GruParams {
  Mat<S> w_ih;  // (3H x C)
  Mat<S> w_hh;  // (3H x H)
  Mat<S> b_ih;  // (3H x 1)
  Mat<S> b_hh;  // (3H x 1)

  int hidden() const { return static_cast<int>(w_hh.cols()); }
  int input() const { return static_cast<int>(w_ih.cols()); }

  void init(int input, int hidden, Rng& rng) {
    const S k = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hidden)));
    auto fill = [&](Mat<S>& m, Eigen::Index r, Eigen::Index c) {
      m.resize(r, c);
      for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<S>(rng.uniform(-k, k));
    };
    fill(w_ih, 3 * hidden, input);
    fill(w_hh, 3 * hidden, hidden);
    fill(b_ih, 3 * hidden, 1);
    fill(b_hh, 3 * hidden, 1);
  }
};

template <typename S>
struct GruCache {
  Mat<S> h;      // (H x T*B) hidden states
  Mat<S> gates;  // (3H x T*B) post-activation r, z, n
  Mat<S> n_rec;  // (H x T*B) recurrent candidate pre-gating: U_n h_prev + b_n
};

template <typename S>
void gru_forward(const GruParams<S>& p, const Mat<S>& x, int T, int B, GruCache<S>& c) {
  const int H = p.hidden();
  const int N = T * B;
  check_shape(x.rows() == p.input() && x.cols() == N, "gru_forward: input shape mismatch");
  c.h.resize(H, N);
  c.gates.resize(3 * H, N);
  c.n_rec.resize(H, N);

  Mat<S> gx = p.w_ih * x;
  gx.colwise() += p.b_ih.col(0);

  Mat<S> h_prev = Mat<S>::Zero(H, B);
  Mat<S> gh(3 * H, B);
  for (int t = 0; t < T; ++t) {
    const int o = t * B;
    gh.noalias() = p.w_hh * h_prev;
    gh.colwise() += p.b_hh.col(0);
    auto r = c.gates.block(0, o, H, B);
    auto z = c.gates.block(H, o, H, B);
    auto n = c.gates.block(2 * H, o, H, B);
    r = ((gx.block(0, o, H, B) + gh.topRows(H)).array() * S(-1)).exp();
    r = (S(1) + r.array()).inverse();
    z = ((gx.block(H, o, H, B) + gh.middleRows(H, H)).array() * S(-1)).exp();
    z = (S(1) + z.array()).inverse();
    c.n_rec.middleCols(o, B) = gh.bottomRows(H);
    n = (gx.block(2 * H, o, H, B).array() +
         r.array() * c.n_rec.middleCols(o, B).array())
            .tanh();
    c.h.middleCols(o, B) =
        ((S(1) - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
    h_prev = c.h.middleCols(o, B);
  }
}

// dh: gradient w.r.t. every hidden state (H x T*B). Accumulates parameter
// gradients into g (a same-shaped GruParams used as an accumulator); writes
// input gradients into dx when non-null.
template <typename S>
void gru_backward(const GruParams<S>& p, const Mat<S>& x, int T, int B, const GruCache<S>& c,
                  const Mat<S>& dh_out, GruParams<S>& g, Mat<S>* dx) {
  const int H = p.hidden();
  const int N = T * B;
  check_shape(dh_out.rows() == H && dh_out.cols() == N, "gru_backward: dh shape mismatch");

  Mat<S> dgx(3 * H, N);
  Mat<S> dgh(3 * H, B);
  Mat<S> carry = Mat<S>::Zero(H, B);
  Mat<S> dh(H, B), dz(H, B), dn_pre(H, B), dm(H, B);

  for (int t = T - 1; t >= 0; --t) {
    const int o = t * B;
    dh = dh_out.middleCols(o, B) + carry;
    auto r = c.gates.block(0, o, H, B).array();
    auto z = c.gates.block(H, o, H, B).array();
    auto n = c.gates.block(2 * H, o, H, B).array();
    auto m = c.n_rec.middleCols(o, B).array();

    if (t > 0) {
      auto h_prev = c.h.middleCols(o - B, B).array();
      dz = (dh.array() * (h_prev - n)).matrix();
      carry = (dh.array() * z).matrix();
    } else {
      dz = (dh.array() * (-n)).matrix();
      carry.setZero();
    }
    dn_pre = (dh.array() * (S(1) - z) * (S(1) - n * n)).matrix();
    dm = (dn_pre.array() * r).matrix();
    // d(reset) via the gated recurrent candidate, then sigmoid/logistic slopes.
    dgh.topRows(H) = (dn_pre.array() * m * r * (S(1) - r)).matrix();
    dgh.middleRows(H, H) = (dz.array() * z * (S(1) - z)).matrix();
    dgh.bottomRows(H) = dm;

    dgx.block(0, o, H, B) = dgh.topRows(H);
    dgx.block(H, o, H, B) = dgh.middleRows(H, H);
    dgx.block(2 * H, o, H, B) = dn_pre;

    if (t > 0) {
      g.w_hh.noalias() += dgh * c.h.middleCols(o - B, B).transpose();
      carry.noalias() += p.w_hh.transpose() * dgh;
    }
    // t == 0: h_prev is zero, so no w_hh/carry contribution.
    g.b_hh.col(0) += dgh.rowwise().sum();
  }
  g.w_ih.noalias() += dgx * x.transpose();
  g.b_ih.col(0) += dgx.rowwise().sum();
  if (dx) {
    dx->resize(p.input(), N);
    dx->noalias() = p.w_ih.transpose() * dgx;
  }
}

}  // namespace spire
