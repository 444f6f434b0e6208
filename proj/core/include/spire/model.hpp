#pragma once

#include <string>
#include <vector>

#include "spire/gru.hpp"
#include "spire/mat.hpp"
#include "spire/rng.hpp"

namespace spire {

// ---------------------------------------------------------------------------
// Dual-latent sequence autoencoder: per-region GRU encoders project into
// shared and private latent sequences; depthwise temporal aligners plus
// linear mappers carry shared latents across regions; per-region GRU decoders
// reconstruct from (gated) latents. All forward state needed by the losses
// and the hand-rolled backward pass lives in ForwardCache.
// ---------------------------------------------------------------------------

struct ModelDims {
  int regions = 2;
  std::vector<int> channels;  // per region, after lag augmentation
  int hidden = 64;
  int d_sh = 3;
  int d_pr = 3;
  int conv_halfwidth = 4;  // aligner kernel length 2K+1
  double dropout = 0.3;
  int lag = 3;  // input lag augmentation applied at data prep
  bool bidirectional = false;

  int enc_out() const { return bidirectional ? 2 * hidden : hidden; }
  int kernel_len() const { return 2 * conv_halfwidth + 1; }

  void validate() const {
    check_config(regions >= 1, "model dims: regions must be >= 1");
    check_config(static_cast<int>(channels.size()) == regions,
                 "model dims: channels must list one entry per region");
    for (int c : channels) check_config(c >= 1, "model dims: channels must be >= 1");
    check_config(d_sh >= 1 && d_pr >= 1, "model dims: latent dims must be >= 1");
    check_config(hidden >= std::max(d_sh, d_pr), "model dims: hidden must be >= max(d_sh, d_pr)");
    check_config(conv_halfwidth >= 0, "model dims: conv_halfwidth must be >= 0");
    check_config(dropout >= 0.0 && dropout < 1.0, "model dims: dropout must be in [0, 1)");
    check_config(lag >= 0, "model dims: lag must be >= 0");
  }
};

inline std::vector<std::pair<int, int>> ordered_pairs(int regions) {
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s < regions; ++s)
    for (int r = 0; r < regions; ++r)
      if (r != s) out.emplace_back(s, r);
  return out;
}

template <typename S>
struct RegionParams {
  GruParams<S> enc_fw, enc_bw;  // enc_bw used only when bidirectional
  Mat<S> w_sh, w_pr;            // (d x enc_out), no bias
  Mat<S> dec_in, dec_in_b;      // (hidden x d_sh+d_pr), (hidden x 1)
  GruParams<S> dec;
  Mat<S> w_out, b_out;  // (C x hidden), (C x 1)
};

template <typename S>
struct PairParams {
  Mat<S> kernels;  // (d_sh x 2K+1) depthwise temporal filters
  Mat<S> mapper;   // (d_sh x d_sh)
};

template <typename S>
struct SpireParams {
  ModelDims dims;
  std::vector<RegionParams<S>> region;
  std::vector<PairParams<S>> pair;  // indexed like ordered_pairs(dims.regions)
};

template <typename S>
Mat<S> impulse_kernels(int d_sh, int kernel_len) {
  Mat<S> k = Mat<S>::Zero(d_sh, kernel_len);
  k.col(kernel_len / 2).setOnes();
  return k;
}

// Mappers start at identity and aligner kernels at a centered impulse, so
// cross-region alignment is exactly the identity at initialization.
template <typename S>
SpireParams<S> init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  SpireParams<S> P;
  P.dims = dims;
  Rng root = Rng(seed).sub(stream::init);
  auto uniform_mat = [](Eigen::Index r, Eigen::Index c, double bound, Rng& rng) {
    Mat<S> m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
    return m;
  };
  for (int r = 0; r < dims.regions; ++r) {
    Rng rr = root.sub(static_cast<std::uint64_t>(r));
    RegionParams<S> rp;
    Rng enc_rng = rr.sub(1);
    rp.enc_fw.init(dims.channels[r], dims.hidden, enc_rng);
    if (dims.bidirectional) {
      Rng enc_bw_rng = rr.sub(2);
      rp.enc_bw.init(dims.channels[r], dims.hidden, enc_bw_rng);
    }
    Rng proj_rng = rr.sub(3);
    const double kp = 1.0 / std::sqrt(static_cast<double>(dims.enc_out()));
    rp.w_sh = uniform_mat(dims.d_sh, dims.enc_out(), kp, proj_rng);
    rp.w_pr = uniform_mat(dims.d_pr, dims.enc_out(), kp, proj_rng);
    Rng dec_rng = rr.sub(4);
    const double ki = 1.0 / std::sqrt(static_cast<double>(dims.d_sh + dims.d_pr));
    rp.dec_in = uniform_mat(dims.hidden, dims.d_sh + dims.d_pr, ki, dec_rng);
    rp.dec_in_b = Mat<S>::Zero(dims.hidden, 1);
    rp.dec.init(dims.hidden, dims.hidden, dec_rng);
    const double ko = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    rp.w_out = uniform_mat(dims.channels[r], dims.hidden, ko, dec_rng);
    rp.b_out = Mat<S>::Zero(dims.channels[r], 1);
    P.region.push_back(std::move(rp));
  }
  for (auto [s, r] : ordered_pairs(dims.regions)) {
    (void)s;
    (void)r;
    PairParams<S> pp;
    pp.kernels = impulse_kernels<S>(dims.d_sh, dims.kernel_len());
    pp.mapper = Mat<S>::Identity(dims.d_sh, dims.d_sh);
    P.pair.push_back(std::move(pp));
  }
  return P;
}

template <typename S>
SpireParams<S> zero_like(const SpireParams<S>& P) {
  SpireParams<S> Z;
  Z.dims = P.dims;
  Z.region.resize(P.region.size());
  Z.pair.resize(P.pair.size());
  for (std::size_t r = 0; r < P.region.size(); ++r) {
    const auto& a = P.region[r];
    auto& b = Z.region[r];
    auto zero = [](const Mat<S>& m) { return Mat<S>::Zero(m.rows(), m.cols()).eval(); };
    b.enc_fw.w_ih = zero(a.enc_fw.w_ih);
    b.enc_fw.w_hh = zero(a.enc_fw.w_hh);
    b.enc_fw.b_ih = zero(a.enc_fw.b_ih);
    b.enc_fw.b_hh = zero(a.enc_fw.b_hh);
    if (a.enc_bw.w_ih.size() > 0) {
      b.enc_bw.w_ih = zero(a.enc_bw.w_ih);
      b.enc_bw.w_hh = zero(a.enc_bw.w_hh);
      b.enc_bw.b_ih = zero(a.enc_bw.b_ih);
      b.enc_bw.b_hh = zero(a.enc_bw.b_hh);
    }
    b.w_sh = zero(a.w_sh);
    b.w_pr = zero(a.w_pr);
    b.dec_in = zero(a.dec_in);
    b.dec_in_b = zero(a.dec_in_b);
    b.dec.w_ih = zero(a.dec.w_ih);
    b.dec.w_hh = zero(a.dec.w_hh);
    b.dec.b_ih = zero(a.dec.b_ih);
    b.dec.b_hh = zero(a.dec.b_hh);
    b.w_out = zero(a.w_out);
    b.b_out = zero(a.b_out);
  }
  for (std::size_t p = 0; p < P.pair.size(); ++p) {
    Z.pair[p].kernels = Mat<S>::Zero(P.pair[p].kernels.rows(), P.pair[p].kernels.cols());
    Z.pair[p].mapper = Mat<S>::Zero(P.pair[p].mapper.rows(), P.pair[p].mapper.cols());
  }
  return Z;
}

enum class ParamGroup { encoder, shared_proj, private_proj, decoder, aligner_kernel, aligner_mapper };

template <typename S>
struct ParamRef {
  std::string name;
  Mat<S>* mat;
  ParamGroup group;
};

// Stable traversal of every trainable tensor; callers pair the refs of a
// parameter struct with those of its gradient struct by index.
template <typename S>
std::vector<ParamRef<S>> param_refs(SpireParams<S>& P) {
  std::vector<ParamRef<S>> out;
  for (std::size_t r = 0; r < P.region.size(); ++r) {
    auto& rp = P.region[r];
    std::string pre = "r" + std::to_string(r) + ".";
    out.push_back({pre + "enc.w_ih", &rp.enc_fw.w_ih, ParamGroup::encoder});
    out.push_back({pre + "enc.w_hh", &rp.enc_fw.w_hh, ParamGroup::encoder});
    out.push_back({pre + "enc.b_ih", &rp.enc_fw.b_ih, ParamGroup::encoder});
    out.push_back({pre + "enc.b_hh", &rp.enc_fw.b_hh, ParamGroup::encoder});
    if (rp.enc_bw.w_ih.size() > 0) {
      out.push_back({pre + "enc_bw.w_ih", &rp.enc_bw.w_ih, ParamGroup::encoder});
      out.push_back({pre + "enc_bw.w_hh", &rp.enc_bw.w_hh, ParamGroup::encoder});
      out.push_back({pre + "enc_bw.b_ih", &rp.enc_bw.b_ih, ParamGroup::encoder});
      out.push_back({pre + "enc_bw.b_hh", &rp.enc_bw.b_hh, ParamGroup::encoder});
    }
    out.push_back({pre + "w_sh", &rp.w_sh, ParamGroup::shared_proj});
    out.push_back({pre + "w_pr", &rp.w_pr, ParamGroup::private_proj});
    out.push_back({pre + "dec_in", &rp.dec_in, ParamGroup::decoder});
    out.push_back({pre + "dec_in_b", &rp.dec_in_b, ParamGroup::decoder});
    out.push_back({pre + "dec.w_ih", &rp.dec.w_ih, ParamGroup::decoder});
    out.push_back({pre + "dec.w_hh", &rp.dec.w_hh, ParamGroup::decoder});
    out.push_back({pre + "dec.b_ih", &rp.dec.b_ih, ParamGroup::decoder});
    out.push_back({pre + "dec.b_hh", &rp.dec.b_hh, ParamGroup::decoder});
    out.push_back({pre + "w_out", &rp.w_out, ParamGroup::decoder});
    out.push_back({pre + "b_out", &rp.b_out, ParamGroup::decoder});
  }
  auto pairs = ordered_pairs(P.dims.regions);
  for (std::size_t p = 0; p < P.pair.size(); ++p) {
    std::string pre = "p" + std::to_string(pairs[p].first) + "to" + std::to_string(pairs[p].second) + ".";
    out.push_back({pre + "kernels", &P.pair[p].kernels, ParamGroup::aligner_kernel});
    out.push_back({pre + "mapper", &P.pair[p].mapper, ParamGroup::aligner_mapper});
  }
  return out;
}

// --- lag augmentation ---

// (T x C) -> (T-L x C*(L+1)); output feature j*C+c at time t equals input
// channel c at time t+j. L = 0 is the identity.
template <typename S>
Mat<S> lag_augment(const Mat<S>& x, int L) {
  const int T = static_cast<int>(x.rows());
  const int C = static_cast<int>(x.cols());
  check_config(L >= 0, "lag_augment: L must be >= 0");
  if (L >= T) throw ShapeError("lag_augment: lag count must be < sequence length");
  Mat<S> out(T - L, C * (L + 1));
  for (int j = 0; j <= L; ++j)
    out.middleCols(j * C, C) = x.middleRows(j, T - L);
  return out;
}

// --- forward / backward ---

template <typename S>
struct DecodePath {
  Mat<S> zin;  // (d_sh+d_pr x N) gated decoder input
  Mat<S> u;    // (hidden x N)
  GruCache<S> gru;
  Mat<S> x_hat;  // (C x N)
};

template <typename S>
struct ForwardCache {
  int T = 0, B = 0;
  S alpha_p = S(1);
  bool training = false;
  std::vector<GruCache<S>> enc_fw, enc_bw;
  std::vector<Mat<S>> x_rev;   // time-reversed inputs (bidirectional only)
  std::vector<Mat<S>> h_cat;   // (enc_out x N)
  std::vector<Mat<S>> mask;    // dropout masks; empty in eval mode
  std::vector<Mat<S>> h_drop;  // post-dropout encoder features
  std::vector<Mat<S>> z_sh, z_pr;
  std::vector<Mat<S>> conv;     // per pair, pre-mapper aligned latents
  std::vector<Mat<S>> z_tilde;  // per pair, aligned + mapped
  std::vector<DecodePath<S>> full, self_;  // per region
  std::vector<DecodePath<S>> cross;        // per pair
};

namespace detail {

template <typename S>
Mat<S> time_reverse(const Mat<S>& x, int T, int B) {
  Mat<S> out(x.rows(), x.cols());
  for (int t = 0; t < T; ++t) out.middleCols(t * B, B) = x.middleCols((T - 1 - t) * B, B);
  return out;
}

template <typename S>
void decode_forward(const RegionParams<S>& rp, int d_sh, const Mat<S>* z_sh, const Mat<S>* z_pr,
                    S alpha, int T, int B, DecodePath<S>& path) {
  const int dtotal = static_cast<int>(rp.dec_in.cols());
  const int N = T * B;
  path.zin = Mat<S>::Zero(dtotal, N);
  if (z_sh) path.zin.topRows(d_sh) = *z_sh;
  if (z_pr && alpha != S(0)) path.zin.bottomRows(dtotal - d_sh) = alpha * (*z_pr);
  path.u.resize(rp.dec_in.rows(), N);
  path.u.noalias() = rp.dec_in * path.zin;
  path.u.colwise() += rp.dec_in_b.col(0);
  gru_forward(rp.dec, path.u, T, B, path.gru);
  path.x_hat.resize(rp.w_out.rows(), N);
  path.x_hat.noalias() = rp.w_out * path.gru.h;
  path.x_hat.colwise() += rp.b_out.col(0);
}

// Depthwise temporal convolution, zero padded, same length.
// out[j, t] = sum_delta kernel[j, K+delta] * in[j, t-delta].
template <typename S>
void conv_align_forward(const Mat<S>& kernels, const Mat<S>& z, int T, int B, Mat<S>& out) {
  const int d = static_cast<int>(z.rows());
  const int K = (static_cast<int>(kernels.cols()) - 1) / 2;
  out = Mat<S>::Zero(d, z.cols());
  for (int dlt = -K; dlt <= K; ++dlt) {
    const int lo = std::max(0, dlt);          // valid t range: 0 <= t-dlt < T
    const int hi = std::min(T, T + dlt) - 1;  // inclusive
    if (lo > hi) continue;
    const int n = (hi - lo + 1) * B;
    for (int j = 0; j < d; ++j) {
      const S k = kernels(j, K + dlt);
      if (k == S(0)) continue;
      out.row(j).segment(lo * B, n) += k * z.row(j).segment((lo - dlt) * B, n);
    }
  }
}

template <typename S>
void conv_align_backward(const Mat<S>& kernels, const Mat<S>& z, const Mat<S>& dout, int T, int B,
                         Mat<S>& dkernels, Mat<S>& dz) {
  const int d = static_cast<int>(z.rows());
  const int K = (static_cast<int>(kernels.cols()) - 1) / 2;
  for (int dlt = -K; dlt <= K; ++dlt) {
    const int lo = std::max(0, dlt);
    const int hi = std::min(T, T + dlt) - 1;
    if (lo > hi) continue;
    const int n = (hi - lo + 1) * B;
    for (int j = 0; j < d; ++j) {
      dkernels(j, K + dlt) +=
          dout.row(j).segment(lo * B, n).dot(z.row(j).segment((lo - dlt) * B, n));
      const S k = kernels(j, K + dlt);
      if (k != S(0))
        dz.row(j).segment((lo - dlt) * B, n) += k * dout.row(j).segment(lo * B, n);
    }
  }
}

}  // namespace detail

// Runs encoders, aligners and the full/self/cross decode paths.
// Cross and self reconstructions always decode with the private gate closed.
template <typename S>
void spire_forward(const SpireParams<S>& P, const std::vector<Mat<S>>& x, int T, int B, S alpha_p,
                   bool training, Rng dropout_rng, ForwardCache<S>& c) {
  const auto& dims = P.dims;
  const int R = dims.regions;
  const int N = T * B;
  check_shape(static_cast<int>(x.size()) == R, "forward: region count mismatch");
  for (int r = 0; r < R; ++r)
    check_shape(static_cast<int>(x[r].rows()) == dims.channels[r] &&
                    static_cast<int>(x[r].cols()) == N,
                "forward: input shape mismatch for region " + std::to_string(r));
  c.T = T;
  c.B = B;
  c.alpha_p = alpha_p;
  c.training = training;
  c.enc_fw.resize(R);
  c.enc_bw.resize(R);
  c.x_rev.assign(R, {});
  c.h_cat.resize(R);
  c.mask.assign(R, {});
  c.h_drop.resize(R);
  c.z_sh.resize(R);
  c.z_pr.resize(R);
  const auto pairs = ordered_pairs(R);
  c.conv.resize(pairs.size());
  c.z_tilde.resize(pairs.size());
  c.full.resize(R);
  c.self_.resize(R);
  c.cross.resize(pairs.size());

  for (int r = 0; r < R; ++r) {
    const auto& rp = P.region[r];
    gru_forward(rp.enc_fw, x[r], T, B, c.enc_fw[r]);
    if (dims.bidirectional) {
      c.x_rev[r] = detail::time_reverse(x[r], T, B);
      gru_forward(rp.enc_bw, c.x_rev[r], T, B, c.enc_bw[r]);
      c.h_cat[r].resize(2 * dims.hidden, N);
      c.h_cat[r].topRows(dims.hidden) = c.enc_fw[r].h;
      c.h_cat[r].bottomRows(dims.hidden) = detail::time_reverse(c.enc_bw[r].h, T, B);
    } else {
      c.h_cat[r] = c.enc_fw[r].h;
    }
    if (training && dims.dropout > 0) {
      Rng mr = dropout_rng.sub(static_cast<std::uint64_t>(r));
      const S keep = S(1) - static_cast<S>(dims.dropout);
      const S inv = S(1) / keep;
      c.mask[r].resize(c.h_cat[r].rows(), N);
      for (Eigen::Index jj = 0; jj < c.mask[r].cols(); ++jj)
        for (Eigen::Index ii = 0; ii < c.mask[r].rows(); ++ii)
          c.mask[r](ii, jj) = mr.uniform() < static_cast<double>(keep) ? inv : S(0);
      c.h_drop[r] = c.h_cat[r].cwiseProduct(c.mask[r]);
    } else {
      c.h_drop[r] = c.h_cat[r];
    }
    c.z_sh[r].resize(dims.d_sh, N);
    c.z_sh[r].noalias() = rp.w_sh * c.h_drop[r];
    c.z_pr[r].resize(dims.d_pr, N);
    c.z_pr[r].noalias() = rp.w_pr * c.h_drop[r];
  }

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [s, r] = pairs[p];
    detail::conv_align_forward(P.pair[p].kernels, c.z_sh[s], T, B, c.conv[p]);
    c.z_tilde[p].resize(dims.d_sh, N);
    c.z_tilde[p].noalias() = P.pair[p].mapper * c.conv[p];
    (void)r;
  }

  for (int r = 0; r < R; ++r) {
    detail::decode_forward(P.region[r], dims.d_sh, &c.z_sh[r], &c.z_pr[r], alpha_p, T, B,
                           c.full[r]);
    detail::decode_forward(P.region[r], dims.d_sh, &c.z_sh[r], static_cast<const Mat<S>*>(nullptr),
                           S(0), T, B, c.self_[r]);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [s, r] = pairs[p];
    (void)s;
    detail::decode_forward(P.region[r], dims.d_sh, &c.z_tilde[p],
                           static_cast<const Mat<S>*>(nullptr), S(0), T, B, c.cross[p]);
  }
}

// Gradients w.r.t. cached tensors, filled by the loss layer.
template <typename S>
struct CacheGrads {
  std::vector<Mat<S>> d_z_sh, d_z_pr;      // per region
  std::vector<Mat<S>> d_z_tilde;           // per pair
  std::vector<Mat<S>> d_x_full, d_x_self;  // per region
  std::vector<Mat<S>> d_x_cross;           // per pair

  // Reconstruction gradients stay empty until a loss term touches them, so
  // ablated (zero-weight) paths skip their decoder backward pass entirely.
  void init(const ModelDims& dims, int T, int B) {
    const int N = T * B;
    const int npairs = dims.regions * (dims.regions - 1);
    d_z_sh.assign(dims.regions, Mat<S>::Zero(dims.d_sh, N));
    d_z_pr.assign(dims.regions, Mat<S>::Zero(dims.d_pr, N));
    d_z_tilde.assign(npairs, Mat<S>::Zero(dims.d_sh, N));
    d_x_full.assign(dims.regions, Mat<S>());
    d_x_self.assign(dims.regions, Mat<S>());
    d_x_cross.assign(npairs, Mat<S>());
  }
};

namespace detail {

template <typename S>
void decode_backward(const RegionParams<S>& rp, const DecodePath<S>& path, const Mat<S>& d_x_hat,
                     int T, int B, RegionParams<S>& g, Mat<S>& dzin) {
  g.w_out.noalias() += d_x_hat * path.gru.h.transpose();
  g.b_out.col(0) += d_x_hat.rowwise().sum();
  Mat<S> dh = rp.w_out.transpose() * d_x_hat;
  Mat<S> du;
  gru_backward(rp.dec, path.u, T, B, path.gru, dh, g.dec, &du);
  g.dec_in.noalias() += du * path.zin.transpose();
  g.dec_in_b.col(0) += du.rowwise().sum();
  dzin.resize(rp.dec_in.cols(), d_x_hat.cols());
  dzin.noalias() = rp.dec_in.transpose() * du;
}

}  // namespace detail

template <typename S>
void spire_backward(const SpireParams<S>& P, const std::vector<Mat<S>>& x,
                    const ForwardCache<S>& c, const CacheGrads<S>& cg, SpireParams<S>& grads) {
  const auto& dims = P.dims;
  const int R = dims.regions;
  const int T = c.T, B = c.B;
  const auto pairs = ordered_pairs(R);

  std::vector<Mat<S>> d_z_sh = cg.d_z_sh;
  std::vector<Mat<S>> d_z_pr = cg.d_z_pr;
  std::vector<Mat<S>> d_z_tilde = cg.d_z_tilde;

  Mat<S> dzin;
  for (int r = 0; r < R; ++r) {
    if (cg.d_x_full[r].size() > 0) {
      detail::decode_backward(P.region[r], c.full[r], cg.d_x_full[r], T, B, grads.region[r], dzin);
      d_z_sh[r] += dzin.topRows(dims.d_sh);
      if (c.alpha_p != S(0)) d_z_pr[r] += c.alpha_p * dzin.bottomRows(dims.d_pr);
    }
    if (cg.d_x_self[r].size() > 0) {
      detail::decode_backward(P.region[r], c.self_[r], cg.d_x_self[r], T, B, grads.region[r], dzin);
      d_z_sh[r] += dzin.topRows(dims.d_sh);
    }
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [s, r] = pairs[p];
    if (cg.d_x_cross[p].size() > 0) {
      detail::decode_backward(P.region[r], c.cross[p], cg.d_x_cross[p], T, B, grads.region[r],
                              dzin);
      d_z_tilde[p] += dzin.topRows(dims.d_sh);
    }
    (void)s;
  }

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [s, r] = pairs[p];
    (void)r;
    if (d_z_tilde[p].size() == 0) continue;
    grads.pair[p].mapper.noalias() += d_z_tilde[p] * c.conv[p].transpose();
    Mat<S> dconv = P.pair[p].mapper.transpose() * d_z_tilde[p];
    detail::conv_align_backward(P.pair[p].kernels, c.z_sh[s], dconv, T, B, grads.pair[p].kernels,
                                d_z_sh[s]);
  }

  for (int r = 0; r < R; ++r) {
    const auto& rp = P.region[r];
    auto& gr = grads.region[r];
    gr.w_sh.noalias() += d_z_sh[r] * c.h_drop[r].transpose();
    gr.w_pr.noalias() += d_z_pr[r] * c.h_drop[r].transpose();
    Mat<S> dh_drop = rp.w_sh.transpose() * d_z_sh[r];
    dh_drop.noalias() += rp.w_pr.transpose() * d_z_pr[r];
    Mat<S> dh_cat = c.mask[r].size() > 0 ? dh_drop.cwiseProduct(c.mask[r]).eval() : dh_drop;
    if (dims.bidirectional) {
      Mat<S> dh_fw = dh_cat.topRows(dims.hidden);
      gru_backward(rp.enc_fw, x[r], T, B, c.enc_fw[r], dh_fw, gr.enc_fw,
                   static_cast<Mat<S>*>(nullptr));
      Mat<S> dh_bw = detail::time_reverse(Mat<S>(dh_cat.bottomRows(dims.hidden)), T, B);
      gru_backward(rp.enc_bw, c.x_rev[r], T, B, c.enc_bw[r], dh_bw, gr.enc_bw,
                   static_cast<Mat<S>*>(nullptr));
    } else {
      gru_backward(rp.enc_fw, x[r], T, B, c.enc_fw[r], dh_cat, gr.enc_fw,
                   static_cast<Mat<S>*>(nullptr));
    }
  }
}

}  // namespace spire
