#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spire/errors.hpp"
#include "spire/model.hpp"

namespace spire {

// ---------------------------------------------------------------------------
// The nine training objectives and their weighted combination. Latent
// matrices are (features x samples); reconstruction tensors are
// (channels x time*batch). All squared-error style terms are per-element
// means so the schedule weights transfer across batch size and length.
// Every term also provides its analytic gradient; a term with zero weight is
// skipped entirely, which makes weight-zero ablations exact.
// ---------------------------------------------------------------------------

template <typename S>
struct LossWeights {
  S rec = S(1);
  S cross = S(0);
  S self = S(0);
  S align = S(0);
  S orth = S(0);
  S mapid = S(0);
  S align_reg = S(0);
  S var_sh = S(0);
  S var_pr = S(0);
  S tau = S(0.1);  // private variance floor target
  // VICReg mix, normalized by their sum so `align` sets the overall scale.
  S vic_inv = S(25);
  S vic_var = S(25);
  S vic_cov = S(1);
  S vic_gamma = S(1);
  S vic_eps = S(1e-4);
};

struct LossBreakdown {
  double rec = 0, cross = 0, self = 0, align = 0, orth = 0, mapid = 0, align_reg = 0, var_sh = 0,
         var_pr = 0;
  double total = 0;

  static const std::vector<std::string>& term_names() {
    static const std::vector<std::string> names = {"rec",   "cross",     "self",   "align",
                                                   "orth",  "mapid",     "align_reg", "var_sh",
                                                   "var_pr"};
    return names;
  }
  double term(std::size_t i) const {
    const double* vals[] = {&rec, &cross, &self, &align, &orth, &mapid, &align_reg, &var_sh,
                            &var_pr};
    return *vals[i];
  }
  bool finite() const {
    for (std::size_t i = 0; i < 9; ++i)
      if (!std::isfinite(term(i))) return false;
    return std::isfinite(total);
  }
  // Name of the first non-finite term, for divergence diagnostics.
  std::string first_non_finite() const {
    for (std::size_t i = 0; i < 9; ++i)
      if (!std::isfinite(term(i))) return term_names()[i];
    return std::isfinite(total) ? "" : "total";
  }
};

// Per-element mean squared error; gradient (scaled by w) accumulates into dy.
template <typename S>
double mse_loss(const Mat<S>& x, const Mat<S>& y, Mat<S>* dy = nullptr, S w = S(1)) {
  check_shape(x.rows() == y.rows() && x.cols() == y.cols(), "mse: shape mismatch");
  const double n = static_cast<double>(x.size());
  double v = (y - x).squaredNorm() / n;
  if (dy) {
    if (dy->size() == 0) *dy = Mat<S>::Zero(x.rows(), x.cols());
    *dy += (S(2) * w / static_cast<S>(n)) * (y - x);
  }
  return v;
}

namespace lossdetail {

template <typename S>
struct RowStats {
  Vec<S> mean;
  Vec<S> sd;  // unbiased, no clamping
};

template <typename S>
RowStats<S> row_stats(const Mat<S>& z) {
  const auto N = z.cols();
  check_shape(N >= 2, "latent statistics need at least 2 samples");
  RowStats<S> s;
  s.mean = z.rowwise().mean();
  s.sd.resize(z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    S var = (z.row(j).array() - s.mean[j]).square().sum() / static_cast<S>(N - 1);
    s.sd[j] = std::sqrt(std::max(var, S(0)));
  }
  return s;
}

// Gradient of a standardized-row functional: given g = dL/d(row standardized
// with mean mu and scale sd_used), returns dL/d(row). When the scale was
// clamped the std is a constant and only the centering propagates.
template <typename S>
Vec<S> unstandardize_grad(const Vec<S>& row, S mu, S sd_used, const Vec<S>& g, bool clamped) {
  const S gbar = g.mean();
  if (clamped) return ((g.array() - gbar) / sd_used).matrix();
  Vec<S> zbar = ((row.array() - mu) / sd_used).matrix();
  const S gz = g.dot(zbar) / static_cast<S>(row.size() - 1);
  return ((g.array() - gbar - zbar.array() * gz) / sd_used).matrix();
}

}  // namespace lossdetail

// VICReg between two (d x N) latent sets: invariance MSE, per-feature std
// hinge toward gamma, and off-diagonal covariance penalty; variance and
// covariance parts averaged over the two inputs.
template <typename S>
double vicreg_align_loss(const Mat<S>& a, const Mat<S>& b, const LossWeights<S>& W,
                         Mat<S>* da = nullptr, Mat<S>* db = nullptr, S w = S(1)) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "vicreg: shape mismatch");
  check_shape(a.cols() >= 2, "vicreg: needs at least 2 samples");
  const Eigen::Index d = a.rows();
  const Eigen::Index N = a.cols();
  const S csum = W.vic_inv + W.vic_var + W.vic_cov;
  const S ci = W.vic_inv / csum, cv = W.vic_var / csum, cc = W.vic_cov / csum;

  double inv = (a - b).squaredNorm() / static_cast<double>(a.size());

  auto var_cov = [&](const Mat<S>& z, Mat<S>* dz) {
    auto stats = lossdetail::row_stats(z);
    Mat<S> zc = z.colwise() - stats.mean;
    // variance hinge with eps inside the sqrt
    Vec<S> s_eps(d);
    double v = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      S var = zc.row(j).squaredNorm() / static_cast<S>(N - 1);
      s_eps[j] = std::sqrt(var + W.vic_eps);
      v += std::max(0.0, static_cast<double>(W.vic_gamma - s_eps[j]));
    }
    v /= static_cast<double>(d);
    // covariance penalty
    Mat<S> C = (zc * zc.transpose()) / static_cast<S>(N - 1);
    double cvl = (C.squaredNorm() - C.diagonal().squaredNorm()) / static_cast<double>(d);
    if (dz) {
      // hinge part: d std/dz = zc / ((N-1) std)
      for (Eigen::Index j = 0; j < d; ++j) {
        if (s_eps[j] < W.vic_gamma) {
          S coef = -w * cv / (static_cast<S>(d) * s_eps[j] * static_cast<S>(N - 1));
          dz->row(j) += coef * zc.row(j);
        }
      }
      // covariance part: dL/dzc = (4/(d(N-1))) * offdiag(C) * zc
      Mat<S> Coff = C;
      Coff.diagonal().setZero();
      Mat<S> g = (S(4) * w * cc / (static_cast<S>(d) * static_cast<S>(N - 1))) * (Coff * zc);
      // re-center: zc depends on the row means
      Vec<S> gmean = g.rowwise().mean();
      *dz += g.colwise() - gmean;
    }
    return v * static_cast<double>(cv) + cvl * static_cast<double>(cc);
  };

  double total = static_cast<double>(ci) * inv;
  if (da && da->size() == 0) *da = Mat<S>::Zero(d, N);
  if (db && db->size() == 0) *db = Mat<S>::Zero(d, N);
  if (da) *da += (S(2) * w * ci / static_cast<S>(a.size())) * (a - b);
  if (db) *db += (S(2) * w * ci / static_cast<S>(a.size())) * (b - a);

  // variance + covariance averaged over the two views
  Mat<S> ga = da ? Mat<S>::Zero(d, N).eval() : Mat<S>();
  Mat<S> gb = db ? Mat<S>::Zero(d, N).eval() : Mat<S>();
  double va = var_cov(a, da ? &ga : nullptr);
  double vb = var_cov(b, db ? &gb : nullptr);
  total += 0.5 * (va + vb);
  if (da) *da += S(0.5) * ga;
  if (db) *db += S(0.5) * gb;
  return total;
}

// Squared Frobenius norm of the cross-covariance between per-feature
// standardized latents. Degenerate features are clamped before division.
template <typename S>
double orthogonality_loss(const Mat<S>& z_sh, const Mat<S>& z_pr, Mat<S>* d_sh = nullptr,
                          Mat<S>* d_pr = nullptr, S w = S(1)) {
  check_shape(z_sh.cols() == z_pr.cols(), "orthogonality: sample count mismatch");
  const Eigen::Index N = z_sh.cols();
  check_shape(N >= 2, "orthogonality: needs at least 2 samples");
  const S clamp = S(1e-8);

  auto stats_a = lossdetail::row_stats(z_sh);
  auto stats_b = lossdetail::row_stats(z_pr);
  Vec<S> sa = stats_a.sd.cwiseMax(clamp);
  Vec<S> sb = stats_b.sd.cwiseMax(clamp);
  Mat<S> za = (z_sh.colwise() - stats_a.mean).array().colwise() / sa.array();
  Mat<S> zb = (z_pr.colwise() - stats_b.mean).array().colwise() / sb.array();
  Mat<S> C = (za * zb.transpose()) / static_cast<S>(N - 1);
  double val = C.squaredNorm();
  if (d_sh || d_pr) {
    Mat<S> gza = (S(2) * w / static_cast<S>(N - 1)) * (C * zb);
    Mat<S> gzb = (S(2) * w / static_cast<S>(N - 1)) * (C.transpose() * za);
    if (d_sh) {
      if (d_sh->size() == 0) *d_sh = Mat<S>::Zero(z_sh.rows(), N);
      for (Eigen::Index j = 0; j < z_sh.rows(); ++j) {
        Vec<S> row = z_sh.row(j), g = gza.row(j);
        d_sh->row(j) += lossdetail::unstandardize_grad<S>(row, stats_a.mean[j], sa[j], g,
                                                          stats_a.sd[j] < clamp)
                            .transpose();
      }
    }
    if (d_pr) {
      if (d_pr->size() == 0) *d_pr = Mat<S>::Zero(z_pr.rows(), N);
      for (Eigen::Index j = 0; j < z_pr.rows(); ++j) {
        Vec<S> row = z_pr.row(j), g = gzb.row(j);
        d_pr->row(j) += lossdetail::unstandardize_grad<S>(row, stats_b.mean[j], sb[j], g,
                                                          stats_b.sd[j] < clamp)
                            .transpose();
      }
    }
  }
  return val;
}

// Shared guard: sum_j (std_j - 1)^2. Private guard: sum_j max(0, tau-std_j)^2.
template <typename S>
double variance_guard_shared(const Mat<S>& z, Mat<S>* dz = nullptr, S w = S(1)) {
  auto stats = lossdetail::row_stats(z);
  const Eigen::Index N = z.cols();
  double val = 0;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    double dev = static_cast<double>(stats.sd[j]) - 1.0;
    val += dev * dev;
    if (dz) {
      if (dz->size() == 0) *dz = Mat<S>::Zero(z.rows(), N);
      S denom = std::max(stats.sd[j], S(1e-8)) * static_cast<S>(N - 1);
      dz->row(j) += (S(2) * w * static_cast<S>(dev) / denom) *
                    (z.row(j).array() - stats.mean[j]).matrix();
    }
  }
  return val;
}

template <typename S>
double variance_guard_private(const Mat<S>& z, S tau, Mat<S>* dz = nullptr, S w = S(1)) {
  auto stats = lossdetail::row_stats(z);
  const Eigen::Index N = z.cols();
  double val = 0;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    double gap = static_cast<double>(tau) - static_cast<double>(stats.sd[j]);
    if (gap <= 0) continue;
    val += gap * gap;
    if (dz) {
      if (dz->size() == 0) *dz = Mat<S>::Zero(z.rows(), N);
      S denom = std::max(stats.sd[j], S(1e-8)) * static_cast<S>(N - 1);
      dz->row(j) += (S(-2) * w * static_cast<S>(gap) / denom) *
                    (z.row(j).array() - stats.mean[j]).matrix();
    }
  }
  return val;
}

template <typename S>
double mapper_identity_loss(const Mat<S>& mapper, Mat<S>* dm = nullptr, S w = S(1)) {
  check_shape(mapper.rows() == mapper.cols(), "mapper identity penalty needs a square matrix");
  Mat<S> diff = mapper - Mat<S>::Identity(mapper.rows(), mapper.cols());
  if (dm) *dm += S(2) * w * diff;
  return diff.squaredNorm();
}

// ||k - impulse||^2 + (sum(k) - 1)^2 per kernel row.
template <typename S>
double convalign_reg_loss(const Mat<S>& kernels, Mat<S>* dk = nullptr, S w = S(1)) {
  check_shape(kernels.cols() % 2 == 1, "aligner kernels must have odd length");
  const Eigen::Index center = kernels.cols() / 2;
  double val = 0;
  for (Eigen::Index j = 0; j < kernels.rows(); ++j) {
    Vec<S> diff = kernels.row(j);
    diff[center] -= S(1);
    S ssum = kernels.row(j).sum() - S(1);
    val += static_cast<double>(diff.squaredNorm()) + static_cast<double>(ssum * ssum);
    if (dk) {
      dk->row(j) += S(2) * w * diff.transpose();
      dk->row(j).array() += S(2) * w * ssum;
    }
  }
  return val;
}

// Reconstruction terms computed from a forward cache against the inputs.
template <typename S>
double recon_loss(const std::vector<Mat<S>>& x, const ForwardCache<S>& c,
                  CacheGrads<S>* cg = nullptr, S w = S(1)) {
  double v = 0;
  for (std::size_t r = 0; r < x.size(); ++r)
    v += mse_loss(x[r], c.full[r].x_hat, cg ? &cg->d_x_full[r] : nullptr, w);
  return v;
}

template <typename S>
std::pair<double, double> cross_self_recon_loss(const std::vector<Mat<S>>& x,
                                                const ForwardCache<S>& c, int regions,
                                                CacheGrads<S>* cg = nullptr, S w_cross = S(1),
                                                S w_self = S(1)) {
  const auto pairs = ordered_pairs(regions);
  check_shape(c.cross.size() == pairs.size(), "missing cross reconstructions");
  double lc = 0, ls = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    int r = pairs[p].second;
    lc += mse_loss(x[r], c.cross[p].x_hat, cg ? &cg->d_x_cross[p] : nullptr, w_cross);
  }
  for (std::size_t r = 0; r < x.size(); ++r)
    ls += mse_loss(x[r], c.self_[r].x_hat, cg ? &cg->d_x_self[r] : nullptr, w_self);
  return {lc, ls};
}

// Weighted sum over all terms. Gradients (scaled by the weights) accumulate
// into cg (tensor grads) and pg (direct parameter grads for the aligner
// regularizers). Zero-weight terms are not evaluated at all.
template <typename S>
LossBreakdown total_loss(const SpireParams<S>& P, const std::vector<Mat<S>>& x,
                         const ForwardCache<S>& c, const LossWeights<S>& W,
                         CacheGrads<S>* cg = nullptr, SpireParams<S>* pg = nullptr) {
  const auto& dims = P.dims;
  const auto pairs = ordered_pairs(dims.regions);
  LossBreakdown out;

  if (W.rec != S(0)) out.rec = recon_loss(x, c, cg, W.rec);
  if (W.cross != S(0)) {
    check_shape(c.cross.size() == pairs.size(), "missing cross reconstructions");
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      int r = pairs[p].second;
      out.cross += mse_loss(x[r], c.cross[p].x_hat, cg ? &cg->d_x_cross[p] : nullptr, W.cross);
    }
  }
  if (W.self != S(0)) {
    for (std::size_t r = 0; r < x.size(); ++r)
      out.self += mse_loss(x[r], c.self_[r].x_hat, cg ? &cg->d_x_self[r] : nullptr, W.self);
  }
  if (W.align != S(0)) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      int r = pairs[p].second;
      out.align += vicreg_align_loss(c.z_sh[r], c.z_tilde[p], W, cg ? &cg->d_z_sh[r] : nullptr,
                                     cg ? &cg->d_z_tilde[p] : nullptr, W.align);
    }
  }
  if (W.orth != S(0)) {
    for (int r = 0; r < dims.regions; ++r)
      out.orth += orthogonality_loss(c.z_sh[r], c.z_pr[r], cg ? &cg->d_z_sh[r] : nullptr,
                                     cg ? &cg->d_z_pr[r] : nullptr, W.orth);
  }
  if (W.mapid != S(0)) {
    for (std::size_t p = 0; p < pairs.size(); ++p)
      out.mapid += mapper_identity_loss(P.pair[p].mapper, pg ? &pg->pair[p].mapper : nullptr,
                                        W.mapid);
  }
  if (W.align_reg != S(0)) {
    for (std::size_t p = 0; p < pairs.size(); ++p)
      out.align_reg += convalign_reg_loss(P.pair[p].kernels,
                                          pg ? &pg->pair[p].kernels : nullptr, W.align_reg);
  }
  if (W.var_sh != S(0)) {
    for (int r = 0; r < dims.regions; ++r)
      out.var_sh += variance_guard_shared(c.z_sh[r], cg ? &cg->d_z_sh[r] : nullptr, W.var_sh);
  }
  if (W.var_pr != S(0)) {
    for (int r = 0; r < dims.regions; ++r)
      out.var_pr += variance_guard_private(c.z_pr[r], W.tau, cg ? &cg->d_z_pr[r] : nullptr,
                                           W.var_pr);
  }

  out.total = static_cast<double>(W.rec) * out.rec + static_cast<double>(W.cross) * out.cross +
              static_cast<double>(W.self) * out.self + static_cast<double>(W.align) * out.align +
              static_cast<double>(W.orth) * out.orth + static_cast<double>(W.mapid) * out.mapid +
              static_cast<double>(W.align_reg) * out.align_reg +
              static_cast<double>(W.var_sh) * out.var_sh +
              static_cast<double>(W.var_pr) * out.var_pr;
  return out;
}

}  // namespace spire
