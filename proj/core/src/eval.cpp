#include "spire/eval.hpp"

#include <algorithm>
#include <cmath>

#include "spire/errors.hpp"
#include "spire/forest.hpp"

namespace spire {

namespace {

Matd centered(const Matd& z, Vecd& mean_out) {
  mean_out = z.colwise().mean().transpose();
  return z.rowwise() - mean_out.transpose();
}

// Symmetric inverse square root with a relative ridge on the diagonal.
Matd inv_sqrt(const Matd& cov, double ridge_eps, bool* deficient) {
  const int p = static_cast<int>(cov.rows());
  double tr = cov.trace();
  double eps = ridge_eps * (tr > 0 ? tr / p : 1.0);
  Eigen::SelfAdjointEigenSolver<Matd> eig(cov + eps * Matd::Identity(p, p));
  Vecd ev = eig.eigenvalues();
  if (deficient) {
    double mx = ev.maxCoeff();
    *deficient = ev.minCoeff() < 1e-10 * std::max(mx, 1e-300);
  }
  Vecd inv = ev.array().max(1e-300).rsqrt();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

double pearson(const Vecd& a, const Vecd& b) {
  double ma = a.mean(), mb = b.mean();
  Vecd ca = a.array() - ma, cb = b.array() - mb;
  double denom = ca.norm() * cb.norm();
  if (denom < 1e-300) return 0.0;
  return ca.dot(cb) / denom;
}

}  // namespace

CcaResult cca_align(const Matd& za, const Matd& zb, int k, double ridge_eps) {
  const int N = static_cast<int>(za.rows());
  const int p = static_cast<int>(za.cols());
  const int q = static_cast<int>(zb.cols());
  check_shape(zb.rows() == N, "cca: sample count mismatch");
  check_shape(N > std::max(p, q) + 1, "cca: not enough samples");
  check_config(k >= 1 && k <= std::min(p, q), "cca: k must be in [1, min(p, q)]");

  CcaResult res;
  Matd ca = centered(za, res.mean_a);
  Matd cb = centered(zb, res.mean_b);
  const double nm1 = static_cast<double>(N - 1);
  Matd Caa = ca.transpose() * ca / nm1;
  Matd Cbb = cb.transpose() * cb / nm1;
  Matd Cab = ca.transpose() * cb / nm1;

  bool def_a = false, def_b = false;
  Matd Wa = inv_sqrt(Caa, ridge_eps, &def_a);
  Matd Wb = inv_sqrt(Cbb, ridge_eps, &def_b);
  res.rank_deficient = def_a || def_b;

  Eigen::JacobiSVD<Matd> svd(Wa * Cab * Wb, Eigen::ComputeThinU | Eigen::ComputeThinV);
  res.correlations = svd.singularValues().head(k).array().min(1.0).max(0.0);
  res.basis_a = Wa * svd.matrixU().leftCols(k);
  res.basis_b = Wb * svd.matrixV().leftCols(k);

  Matd va = ca * res.basis_a;
  Matd vb = cb * res.basis_b;
  res.pearson_aligned.resize(k);
  for (int j = 0; j < k; ++j) res.pearson_aligned[j] = pearson(va.col(j), vb.col(j));
  return res;
}

FveResult fve(const Matd& z, const Matd& y, double ridge_lambda, int n_folds,
              std::uint64_t seed) {
  const int N = static_cast<int>(z.rows());
  const int d = static_cast<int>(z.cols());
  check_shape(y.rows() == N, "fve: sample count mismatch");
  check_config(n_folds >= 2, "fve: need at least 2 folds");
  check_shape(N >= 2 * n_folds, "fve: need at least 2 samples per fold");

  FveResult out;
  Vecd gmean = y.colwise().mean().transpose();
  double sst = (y.rowwise() - gmean.transpose()).squaredNorm();
  if (sst < 1e-12 * static_cast<double>(N)) {
    out.undefined = true;
    return out;
  }
  if (ridge_lambda < 0) ridge_lambda = 1e-3 * (z.transpose() * z).trace() / d;

  std::vector<int> idx(N);
  for (int i = 0; i < N; ++i) idx[i] = i;
  Rng rng = Rng(seed).sub(stream::folds);
  rng.shuffle(idx.begin(), idx.end());

  double sse = 0;
  for (int f = 0; f < n_folds; ++f) {
    const int lo = static_cast<int>(static_cast<long long>(f) * N / n_folds);
    const int hi = static_cast<int>(static_cast<long long>(f + 1) * N / n_folds);
    const int n_ho = hi - lo, n_tr = N - n_ho;
    Matd ztr(n_tr, d), ytr(n_tr, y.cols());
    Matd zho(n_ho, d), yho(n_ho, y.cols());
    int a = 0, b = 0;
    for (int i = 0; i < N; ++i) {
      if (i >= lo && i < hi) {
        zho.row(b) = z.row(idx[i]);
        yho.row(b++) = y.row(idx[i]);
      } else {
        ztr.row(a) = z.row(idx[i]);
        ytr.row(a++) = y.row(idx[i]);
      }
    }
    Vecd zm = ztr.colwise().mean().transpose();
    Vecd ym = ytr.colwise().mean().transpose();
    Matd zc = ztr.rowwise() - zm.transpose();
    Matd yc = ytr.rowwise() - ym.transpose();
    Matd gram = zc.transpose() * zc + ridge_lambda * Matd::Identity(d, d);
    Matd w = gram.ldlt().solve(zc.transpose() * yc);
    Matd pred = (zho.rowwise() - zm.transpose()) * w;
    pred.rowwise() += ym.transpose();
    sse += (yho - pred).squaredNorm();
  }
  out.value = 1.0 - sse / sst;
  return out;
}

VariancePartition partition_from_fve(double fve_s, double fve_p, double fve_sp) {
  VariancePartition v;
  v.fve_s = fve_s;
  v.fve_p = fve_p;
  v.fve_sp = fve_sp;
  v.unique_shared = std::max(0.0, fve_sp - fve_p);
  v.unique_private = std::max(0.0, fve_sp - fve_s);
  v.redundant = std::max(0.0, fve_s + fve_p - fve_sp);
  return v;
}

VariancePartition variance_partition(const Matd& z_sh, const Matd& z_pr, const Matd& y,
                                     double ridge_lambda, int n_folds, std::uint64_t seed) {
  check_shape(z_sh.rows() == z_pr.rows() && z_sh.rows() == y.rows(),
              "variance_partition: sample count mismatch");
  Matd zsp(z_sh.rows(), z_sh.cols() + z_pr.cols());
  zsp << z_sh, z_pr;
  FveResult s = fve(z_sh, y, ridge_lambda, n_folds, seed);
  FveResult p = fve(z_pr, y, ridge_lambda, n_folds, seed);
  FveResult sp = fve(zsp, y, ridge_lambda, n_folds, seed);
  VariancePartition v = partition_from_fve(s.value, p.value, sp.value);
  v.undefined = s.undefined || p.undefined || sp.undefined;
  return v;
}

SelectionResult select_model(const std::vector<ModelCandidate>& candidates, double tau_red,
                             double tau_uni) {
  check_config(!candidates.empty(), "select_model: empty candidate list");
  auto max_red = [](const ModelCandidate& c) {
    double m = 0;
    for (const auto& v : c.per_region) m = std::max(m, v.redundant);
    return m;
  };
  auto min_uni = [](const ModelCandidate& c) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& v : c.per_region)
      m = std::min(m, std::min(v.unique_shared, v.unique_private));
    return m;
  };
  SelectionResult res;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const auto& c = candidates[i];
    if (max_red(c) > tau_red || min_uni(c) < tau_uni) continue;
    bool better = false;
    if (res.index < 0 || c.val_loss < best_loss) {
      better = true;
    } else if (c.val_loss == best_loss) {
      const auto& cur = candidates[res.index];
      better = std::pair(c.d_sh, c.d_pr) < std::pair(cur.d_sh, cur.d_pr);
    }
    if (better) {
      res.index = i;
      best_loss = c.val_loss;
    }
  }
  if (res.index >= 0) return res;
  // Nothing survived the filters: report the least-redundant candidate.
  res.relaxed = true;
  double best_red = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    double r = max_red(candidates[i]);
    if (r < best_red) {
      best_red = r;
      res.index = i;
    }
  }
  return res;
}

double median_pairwise_distance(const Matd& x, const Matd& y) {
  Matd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const int n = static_cast<int>(pooled.rows());
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dists.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (dists.empty()) return 1.0;
  std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  return med > 1e-12 ? med : 1.0;
}

double mmd_unbiased(const Matd& x_in, const Matd& y_in, double bandwidth) {
  check_shape(x_in.cols() == y_in.cols(), "mmd: feature dimension mismatch");
  check_shape(x_in.rows() >= 2 && y_in.rows() >= 2, "mmd: both samples need at least 2 points");
  // Canonical argument order makes mmd(x, y) == mmd(y, x) bit-exact: the
  // estimator is symmetric, so only summation order could differ.
  auto arg_less = [](const Matd& a, const Matd& b) {
    if (a.rows() != b.rows()) return a.rows() < b.rows();
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a.data()[i] != b.data()[i]) return a.data()[i] < b.data()[i];
    }
    return false;
  };
  const bool swap = arg_less(y_in, x_in);
  const Matd& x = swap ? y_in : x_in;
  const Matd& y = swap ? x_in : y_in;
  const int m = static_cast<int>(x.rows());
  const int n = static_cast<int>(y.rows());
  if (bandwidth <= 0) bandwidth = median_pairwise_distance(x, y);
  const double inv2s2 = 1.0 / (2.0 * bandwidth * bandwidth);

  double kxx = 0, kyy = 0, kxy = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      kxx += std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv2s2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      kyy += std::exp(-(y.row(i) - y.row(j)).squaredNorm() * inv2s2);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      kxy += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv2s2);

  return 2.0 * kxx / (static_cast<double>(m) * (m - 1)) +
         2.0 * kyy / (static_cast<double>(n) * (n - 1)) -
         2.0 * kxy / (static_cast<double>(m) * n);
}

// --- model-based evaluation ---

namespace {

constexpr int kEvalBatch = 8;

// Runs (trial, time)-ordered pooling of a (d x T*B) batch block into rows
// [start*T, (start+B)*T) of the output.
void pool_block(const Matf& z, int T, int B, int start, Matd& out) {
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      out.row((start + b) * T + t) = z.col(t * B + b).transpose().cast<double>();
}

}  // namespace

LatentExtraction extract_latents(const SpireParams<float>& params, const Standardizer& norm,
                                 const TrialDataset& data, const std::vector<int>& trial_idx) {
  const auto& dims = params.dims;
  auto inputs = prepare_inputs(data, norm, dims.lag, trial_idx);
  const int T = static_cast<int>(inputs[0][0].cols());
  const int n = static_cast<int>(trial_idx.size());
  const auto pairs = ordered_pairs(dims.regions);

  LatentExtraction ex;
  ex.T = T;
  ex.n_trials = n;
  ex.z_sh.assign(dims.regions, Matd(n * T, dims.d_sh));
  ex.z_pr.assign(dims.regions, Matd(n * T, dims.d_pr));
  ex.z_tilde.assign(pairs.size(), Matd(n * T, dims.d_sh));

  ForwardCache<float> cache;
  std::vector<Matf> batch_x(dims.regions);
  for (int start = 0; start < n; start += kEvalBatch) {
    const int B = std::min(kEvalBatch, n - start);
    for (int r = 0; r < dims.regions; ++r) {
      batch_x[r].resize(dims.channels[r], static_cast<Eigen::Index>(T) * B);
      for (int t = 0; t < T; ++t)
        for (int b = 0; b < B; ++b) batch_x[r].col(t * B + b) = inputs[r][start + b].col(t);
    }
    spire_forward(params, batch_x, T, B, 1.0f, false, Rng(0), cache);
    for (int r = 0; r < dims.regions; ++r) {
      pool_block(cache.z_sh[r], T, B, start, ex.z_sh[r]);
      pool_block(cache.z_pr[r], T, B, start, ex.z_pr[r]);
    }
    for (std::size_t p = 0; p < pairs.size(); ++p)
      pool_block(cache.z_tilde[p], T, B, start, ex.z_tilde[p]);
  }
  return ex;
}

LatentRecovery evaluate_latent_recovery(const SpireParams<float>& params,
                                        const Standardizer& norm, const TrialDataset& data,
                                        const LatentBundle& bundle,
                                        const std::vector<int>& trial_idx) {
  if (bundle.shared.empty())
    throw DataError("latent recovery needs a dataset with ground-truth latents");
  const auto& dims = params.dims;
  LatentExtraction ex = extract_latents(params, norm, data, trial_idx);
  const int L = dims.lag;
  const int T = ex.T;
  const int n = ex.n_trials;

  LatentRecovery out;
  double sum_sh = 0, sum_pr = 0;
  for (int r = 0; r < dims.regions; ++r) {
    Matd gt_sh(n * T, bundle.d_shared), gt_pr(n * T, bundle.d_private);
    for (int i = 0; i < n; ++i) {
      const Matd& sh = bundle.shared[r][trial_idx[i]];
      const Matd& pr = bundle.private_[r][trial_idx[i]];
      check_shape(sh.rows() == T + L, "latent recovery: ground-truth length mismatch");
      gt_sh.middleRows(i * T, T) = sh.middleRows(L, T);
      gt_pr.middleRows(i * T, T) = pr.middleRows(L, T);
    }
    RecoveryRegion rr;
    rr.shared = cca_align(ex.z_sh[r], gt_sh, std::min(dims.d_sh, bundle.d_shared));
    rr.priv = cca_align(ex.z_pr[r], gt_pr, std::min(dims.d_pr, bundle.d_private));
    sum_sh += rr.shared.mean_correlation();
    sum_pr += rr.priv.mean_correlation();
    out.region.push_back(std::move(rr));
  }
  out.mean_shared = sum_sh / dims.regions;
  out.mean_private = sum_pr / dims.regions;
  return out;
}

std::vector<SubsetMse> reconstruction_report(const SpireParams<float>& params,
                                             const Standardizer& norm, const TrialDataset& data,
                                             const std::vector<int>& trial_idx) {
  const auto& dims = params.dims;
  auto inputs = prepare_inputs(data, norm, dims.lag, trial_idx);
  const int T = static_cast<int>(inputs[0][0].cols());
  const int n = static_cast<int>(trial_idx.size());
  const auto pairs = ordered_pairs(dims.regions);

  std::vector<SubsetMse> out(dims.regions);
  std::vector<double> count(dims.regions, 0);
  ForwardCache<float> cache;
  std::vector<Matf> batch_x(dims.regions);
  DecodePath<float> priv_path;
  for (int start = 0; start < n; start += kEvalBatch) {
    const int B = std::min(kEvalBatch, n - start);
    for (int r = 0; r < dims.regions; ++r) {
      batch_x[r].resize(dims.channels[r], static_cast<Eigen::Index>(T) * B);
      for (int t = 0; t < T; ++t)
        for (int b = 0; b < B; ++b) batch_x[r].col(t * B + b) = inputs[r][start + b].col(t);
    }
    spire_forward(params, batch_x, T, B, 1.0f, false, Rng(0), cache);
    for (int r = 0; r < dims.regions; ++r) {
      out[r].full += (batch_x[r] - cache.full[r].x_hat).cast<double>().squaredNorm();
      out[r].shared_self += (batch_x[r] - cache.self_[r].x_hat).cast<double>().squaredNorm();
      detail::decode_forward(params.region[r], dims.d_sh, static_cast<const Matf*>(nullptr),
                             &cache.z_pr[r], 1.0f, T, B, priv_path);
      out[r].private_only += (batch_x[r] - priv_path.x_hat).cast<double>().squaredNorm();
      count[r] += static_cast<double>(batch_x[r].size());
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      int r = pairs[p].second;
      out[r].shared_cross += (batch_x[r] - cache.cross[p].x_hat).cast<double>().squaredNorm();
    }
  }
  for (int r = 0; r < dims.regions; ++r) {
    out[r].full /= count[r];
    out[r].shared_self /= count[r];
    out[r].shared_cross /= count[r];  // one directed term per region when R == 2
    out[r].private_only /= count[r];
  }
  return out;
}

double decode_labels(const Matd& x, const std::vector<int>& labels, double split, int trees,
                     std::uint64_t seed, int cap_per_class) {
  check_shape(static_cast<int>(labels.size()) == static_cast<int>(x.rows()),
              "decode_labels: label count mismatch");
  check_config(split > 0 && split < 1, "decode_labels: split must be in (0,1)");
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw DataError("decode_labels: need at least 2 classes");

  // seeded per-class subsampling cap
  Rng rng = Rng(seed).sub(stream::forest);
  std::vector<int> keep;
  for (int cls : classes) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (labels[i] == cls) members.push_back(i);
    if (static_cast<int>(members.size()) > cap_per_class) {
      rng.shuffle(members.begin(), members.end());
      members.resize(cap_per_class);
    }
    keep.insert(keep.end(), members.begin(), members.end());
  }
  std::sort(keep.begin(), keep.end());
  rng.shuffle(keep.begin(), keep.end());

  const int n = static_cast<int>(keep.size());
  const int n_train = std::clamp(static_cast<int>(std::lround(split * n)), 1, n - 1);
  auto remap = [&](int lbl) {
    return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), lbl) -
                            classes.begin());
  };
  Matd xtr(n_train, x.cols()), xte(n - n_train, x.cols());
  std::vector<int> ytr(n_train), yte(n - n_train);
  for (int i = 0; i < n; ++i) {
    if (i < n_train) {
      xtr.row(i) = x.row(keep[i]);
      ytr[i] = remap(labels[keep[i]]);
    } else {
      xte.row(i - n_train) = x.row(keep[i]);
      yte[i - n_train] = remap(labels[keep[i]]);
    }
  }
  // standardize with train statistics only
  Vecd mu = xtr.colwise().mean().transpose();
  Vecd sd(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double v = (xtr.col(j).array() - mu[j]).square().mean();
    sd[j] = std::max(std::sqrt(v), 1e-8);
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    xtr.col(j) = (xtr.col(j).array() - mu[j]) / sd[j];
    xte.col(j) = (xte.col(j).array() - mu[j]) / sd[j];
  }

  ForestConfig fc;
  fc.n_trees = trees;
  fc.seed = seed;
  RandomForest forest;
  forest.fit(xtr, ytr, static_cast<int>(classes.size()), fc);
  return forest.accuracy(xte, yte);
}

}  // namespace spire
