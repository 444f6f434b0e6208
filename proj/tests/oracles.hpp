#pragma once

// Independent reference implementations used as oracles by the tests and
// the acceptance suite. Everything here is written as plain loops against
// the definitions, deliberately avoiding the library's production code
// paths, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <spire/mat.hpp>

namespace oracle {

using spire::Matd;
using spire::Vecd;

// Per-element mean squared error.
inline double mse(const Matd& x, const Matd& y) {
  double acc = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double d = x(i, j) - y(i, j);
      acc += d * d;
    }
  return acc / static_cast<double>(x.size());
}

inline double row_mean(const Matd& z, int j) {
  double m = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) m += z(j, i);
  return m / static_cast<double>(z.cols());
}

inline double row_var_unbiased(const Matd& z, int j) {
  double mu = row_mean(z, j), acc = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) acc += (z(j, i) - mu) * (z(j, i) - mu);
  return acc / static_cast<double>(z.cols() - 1);
}

// VICReg on (features x samples) inputs with normalized coefficients.
inline double vicreg(const Matd& a, const Matd& b, double ci, double cv, double cc,
                     double gamma = 1.0, double eps = 1e-4) {
  const double sum = ci + cv + cc;
  const int d = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  double inv = 0;
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) inv += (a(j, i) - b(j, i)) * (a(j, i) - b(j, i));
  inv /= static_cast<double>(d * n);

  auto var_term = [&](const Matd& z) {
    double v = 0;
    for (int j = 0; j < d; ++j) v += std::max(0.0, gamma - std::sqrt(row_var_unbiased(z, j) + eps));
    return v / d;
  };
  auto cov_term = [&](const Matd& z) {
    std::vector<double> mu(d);
    for (int j = 0; j < d; ++j) mu[j] = row_mean(z, j);
    double c = 0;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        if (j == k) continue;
        double cov = 0;
        for (int i = 0; i < n; ++i) cov += (z(j, i) - mu[j]) * (z(k, i) - mu[k]);
        cov /= (n - 1);
        c += cov * cov;
      }
    return c / d;
  };
  return (ci * inv + cv * 0.5 * (var_term(a) + var_term(b)) +
          cc * 0.5 * (cov_term(a) + cov_term(b))) /
         sum;
}

// Frobenius norm^2 of the cross-covariance of per-feature standardized rows.
inline double orthogonality(const Matd& zsh, const Matd& zpr) {
  const int n = static_cast<int>(zsh.cols());
  auto standardize = [&](const Matd& z) {
    Matd out = z;
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      double mu = row_mean(z, static_cast<int>(j));
      double sd = std::max(std::sqrt(row_var_unbiased(z, static_cast<int>(j))), 1e-8);
      for (int i = 0; i < n; ++i) out(j, i) = (z(j, i) - mu) / sd;
    }
    return out;
  };
  Matd a = standardize(zsh), b = standardize(zpr);
  double acc = 0;
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    for (Eigen::Index k = 0; k < b.rows(); ++k) {
      double cov = 0;
      for (int i = 0; i < n; ++i) cov += a(j, i) * b(k, i);
      cov /= (n - 1);
      acc += cov * cov;
    }
  return acc;
}

inline double var_guard_shared(const Matd& z) {
  double acc = 0;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    double dev = std::sqrt(row_var_unbiased(z, static_cast<int>(j))) - 1.0;
    acc += dev * dev;
  }
  return acc;
}

inline double var_guard_private(const Matd& z, double tau) {
  double acc = 0;
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    double gap = tau - std::sqrt(row_var_unbiased(z, static_cast<int>(j)));
    if (gap > 0) acc += gap * gap;
  }
  return acc;
}

inline double mapper_identity(const Matd& m) {
  double acc = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double d = m(i, j) - (i == j ? 1.0 : 0.0);
      acc += d * d;
    }
  return acc;
}

inline double convalign_reg(const Matd& k) {
  const Eigen::Index center = k.cols() / 2;
  double acc = 0;
  for (Eigen::Index j = 0; j < k.rows(); ++j) {
    double ssum = 0;
    for (Eigen::Index i = 0; i < k.cols(); ++i) {
      double d = k(j, i) - (i == center ? 1.0 : 0.0);
      acc += d * d;
      ssum += k(j, i);
    }
    acc += (ssum - 1.0) * (ssum - 1.0);
  }
  return acc;
}

// Sample autocorrelation at a given lag (mean removed).
inline double sample_autocorr(const Vecd& x, int lag) {
  const int t_count = static_cast<int>(x.size());
  double mu = x.mean();
  double num = 0, den = 0;
  for (int t = 0; t < t_count; ++t) den += (x[t] - mu) * (x[t] - mu);
  for (int t = 0; t + lag < t_count; ++t) num += (x[t] - mu) * (x[t + lag] - mu);
  return num / den;
}

// Naive periodogram (direct DFT) averaged over series; log-log slope fit
// over [f_lo, f_hi].
inline double psd_slope(const std::vector<Vecd>& series, double fs, double f_lo, double f_hi) {
  const int t_count = static_cast<int>(series[0].size());
  const int k_max = t_count / 2;
  std::vector<double> power(k_max + 1, 0.0);
  for (const auto& x : series) {
    for (int k = 1; k <= k_max; ++k) {
      std::complex<double> acc(0, 0);
      for (int t = 0; t < t_count; ++t)
        acc += x[t] * std::exp(std::complex<double>(0, -2.0 * M_PI * k * t / t_count));
      power[k] += std::norm(acc) / t_count;
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int k = 1; k <= k_max; ++k) {
    double f = k * fs / t_count;
    if (f < f_lo || f > f_hi) continue;
    double lx = std::log(f), ly = std::log(power[k] / series.size());
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double pearson(const Vecd& a, const Vecd& b) {
  double ma = a.mean(), mb = b.mean();
  double num = 0, da = 0, db = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

inline double spearman(const Vecd& a, const Vecd& b) {
  auto ranks = [](const Vecd& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[i] < v[j]; });
    Vecd r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  Vecd ra = ranks(a), rb = ranks(b);
  return pearson(ra, rb);
}

// Best integer lag of b relative to a within a window: b(t) ~ a(t - lag).
inline int window_lag(const Vecd& a, const Vecd& b, int lo, int hi, int max_lag) {
  int best = 0;
  double best_score = -2;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double num = 0, da = 0, db = 0;
    int n = 0;
    for (int t = lo; t < hi; ++t) {
      int ta = t - lag;
      if (ta < 0 || ta >= static_cast<int>(a.size())) continue;
      num += a[ta] * b[t];
      da += a[ta] * a[ta];
      db += b[t] * b[t];
      ++n;
    }
    if (n < 4 || da <= 0 || db <= 0) continue;
    double score = num / std::sqrt(da * db);
    if (score > best_score) {
      best_score = score;
      best = lag;
    }
  }
  return best;
}

// Triple-loop unbiased MMD^2 with Gaussian kernel.
inline double brute_mmd(const Matd& x, const Matd& y, double sigma) {
  const int m = static_cast<int>(x.rows());
  const int n = static_cast<int>(y.rows());
  auto k = [&](const Matd& a, int i, const Matd& b, int j) {
    double d2 = 0;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      d2 += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
    return std::exp(-d2 / (2 * sigma * sigma));
  };
  double xx = 0, yy = 0, xy = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) xx += k(x, i, x, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) yy += k(y, i, y, j);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) xy += k(x, i, y, j);
  return xx / (static_cast<double>(m) * (m - 1)) + yy / (static_cast<double>(n) * (n - 1)) -
         2.0 * xy / (static_cast<double>(m) * n);
}

// In-sample ridge FVE (rows = samples) used to probe linear identifiability.
inline double ridge_fve_insample(const Matd& z, const Matd& y, double lambda = 1e-8) {
  Vecd zm = z.colwise().mean().transpose();
  Vecd ym = y.colwise().mean().transpose();
  Matd zc = z.rowwise() - zm.transpose();
  Matd yc = y.rowwise() - ym.transpose();
  Matd gram = zc.transpose() * zc +
              lambda * Matd::Identity(z.cols(), z.cols()) * zc.squaredNorm() / z.cols();
  Matd w = gram.ldlt().solve(zc.transpose() * yc);
  double sse = (yc - zc * w).squaredNorm();
  double sst = yc.squaredNorm();
  return 1.0 - sse / sst;
}

// Fraction of total variance carried by the first principal component.
inline double pca_first_ratio(const Matd& x) {
  Vecd mu = x.colwise().mean().transpose();
  Matd c = x.rowwise() - mu.transpose();
  Matd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matd> eig(cov);
  return eig.eigenvalues().maxCoeff() / eig.eigenvalues().sum();
}

}  // namespace oracle
