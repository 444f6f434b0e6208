#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spire/mat.hpp"
#include "spire/model.hpp"
#include "spire/synthgen.hpp"
#include "spire/trainer.hpp"

namespace spire {

// ---------------------------------------------------------------------------
// Quantitative evaluation: CCA alignment against ground truth, cross-
// validated FVE with the order-free variance partition and model selection,
// reconstruction subsets, unbiased MMD, and timepoint-level label decoding.
// Sample matrices are rows-by-features (N x d).
// ---------------------------------------------------------------------------

struct CcaResult {
  Vecd correlations;  // non-increasing, clamped to [0, 1]
  Matd basis_a, basis_b;  // applied to centered inputs; variates = (Z - mu) * basis
  Vecd mean_a, mean_b;
  Vecd pearson_aligned;  // per-dimension Pearson r between aligned variates
  bool rank_deficient = false;

  double mean_correlation() const {
    return correlations.size() == 0 ? 0.0 : correlations.mean();
  }
};

// Canonical correlations via whitened cross-covariance SVD with a relative
// ridge on the covariance diagonals. Invariant to invertible linear
// transforms of either input up to numerical tolerance.
CcaResult cca_align(const Matd& za, const Matd& zb, int k, double ridge_eps = 1e-6);

struct FveResult {
  double value = 0;
  bool undefined = false;  // degenerate target variance
};

// Cross-validated fraction of variance explained by ridge regression
// z -> y. ridge_lambda < 0 selects 1e-3 * trace(z^T z) / d.
FveResult fve(const Matd& z, const Matd& y, double ridge_lambda = -1, int n_folds = 5,
              std::uint64_t seed = 0);

struct VariancePartition {
  double fve_s = 0, fve_p = 0, fve_sp = 0;
  double unique_shared = 0, unique_private = 0, redundant = 0;
  bool undefined = false;
};

// The clipped identities, exact for any FVE triple.
VariancePartition partition_from_fve(double fve_s, double fve_p, double fve_sp);

VariancePartition variance_partition(const Matd& z_sh, const Matd& z_pr, const Matd& y,
                                     double ridge_lambda = -1, int n_folds = 5,
                                     std::uint64_t seed = 0);

struct ModelCandidate {
  int d_sh = 0, d_pr = 0;
  std::vector<VariancePartition> per_region;
  double val_loss = 0;
  std::string name;
};

struct SelectionResult {
  int index = -1;
  bool relaxed = false;  // no candidate passed the filters
};

// Filters by redundancy threshold and collapse guard, then picks the lowest
// validation loss, preferring smaller (d_sh, d_pr) in ties. If nothing
// survives, returns the candidate minimizing max redundancy, flagged.
SelectionResult select_model(const std::vector<ModelCandidate>& candidates,
                             double tau_red = 0.20, double tau_uni = 0.01);

// Median pairwise Euclidean distance of the pooled rows (the bandwidth
// heuristic for the Gaussian kernel).
double median_pairwise_distance(const Matd& x, const Matd& y);

// Unbiased squared-MMD estimate with Gaussian kernel exp(-||a-b||^2/(2s^2));
// within-set diagonal terms excluded, so small negatives are expected under
// the null. bandwidth <= 0 selects the median heuristic.
double mmd_unbiased(const Matd& x, const Matd& y, double bandwidth = -1);

// --- model-based evaluation ---

struct LatentExtraction {
  std::vector<Matd> z_sh, z_pr;  // per region, (N x d), rows ordered (trial, time)
  std::vector<Matd> z_tilde;     // per ordered pair
  int T = 0;                     // post-lag sequence length
  int n_trials = 0;
};

LatentExtraction extract_latents(const SpireParams<float>& params, const Standardizer& norm,
                                 const TrialDataset& data, const std::vector<int>& trial_idx);

struct RecoveryRegion {
  CcaResult shared;
  CcaResult priv;
};

struct LatentRecovery {
  std::vector<RecoveryRegion> region;
  double mean_shared = 0;   // mean canonical correlation, averaged over regions
  double mean_private = 0;
};

// CCA between encoder latents (pre-aligner) pooled over held-out trials and
// the ground-truth trajectories, truncated by the lag augmentation (first
// `lag` samples dropped).
LatentRecovery evaluate_latent_recovery(const SpireParams<float>& params,
                                        const Standardizer& norm, const TrialDataset& data,
                                        const LatentBundle& bundle,
                                        const std::vector<int>& trial_idx);

struct SubsetMse {
  double full = 0;
  double shared_self = 0;
  double shared_cross = 0;
  double private_only = 0;
};

// Per-region held-out reconstruction errors from latent subsets; excluded
// latents are zeroed at the decoder input.
std::vector<SubsetMse> reconstruction_report(const SpireParams<float>& params,
                                             const Standardizer& norm, const TrialDataset& data,
                                             const std::vector<int>& trial_idx);

// Random-forest decoding of timepoint-level labels (80/20 split with
// train-fitted standardization). Returns held-out accuracy.
double decode_labels(const Matd& x, const std::vector<int>& labels, double split = 0.8,
                     int trees = 100, std::uint64_t seed = 0, int cap_per_class = 50000);

}  // namespace spire
