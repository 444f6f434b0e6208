#include "spire/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spire/errors.hpp"
#include "spire/rng.hpp"

namespace spire {

namespace {

struct TreeBuilder {
  const Matd& x;
  const std::vector<int>& y;
  int n_classes;
  const ForestConfig& cfg;
  int mtry;
  Rng rng;
  std::vector<RandomForest::Node>* nodes = nullptr;

  struct Split {
    int feature = -1;
    double threshold = 0;
    double gain = 0;
  };

  int majority(const std::vector<int>& idx) const {
    std::vector<int> counts(n_classes, 0);
    for (int i : idx) ++counts[y[i]];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  static double gini(const std::vector<int>& counts, int total) {
    if (total == 0) return 0;
    double g = 1.0;
    for (int c : counts) {
      double p = static_cast<double>(c) / total;
      g -= p * p;
    }
    return g;
  }

  Split best_split(std::vector<int>& idx) const {
    const int n = static_cast<int>(idx.size());
    std::vector<int> total_counts(n_classes, 0);
    for (int i : idx) ++total_counts[y[i]];
    const double parent = gini(total_counts, n);

    // sample features without replacement
    std::vector<int> feats(static_cast<std::size_t>(x.cols()));
    std::iota(feats.begin(), feats.end(), 0);
    Rng fr = const_cast<TreeBuilder*>(this)->rng.sub(static_cast<std::uint64_t>(idx[0]) * 2654435761u + n);
    fr.shuffle(feats.begin(), feats.end());
    feats.resize(std::min<std::size_t>(feats.size(), static_cast<std::size_t>(mtry)));

    Split best;
    std::vector<std::pair<double, int>> vals(n);
    std::vector<int> left_counts(n_classes);
    for (int f : feats) {
      for (int i = 0; i < n; ++i) vals[i] = {x(idx[i], f), y[idx[i]]};
      std::sort(vals.begin(), vals.end());
      std::fill(left_counts.begin(), left_counts.end(), 0);
      for (int i = 0; i + 1 < n; ++i) {
        ++left_counts[vals[i].second];
        if (vals[i].first == vals[i + 1].first) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
        double gl = gini(left_counts, nl);
        std::vector<int> right_counts(n_classes);
        for (int c = 0; c < n_classes; ++c) right_counts[c] = total_counts[c] - left_counts[c];
        double gr = gini(right_counts, nr);
        double gain = parent - (nl * gl + nr * gr) / n;
        if (gain > best.gain + 1e-15) {
          best.gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    return best;
  }

  int build(std::vector<int> idx, int depth) {
    const int me = static_cast<int>(nodes->size());
    nodes->push_back({});
    bool pure = true;
    for (std::size_t i = 1; i < idx.size(); ++i)
      if (y[idx[i]] != y[idx[0]]) {
        pure = false;
        break;
      }
    if (pure || depth >= cfg.max_depth || static_cast<int>(idx.size()) < 2 * cfg.min_leaf) {
      (*nodes)[me].label = majority(idx);
      return me;
    }
    Split s = best_split(idx);
    if (s.feature < 0) {
      (*nodes)[me].label = majority(idx);
      return me;
    }
    std::vector<int> left, right;
    for (int i : idx) (x(i, s.feature) <= s.threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) {
      (*nodes)[me].label = majority(idx);
      return me;
    }
    (*nodes)[me].feature = s.feature;
    (*nodes)[me].threshold = s.threshold;
    int l = build(std::move(left), depth + 1);
    int r = build(std::move(right), depth + 1);
    (*nodes)[me].left = l;
    (*nodes)[me].right = r;
    return me;
  }
};

}  // namespace

void RandomForest::fit(const Matd& x, const std::vector<int>& y, int n_classes,
                       const ForestConfig& cfg) {
  check_shape(static_cast<int>(y.size()) == static_cast<int>(x.rows()),
              "forest: label count mismatch");
  check_config(n_classes >= 2, "forest: need at least 2 classes");
  n_classes_ = n_classes;
  trees_.clear();
  trees_.resize(cfg.n_trees);
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int mtry = cfg.mtry > 0 ? std::min(cfg.mtry, d)
                                : std::max(1, static_cast<int>(std::ceil(std::sqrt(d))));
  Rng root = Rng(cfg.seed).sub(stream::forest);
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng tr = root.sub(static_cast<std::uint64_t>(t));
    std::vector<int> boot(n);
    for (int i = 0; i < n; ++i) boot[i] = static_cast<int>(tr.uniform_int(n));
    TreeBuilder builder{x, y, n_classes, cfg, mtry, tr.sub(1), &trees_[t]};
    builder.build(std::move(boot), 0);
  }
}

int RandomForest::predict(const Vecd& v) const {
  std::vector<int> votes(n_classes_, 0);
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[node].label < 0)
      node = v[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
    ++votes[tree[node].label];
  }
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

double RandomForest::accuracy(const Matd& x, const std::vector<int>& y) const {
  check_shape(static_cast<int>(y.size()) == static_cast<int>(x.rows()),
              "forest: label count mismatch");
  int correct = 0;
  for (int i = 0; i < static_cast<int>(x.rows()); ++i)
    if (predict(x.row(i).transpose()) == y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace spire
