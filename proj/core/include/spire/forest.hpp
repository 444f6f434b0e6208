#pragma once

#include <cstdint>
#include <vector>

#include "spire/mat.hpp"

namespace spire {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 16;
  int min_leaf = 2;
  int mtry = -1;  // features tried per split; -1 means ceil(sqrt(d))
  std::uint64_t seed = 0;
};

// Plain CART random forest (Gini, bootstrap resampling, majority vote).
class RandomForest {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0;
    int left = -1, right = -1;
    int label = -1;  // leaf when >= 0
  };

  void fit(const Matd& x, const std::vector<int>& y, int n_classes, const ForestConfig& cfg);
  int predict(const Vecd& x) const;
  double accuracy(const Matd& x, const std::vector<int>& y) const;

 private:
  std::vector<std::vector<Node>> trees_;
  int n_classes_ = 0;
};

}  // namespace spire
