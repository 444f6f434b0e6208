#pragma once

#include <Eigen/Dense>

namespace spire {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matf = Mat<float>;
using Vecf = Vec<float>;
using Matd = Mat<double>;
using Vecd = Vec<double>;

// A batch of equally long sequences, stored channels-by-(time*batch).
// Column t * batch + b holds sample t of sequence b, so the B columns of a
// timestep are contiguous and per-step recurrence is one block GEMM.
template <typename S>
struct SeqBatch {
  Mat<S> data;
  int time = 0;
  int batch = 0;

  int channels() const { return static_cast<int>(data.rows()); }
  auto step(int t) { return data.middleCols(t * batch, batch); }
  auto step(int t) const { return data.middleCols(t * batch, batch); }
};

}  // namespace spire
