#pragma once

#include <span>

#include <Eigen/Core>

#include "apc/nn/network.hpp"

namespace apc::nn {

using Matrix = Eigen::MatrixXd;

// One LSTM state per column.
struct BatchLstmState {
  Matrix h;
  Matrix c;

  static BatchLstmState zeros(int width, int batch) { return {Matrix::Zero(width, batch), Matrix::Zero(width, batch)}; }
  int batch() const { return static_cast<int>(h.cols()); }
  // Columns `cols` in order; an index may repeat.
  BatchLstmState gather(std::span<const int> cols) const;
};

// Column j of the result equals the single-input forward of column j of
// `inputs`. `hidden` is required for recurrent networks and updated in place.
Matrix batch_forward(const ParamVector& params, const Matrix& inputs, BatchLstmState* hidden = nullptr);

}  // namespace apc::nn
