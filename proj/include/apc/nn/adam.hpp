#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace apc::nn {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros(std::size_t size, double learning_rate);
};

// Bias-corrected Adam update applied in place. A gradient with any non-finite
// entry is rejected with NumericError before anything is modified.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

}  // namespace apc::nn
