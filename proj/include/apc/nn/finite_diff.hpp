#pragma once

#include <functional>
#include <span>
#include <vector>

namespace apc::nn {

using LossFn = std::function<double(std::span<const double>)>;

// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) per coordinate.
std::vector<double> finite_diff_grad(const LossFn& loss, std::span<const double> params, double eps);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
// whose true gradient is ~0 from dominating the ratio.
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

// ||a - b|| / max(||a||, ||b||), Euclidean norms.
double norm_relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace apc::nn
