#include "apc/nn/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "apc/common/errors.hpp"

namespace apc::nn {

std::vector<double> finite_diff_grad(const LossFn& loss, std::span<const double> params, double eps) {
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = loss(p);
    p[i] = saved - eps;
    const double down = loss(p);
    p[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ConfigError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

double norm_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("norm_relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace apc::nn
