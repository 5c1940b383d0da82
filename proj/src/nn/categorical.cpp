#include "apc/nn/categorical.hpp"

#include <cmath>
#include <stdexcept>

#include "apc/common/errors.hpp"

namespace apc::nn {

namespace {

void require_finite(const VectorRef& logits) {
  if (logits.size() == 0) throw ConfigError("empty logits");
  if (!logits.allFinite()) throw NumericError("non-finite logits");
}

}  // namespace

Vector log_softmax(const VectorRef& logits) {
  require_finite(logits);
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

Vector softmax(const VectorRef& logits) { return log_softmax(logits).array().exp().matrix(); }

int categorical_sample(const VectorRef& logits, Rng& rng) {
  const Vector p = softmax(logits);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  // u landed in the rounding gap above the cumulative sum.
  for (Eigen::Index i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

double categorical_log_prob(const VectorRef& logits, int index) {
  if (index < 0 || index >= logits.size()) throw std::out_of_range("categorical index out of range");
  return log_softmax(logits)[index];
}

Vector categorical_log_prob_grad(const VectorRef& logits, int index) {
  if (index < 0 || index >= logits.size()) throw std::out_of_range("categorical index out of range");
  Vector g = -softmax(logits);
  g[index] += 1.0;
  return g;
}

int argmax(const VectorRef& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace apc::nn
