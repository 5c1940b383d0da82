#pragma once

#include <span>

#include "apc/common/rng.hpp"
#include "apc/nn/network.hpp"

namespace apc::nn {

Vector softmax(const VectorRef& logits);
Vector log_softmax(const VectorRef& logits);

// Index drawn with probability softmax(logits). Throws NumericError on a
// non-finite logit.
int categorical_sample(const VectorRef& logits, Rng& rng);

// log softmax(logits)[index]. Throws std::out_of_range for a bad index.
double categorical_log_prob(const VectorRef& logits, int index);

// d/dlogits of categorical_log_prob: onehot(index) - softmax(logits).
Vector categorical_log_prob_grad(const VectorRef& logits, int index);

// First index of the largest logit.
int argmax(const VectorRef& values);

}  // namespace apc::nn
