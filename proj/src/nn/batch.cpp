#include "apc/nn/batch.hpp"

#include <cmath>
#include <string>

#include "apc/common/errors.hpp"

namespace apc::nn {

using Eigen::Map;

BatchLstmState BatchLstmState::gather(std::span<const int> cols) const {
  BatchLstmState out{Matrix(h.rows(), static_cast<Eigen::Index>(cols.size())),
                     Matrix(c.rows(), static_cast<Eigen::Index>(cols.size()))};
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.h.col(j) = h.col(cols[j]);
    out.c.col(j) = c.col(cols[j]);
  }
  return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix batch_forward(const ParamVector& params, const Matrix& inputs, BatchLstmState* hidden) {
  const auto& spec = params.spec();
  if (inputs.rows() != spec.input_width())
    throw ConfigError("batch input width " + std::to_string(inputs.rows()) + " does not match network input " +
                      std::to_string(spec.input_width()));
  if (spec.is_recurrent()) {
    const int rw = spec.recurrent_width();
    if (!hidden || hidden->h.rows() != rw || hidden->c.rows() != rw || hidden->h.cols() != inputs.cols() ||
        hidden->c.cols() != inputs.cols())
      throw ConfigError("batch hidden state does not match the recurrent layer and batch size");
  }
  const double* p = params.values().data();
  const Eigen::Index n = inputs.cols();
  Matrix x = inputs;
  for (std::size_t k = 0; k < params.layers().size(); ++k) {
    const auto& b = params.layers()[k];
    Map<const Matrix> w(p + b.weights, b.rows(), b.fan_in);
    Map<const Vector> bias(p + b.bias, b.rows());
    Matrix pre = bias.replicate(1, n);
    pre.noalias() += w * x;
    if (b.recurrent) {
      Map<const Matrix> u(p + b.recurrent_weights, b.rows(), b.fan_out);
      pre.noalias() += u * hidden->h;
      const int h = b.fan_out;
      auto i_g = pre.topRows(h).unaryExpr(&sigmoid);
      auto f_g = pre.middleRows(h, h).unaryExpr(&sigmoid);
      auto o_g = pre.bottomRows(h).unaryExpr(&sigmoid);
      Matrix c = f_g.cwiseProduct(hidden->c) + i_g.cwiseProduct(pre.middleRows(2 * h, h).array().tanh().matrix());
      x = o_g.cwiseProduct(c.array().tanh().matrix());
      hidden->h = x;
      hidden->c = std::move(c);
      continue;
    }
    switch (spec.activations[k]) {
      case Activation::kLinear: x = std::move(pre); break;
      case Activation::kRelu: x = pre.cwiseMax(0.0); break;
      case Activation::kElu: x = pre.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); }); break;
      case Activation::kTanh: x = pre.array().tanh(); break;
    }
  }
  return x;
}

}  // namespace apc::nn
