#include "apc/nn/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "apc/common/errors.hpp"

namespace apc::nn {

using Eigen::Map;
using Eigen::MatrixXd;

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kElu: return "elu";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

int NetworkSpec::recurrent_width() const {
  return recurrent_layer ? widths[*recurrent_layer + 1] : 0;
}

void NetworkSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("network needs an input width and at least one layer");
  for (int w : widths) {
    if (w < 1) throw ConfigError("network widths must be positive");
  }
  if (static_cast<int>(activations.size()) != num_layers()) {
    throw ConfigError("expected " + std::to_string(num_layers()) + " activation tags, got " +
                      std::to_string(activations.size()));
  }
  for (Activation a : activations) {
    const auto v = static_cast<std::int32_t>(a);
    if (v < 0 || v > 3) throw ConfigError("unknown activation tag " + std::to_string(v));
  }
  if (recurrent_layer) {
    if (*recurrent_layer < 0 || *recurrent_layer >= num_layers()) {
      throw ConfigError("recurrent layer index out of range");
    }
    if (activations[*recurrent_layer] != Activation::kTanh) {
      throw ConfigError("recurrent layer must carry the tanh tag");
    }
  }
}

std::vector<LayerBlock> manifest(const NetworkSpec& spec) {
  spec.validate();
  std::vector<LayerBlock> blocks;
  std::size_t offset = 0;
  for (int k = 0; k < spec.num_layers(); ++k) {
    LayerBlock b;
    b.fan_in = spec.widths[k];
    b.fan_out = spec.widths[k + 1];
    b.recurrent = spec.recurrent_layer == k;
    b.weights = offset;
    offset += static_cast<std::size_t>(b.rows()) * b.fan_in;
    if (b.recurrent) {
      b.recurrent_weights = offset;
      offset += static_cast<std::size_t>(b.rows()) * b.fan_out;
    }
    b.bias = offset;
    offset += b.rows();
    b.end = offset;
    blocks.push_back(b);
  }
  return blocks;
}

std::size_t param_count(const NetworkSpec& spec) { return manifest(spec).back().end; }

ParamVector::ParamVector(NetworkSpec spec)
    : spec_(std::move(spec)), blocks_(manifest(spec_)), values_(blocks_.back().end, 0.0) {}

ParamVector::ParamVector(NetworkSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), blocks_(manifest(spec_)), values_(std::move(values)) {
  if (values_.size() != blocks_.back().end) {
    throw ConfigError("parameter vector has " + std::to_string(values_.size()) +
                      " values but the spec requires " + std::to_string(blocks_.back().end));
  }
}

std::vector<LayerParams> ParamVector::unpack() const {
  std::vector<LayerParams> out;
  for (const auto& b : blocks_) {
    LayerParams p;
    p.weights = Map<const MatrixXd>(values_.data() + b.weights, b.rows(), b.fan_in);
    if (b.recurrent) {
      p.recurrent_weights = Map<const MatrixXd>(values_.data() + b.recurrent_weights, b.rows(), b.fan_out);
    }
    p.bias = Map<const Vector>(values_.data() + b.bias, b.rows());
    out.push_back(std::move(p));
  }
  return out;
}

ParamVector ParamVector::pack(const NetworkSpec& spec, const std::vector<LayerParams>& layers) {
  ParamVector pv(spec);
  if (layers.size() != pv.blocks_.size()) throw ConfigError("layer count does not match spec");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& b = pv.blocks_[k];
    const auto& p = layers[k];
    if (p.weights.rows() != b.rows() || p.weights.cols() != b.fan_in || p.bias.size() != b.rows() ||
        (b.recurrent && (p.recurrent_weights.rows() != b.rows() || p.recurrent_weights.cols() != b.fan_out))) {
      throw ConfigError("layer " + std::to_string(k) + " shape does not match spec");
    }
    Map<MatrixXd>(pv.values_.data() + b.weights, b.rows(), b.fan_in) = p.weights;
    if (b.recurrent) {
      Map<MatrixXd>(pv.values_.data() + b.recurrent_weights, b.rows(), b.fan_out) = p.recurrent_weights;
    }
    Map<Vector>(pv.values_.data() + b.bias, b.rows()) = p.bias;
  }
  return pv;
}

ParamVector init_params(const NetworkSpec& spec, Rng& rng) {
  ParamVector pv(spec);
  auto& v = pv.values();
  for (std::size_t k = 0; k < pv.layers().size(); ++k) {
    const auto& b = pv.layers()[k];
    if (b.recurrent) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_out));
      for (std::size_t i = b.weights; i < b.bias; ++i) v[i] = (2.0 * uniform01(rng) - 1.0) * bound;
      // forget gate occupies rows [h, 2h)
      for (int i = b.fan_out; i < 2 * b.fan_out; ++i) v[b.bias + i] = 1.0;
      continue;
    }
    const Activation act = spec.activations[k];
    const double gain = (act == Activation::kRelu || act == Activation::kElu) ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / b.fan_in);
    for (std::size_t i = b.weights; i < b.bias; ++i) v[i] = stddev * standard_normal(rng);
  }
  return pv;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void apply_activation(Activation a, const Vector& pre, Vector& out) {
  switch (a) {
    case Activation::kLinear: out = pre; break;
    case Activation::kRelu: out = pre.cwiseMax(0.0); break;
    case Activation::kElu: out = pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); }); break;
    case Activation::kTanh: out = pre.array().tanh(); break;
  }
}

// dL/dpre given dL/dout.
void activation_backward(Activation a, const Vector& pre, const Vector& out, Vector& grad) {
  switch (a) {
    case Activation::kLinear: break;
    case Activation::kRelu:
      for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (pre[i] <= 0.0) grad[i] = 0.0;
      }
      break;
    case Activation::kElu:
      for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (pre[i] <= 0.0) grad[i] *= out[i] + 1.0;
      }
      break;
    case Activation::kTanh: grad.array() *= 1.0 - out.array().square(); break;
  }
}

void check_input(const ParamVector& params, const VectorRef& input) {
  if (input.size() != params.spec().input_width()) {
    throw ConfigError("input width " + std::to_string(input.size()) + " does not match network input " +
                      std::to_string(params.spec().input_width()));
  }
}

}  // namespace

struct TapeAccess {
  using Record = Tape::LayerRecord;

  // Runs every layer for one step. `hidden` is read and updated for the
  // recurrent layer. Records intermediates when `rec` is non-null.
  static Vector run(const ParamVector& params, const VectorRef& input, LstmState* hidden,
                    std::vector<Record>* rec) {
    const double* p = params.values().data();
    const auto& spec = params.spec();
    Vector x = input;
    for (std::size_t k = 0; k < params.layers().size(); ++k) {
      const auto& b = params.layers()[k];
      Map<const MatrixXd> w(p + b.weights, b.rows(), b.fan_in);
      Map<const Vector> bias(p + b.bias, b.rows());
      Record r;
      Vector pre = bias;
      pre.noalias() += w * x;
      Vector out;
      if (b.recurrent) {
        Map<const MatrixXd> u(p + b.recurrent_weights, b.rows(), b.fan_out);
        pre.noalias() += u * hidden->h;
        const int h = b.fan_out;
        Vector gates(4 * h);
        for (int i = 0; i < h; ++i) {
          gates[i] = sigmoid(pre[i]);
          gates[h + i] = sigmoid(pre[h + i]);
          gates[2 * h + i] = std::tanh(pre[2 * h + i]);
          gates[3 * h + i] = sigmoid(pre[3 * h + i]);
        }
        Vector c = gates.segment(h, h).cwiseProduct(hidden->c) +
                   gates.segment(0, h).cwiseProduct(gates.segment(2 * h, h));
        out = gates.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix());
        if (rec) {
          r.gates = gates;
          r.h_prev = hidden->h;
          r.c_prev = hidden->c;
          r.c = c;
        }
        hidden->h = out;
        hidden->c = std::move(c);
      } else {
        apply_activation(spec.activations[k], pre, out);
      }
      if (rec) {
        r.input = std::move(x);
        r.pre = std::move(pre);
        r.out = out;
        rec->push_back(std::move(r));
      }
      x = std::move(out);
    }
    return x;
  }

  static void begin(Tape& tape, const ParamVector& params) {
    if (tape.consumed_) throw std::logic_error("tape already consumed by a backward pass");
    if (tape.params_ && tape.params_ != &params) {
      throw std::logic_error("tape was recorded against a different parameter vector");
    }
    tape.params_ = &params;
  }

  static std::vector<std::vector<Record>>& steps(Tape& tape) { return tape.steps_; }

  static Gradients backward(Tape& tape, std::span<const Vector> output_grads) {
    if (tape.consumed_) throw std::logic_error("stale tape: backward already ran on it");
    if (tape.steps_.empty() || !tape.params_) throw std::logic_error("backward on an empty tape");
    if (output_grads.size() != tape.steps_.size()) {
      throw ConfigError("expected one output gradient per recorded step");
    }
    tape.consumed_ = true;
    const ParamVector& params = *tape.params_;
    const auto& spec = params.spec();
    const double* p = params.values().data();
    Gradients g;
    g.params.assign(params.size(), 0.0);
    g.inputs.resize(tape.steps_.size());
    double* gp = g.params.data();

    const int rw = spec.recurrent_width();
    Vector dh_next = Vector::Zero(rw);
    Vector dc_next = Vector::Zero(rw);

    for (std::size_t t = tape.steps_.size(); t-- > 0;) {
      auto& recs = tape.steps_[t];
      if (output_grads[t].size() != spec.output_width()) {
        throw ConfigError("output gradient width does not match network output");
      }
      Vector dy = output_grads[t];
      for (std::size_t k = recs.size(); k-- > 0;) {
        const auto& b = params.layers()[k];
        const Record& r = recs[k];
        Map<const MatrixXd> w(p + b.weights, b.rows(), b.fan_in);
        Map<MatrixXd> gw(gp + b.weights, b.rows(), b.fan_in);
        Map<Vector> gb(gp + b.bias, b.rows());
        Vector dz;
        if (b.recurrent) {
          const int h = b.fan_out;
          const Vector dh = dy + dh_next;
          const auto i_g = r.gates.segment(0, h).array();
          const auto f_g = r.gates.segment(h, h).array();
          const auto c_g = r.gates.segment(2 * h, h).array();
          const auto o_g = r.gates.segment(3 * h, h).array();
          const Eigen::ArrayXd tc = r.c.array().tanh();
          const Eigen::ArrayXd dc = dh.array() * o_g * (1.0 - tc.square()) + dc_next.array();
          dz.resize(4 * h);
          dz.segment(0, h) = (dc * c_g * i_g * (1.0 - i_g)).matrix();
          dz.segment(h, h) = (dc * r.c_prev.array() * f_g * (1.0 - f_g)).matrix();
          dz.segment(2 * h, h) = (dc * i_g * (1.0 - c_g.square())).matrix();
          dz.segment(3 * h, h) = (dh.array() * tc * o_g * (1.0 - o_g)).matrix();
          dc_next = (dc * f_g).matrix();
          Map<const MatrixXd> u(p + b.recurrent_weights, b.rows(), b.fan_out);
          Map<MatrixXd> gu(gp + b.recurrent_weights, b.rows(), b.fan_out);
          gu.noalias() += dz * r.h_prev.transpose();
          dh_next.noalias() = u.transpose() * dz;
        } else {
          dz = std::move(dy);
          activation_backward(spec.activations[k], r.pre, r.out, dz);
        }
        gw.noalias() += dz * r.input.transpose();
        gb += dz;
        dy.noalias() = w.transpose() * dz;
      }
      g.inputs[t] = std::move(dy);
    }
    return g;
  }
};

ForwardPass dense_forward(const ParamVector& params, const VectorRef& input) {
  if (params.spec().is_recurrent()) throw ConfigError("dense_forward called on a recurrent network");
  check_input(params, input);
  ForwardPass fp;
  TapeAccess::begin(fp.tape, params);
  auto& steps = TapeAccess::steps(fp.tape);
  steps.emplace_back();
  fp.output = TapeAccess::run(params, input, nullptr, &steps.back());
  return fp;
}

Vector dense_eval(const ParamVector& params, const VectorRef& input) {
  if (params.spec().is_recurrent()) throw ConfigError("dense_eval called on a recurrent network");
  check_input(params, input);
  return TapeAccess::run(params, input, nullptr, nullptr);
}

RecurrentOutput recurrent_step(const ParamVector& params, const VectorRef& input, const LstmState& hidden,
                               Tape* tape) {
  const auto& spec = params.spec();
  if (!spec.is_recurrent()) throw ConfigError("recurrent_step called on a feed-forward network");
  check_input(params, input);
  const int rw = spec.recurrent_width();
  if (hidden.h.size() != rw || hidden.c.size() != rw) {
    throw ConfigError("hidden state width does not match the recurrent layer (" + std::to_string(rw) + ")");
  }
  RecurrentOutput out{Vector(), hidden};
  std::vector<TapeAccess::Record>* rec = nullptr;
  if (tape) {
    TapeAccess::begin(*tape, params);
    rec = &TapeAccess::steps(*tape).emplace_back();
  }
  out.output = TapeAccess::run(params, input, &out.hidden, rec);
  return out;
}

Gradients backward(Tape& tape, std::span<const Vector> output_grads) {
  return TapeAccess::backward(tape, output_grads);
}

Gradients backward(Tape& tape, const Vector& output_grad) {
  return TapeAccess::backward(tape, std::span<const Vector>(&output_grad, 1));
}

}  // namespace apc::nn
