#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "apc/common/rng.hpp"

namespace apc::nn {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

enum class Activation : std::int32_t { kLinear = 0, kRelu = 1, kElu = 2, kTanh = 3 };

std::string_view to_string(Activation a);

/// Layer layout of a fully connected network with at most one LSTM layer.
///
/// `widths` starts with the input width; weight layer `k` maps
/// `widths[k]` to `widths[k + 1]` and applies `activations[k]`. The layer at
/// `recurrent_layer` is an LSTM cell whose output is its hidden state, so its
/// activation tag must be `kTanh`.
struct NetworkSpec {
  std::vector<int> widths;
  std::vector<Activation> activations;
  std::optional<int> recurrent_layer;

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  bool is_recurrent() const { return recurrent_layer.has_value(); }
  int recurrent_width() const;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

// Where one weight layer lives inside the flat parameter array. Matrices are
// column-major with `rows()` rows.
struct LayerBlock {
  int fan_in = 0;
  int fan_out = 0;
  bool recurrent = false;
  std::size_t weights = 0;
  std::size_t recurrent_weights = 0;  // only meaningful when recurrent
  std::size_t bias = 0;
  std::size_t end = 0;

  // LSTM layers stack the input, forget, cell and output gates.
  int rows() const { return recurrent ? 4 * fan_out : fan_out; }
};

std::vector<LayerBlock> manifest(const NetworkSpec& spec);
std::size_t param_count(const NetworkSpec& spec);

struct LayerParams {
  Eigen::MatrixXd weights;
  Eigen::MatrixXd recurrent_weights;  // empty for dense layers
  Eigen::VectorXd bias;

  bool operator==(const LayerParams& o) const {
    return weights == o.weights && recurrent_weights == o.recurrent_weights && bias == o.bias;
  }
};

/// Flat parameter array plus the spec that gives it shape.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(NetworkSpec spec);
  ParamVector(NetworkSpec spec, std::vector<double> values);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerBlock>& layers() const { return blocks_; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<LayerParams> unpack() const;
  static ParamVector pack(const NetworkSpec& spec, const std::vector<LayerParams>& layers);

  bool operator==(const ParamVector& o) const { return spec_ == o.spec_ && values_ == o.values_; }

 private:
  NetworkSpec spec_;
  std::vector<LayerBlock> blocks_;
  std::vector<double> values_;
};

/// He-normal weights for ReLU/eLU layers, 1/fan_in variance for linear and
/// tanh layers, uniform(+-1/sqrt(h)) for LSTM gates with forget bias 1.
/// Biases start at zero.
ParamVector init_params(const NetworkSpec& spec, Rng& rng);

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(int width) { return {Vector::Zero(width), Vector::Zero(width)}; }
};

/// Record of the intermediates of one or more forward steps, consumed by a
/// single call to `backward`. The tape refers to the ParamVector used in the
/// forward pass, which must outlive it.
class Tape {
 public:
  std::size_t steps() const { return steps_.size(); }
  bool consumed() const { return consumed_; }
  bool empty() const { return steps_.empty(); }

 private:
  struct LayerRecord {
    Vector input;
    Vector pre;  // pre-activation (dense) or gate pre-activations (LSTM)
    Vector out;
    // LSTM only: post-nonlinearity gates [i, f, g, o], previous states, cell.
    Vector gates;
    Vector h_prev;
    Vector c_prev;
    Vector c;
  };

  const ParamVector* params_ = nullptr;
  std::vector<std::vector<LayerRecord>> steps_;
  bool consumed_ = false;

  friend struct TapeAccess;
};

struct ForwardPass {
  Vector output;
  Tape tape;
};

// Forward pass of a non-recurrent network. Throws ConfigError on a width
// mismatch or when `params` describes a recurrent network.
ForwardPass dense_forward(const ParamVector& params, const VectorRef& input);

// Same as dense_forward without recording a tape.
Vector dense_eval(const ParamVector& params, const VectorRef& input);

struct RecurrentOutput {
  Vector output;
  LstmState hidden;
};

// One time step of a recurrent network. When `tape` is given the step is
// appended to it so that a later backward call runs BPTT over every step.
RecurrentOutput recurrent_step(const ParamVector& params, const VectorRef& input,
                               const LstmState& hidden, Tape* tape = nullptr);

struct Gradients {
  std::vector<double> params;
  std::vector<Vector> inputs;  // one per recorded step
};

// Reverse accumulation over every recorded step; `output_grads[t]` is dL/dy_t.
// Throws std::logic_error on an empty or already consumed tape.
Gradients backward(Tape& tape, std::span<const Vector> output_grads);
Gradients backward(Tape& tape, const Vector& output_grad);

}  // namespace apc::nn
