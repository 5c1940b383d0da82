#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "apc/common/rng.hpp"
#include "apc/gridworld/gridworld.hpp"
#include "apc/nn/adam.hpp"
#include "apc/nn/network.hpp"
#include "apc/options/options.hpp"

namespace apc::plan {

// [2, 128, LSTM 256, 128, 32, 4]: relu, LSTM, relu, relu, linear.
nn::NetworkSpec default_flat_spec();

struct FlatConfig {
  double gamma = 0.99;
  double lr_agent = 1e-3;
  double lr_baseline = 1e-3;
  double lambda_l2 = 5e-3;
  int t_max = 100;  // primitive steps per episode
  int baseline_hidden = 64;
  nn::NetworkSpec policy = default_flat_spec();
  std::uint64_t seed = 0;

  void validate() const;
};

struct FlatAgent {
  nn::ParamVector policy;
  nn::ParamVector baseline;  // value of the location input
  nn::AdamState policy_adam;
  nn::AdamState baseline_adam;
};

FlatAgent init_flat_agent(const FlatConfig& config);

// Global (row, col) normalized by the map extent.
nn::Vector flat_input(const grid::BuildingLayout& layout, grid::Pos cell);

int act_flat(const FlatAgent& agent, const nn::VectorRef& input, nn::LstmState& hidden, options::ActionMode mode, Rng* rng);

// sum_t [ -log pi(a_t | x_0..t) * adv_t + lambda * ||logits_t||^2 ] through
// the recurrent policy from a zero state; gradient by BPTT.
options::LossAndGrad flat_policy_grad(const nn::ParamVector& policy, std::span<const nn::Vector> inputs,
                                      std::span<const int> actions, std::span<const double> advantages, double lambda);

struct FlatEpisode {
  double reward = 0.0;  // (reached ? 10 : 0) - 0.1 * steps
  int steps = 0;
  bool reached = false;
  double loss = 0.0;
};

// One sampled episode from layout.start() towards layout.goal(), then one
// baseline and one policy update.
FlatEpisode flat_episode(FlatAgent& agent, const grid::BuildingLayout& layout, const FlatConfig& config, Rng& rng);

struct FlatTrainResult {
  FlatAgent agent;
  std::vector<FlatEpisode> curve;
};

// Episode e draws from the sub-stream (seed, e).
FlatTrainResult train_flat_rl(const grid::BuildingLayout& layout, const FlatConfig& config, int episodes);

}  // namespace apc::plan
