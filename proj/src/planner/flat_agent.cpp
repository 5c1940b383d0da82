#include "apc/planner/flat_agent.hpp"

#include <cmath>

#include "apc/common/errors.hpp"
#include "apc/nn/categorical.hpp"
#include "apc/planner/planner.hpp"

namespace apc::plan {

using grid::Pos;
using nn::Vector;

nn::NetworkSpec default_flat_spec() {
  using nn::Activation;
  return {{2, 128, 256, 128, 32, grid::kNumActions},
          {Activation::kRelu, Activation::kTanh, Activation::kRelu, Activation::kRelu, Activation::kLinear},
          1};
}

void FlatConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lr_agent > 0.0) || !(lr_baseline > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lambda_l2 >= 0.0)) throw ConfigError("lambda_l2 must be non-negative");
  if (t_max < 1 || baseline_hidden < 1) throw ConfigError("t_max and baseline_hidden must be positive");
  policy.validate();
  if (!policy.is_recurrent() || policy.input_width() != 2 || policy.output_width() != grid::kNumActions)
    throw ConfigError("flat policy must be recurrent and map 2 inputs to 4 actions");
}

FlatAgent init_flat_agent(const FlatConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, {0xf1a7});
  FlatAgent a{nn::init_params(config.policy, rng), nn::init_params(options::baseline_spec(2, config.baseline_hidden), rng),
              {}, {}};
  a.policy_adam = nn::AdamState::zeros(a.policy.size(), config.lr_agent);
  a.baseline_adam = nn::AdamState::zeros(a.baseline.size(), config.lr_baseline);
  return a;
}

Vector flat_input(const grid::BuildingLayout& layout, Pos cell) {
  Vector x(2);
  x << static_cast<double>(cell.r) / std::max(layout.rows() - 1, 1), static_cast<double>(cell.c) / std::max(layout.cols() - 1, 1);
  return x;
}

int act_flat(const FlatAgent& agent, const nn::VectorRef& input, nn::LstmState& hidden, options::ActionMode mode, Rng* rng) {
  auto out = nn::recurrent_step(agent.policy, input, hidden);
  hidden = std::move(out.hidden);
  if (mode == options::ActionMode::kGreedy) return nn::argmax(out.output);
  if (!rng) throw ConfigError("sampled actions need an rng");
  return nn::categorical_sample(out.output, *rng);
}

options::LossAndGrad flat_policy_grad(const nn::ParamVector& policy, std::span<const Vector> inputs,
                                      std::span<const int> actions, std::span<const double> advantages, double lambda) {
  if (inputs.size() != actions.size() || inputs.size() != advantages.size())
    throw ConfigError("flat reinforce: inputs, actions and advantages differ in length");
  options::LossAndGrad out;
  if (inputs.empty()) {
    out.grad.assign(policy.size(), 0.0);
    return out;
  }
  nn::Tape tape;
  auto hidden = nn::LstmState::zeros(policy.spec().recurrent_width());
  std::vector<Vector> dys;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto step = nn::recurrent_step(policy, inputs[t], hidden, &tape);
    hidden = std::move(step.hidden);
    const Vector& z = step.output;
    out.loss += -nn::categorical_log_prob(z, actions[t]) * advantages[t] + lambda * z.squaredNorm();
    dys.push_back(-advantages[t] * nn::categorical_log_prob_grad(z, actions[t]) + 2.0 * lambda * z);
  }
  out.grad = nn::backward(tape, dys).params;
  return out;
}

FlatEpisode flat_episode(FlatAgent& agent, const grid::BuildingLayout& layout, const FlatConfig& config, Rng& rng) {
  std::vector<Vector> inputs;
  std::vector<int> actions;
  std::vector<double> rewards;
  auto hidden = nn::LstmState::zeros(agent.policy.spec().recurrent_width());
  Pos cell = layout.start();
  FlatEpisode ep;
  while (ep.steps < config.t_max && cell != layout.goal()) {
    inputs.push_back(flat_input(layout, cell));
    const int a = act_flat(agent, inputs.back(), hidden, options::ActionMode::kSample, &rng);
    const auto sr = grid::step(layout, cell, static_cast<grid::Action>(a));
    actions.push_back(a);
    rewards.push_back(sr.reward);
    cell = sr.next;
    ++ep.steps;
  }
  ep.reached = cell == layout.goal();
  ep.reward = episode_reward(ep.reached, ep.steps);
  if (inputs.empty()) return ep;

  const auto returns = options::discounted_returns(rewards, config.gamma);
  std::vector<double> adv(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) adv[t] = returns[t] - options::baseline_value(agent.baseline, inputs[t]);
  auto bl = options::baseline_mse_grad(agent.baseline, inputs, returns);
  auto pg = flat_policy_grad(agent.policy, inputs, actions, adv, config.lambda_l2);
  if (!std::isfinite(pg.loss) || !std::isfinite(bl.loss)) throw NumericError("non-finite flat-agent loss");
  nn::adam_step(agent.baseline_adam, agent.baseline.values(), bl.grad);
  nn::adam_step(agent.policy_adam, agent.policy.values(), pg.grad);
  ep.loss = pg.loss;
  return ep;
}

FlatTrainResult train_flat_rl(const grid::BuildingLayout& layout, const FlatConfig& config, int episodes) {
  FlatTrainResult res{init_flat_agent(config), {}};
  for (int e = 0; e < episodes; ++e) {
    Rng rng = make_rng(config.seed, {0xe915, static_cast<std::uint64_t>(e)});
    res.curve.push_back(flat_episode(res.agent, layout, config, rng));
  }
  return res;
}

}  // namespace apc::plan
