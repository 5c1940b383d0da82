#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apc/common/rng.hpp"
#include "apc/gridworld/gridworld.hpp"
#include "apc/hypernet/hypernet.hpp"
#include "apc/nn/adam.hpp"
#include "apc/nn/network.hpp"

namespace apc::options {

struct TrainConfig {
  double gamma = 0.99;
  double lr_agent = 1e-3;
  double lr_baseline = 1e-3;
  double lambda_l2 = 5e-3;
  int t1_max = 20;
  int episodes_per_option = 5000;
  std::uint64_t seed = 0;
  std::vector<int> hypernet_trunk = hyper::default_trunk_widths();
  nn::NetworkSpec policy = hyper::default_policy_spec();
  int baseline_hidden = 64;

  void validate() const;
};

// Cell where an option invoked in `room` ends: the cell across the option
// template's door next to its corner, or the corner itself when that door is
// not open in this layout (outer wall, solid neighbour, or a room type whose
// door sits elsewhere).
grid::Pos option_subgoal(const grid::BuildingLayout& layout, grid::Pos room, int option_index);

// Rooms of the option's type whose option door is open: the training starts.
std::vector<grid::Pos> training_rooms(const grid::BuildingLayout& layout, int option_index);

struct StepRecord {
  grid::Pos local;  // policy input cell
  int action = 0;
  double log_prob = 0.0;
  double logits_sq_norm = 0.0;
  double reward = 0.0;
};

struct Trajectory {
  int option_index = 0;
  std::vector<StepRecord> steps;
  std::vector<double> returns;
  bool success = false;  // reached the option's subgoal
  grid::Pos end;
  grid::Pos end_room;    // room whose interior the agent last occupied

  double total_reward() const;
};

enum class ActionMode { kSample, kGreedy };

// Runs one option from `start` until it reaches its subgoal, enters another
// room's interior, or T1_max steps pass. Rewards are local: +10 on the
// subgoal step, -0.1 otherwise. `frame_room` defaults to the room containing
// `start`. Greedy mode ignores `rng`.
Trajectory rollout_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index,
                          grid::Pos start, std::optional<grid::Pos> frame_room, int t1_max, double gamma,
                          ActionMode mode, Rng* rng);
Trajectory rollout_option(const grid::BuildingLayout& layout, const hyper::HypernetModel& hnet, int option_index,
                          grid::Pos start, const TrainConfig& config, Rng& rng);

struct Execution {
  grid::Pos end;
  grid::Pos end_room;
  int steps = 0;
  double env_reward = 0.0;  // sum of environment step rewards
  bool goal_reached = false;
  bool subgoal_reached = false;
};

// Greedy execution in the real environment; optionally stops early on the
// layout goal.
Execution execute_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index,
                         grid::Pos start, std::optional<grid::Pos> frame_room, int t1_max, bool stop_at_goal = true);

// theta for all eight canonical options, generated once.
std::vector<nn::ParamVector> generate_all(const hyper::HypernetModel& hnet);

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// L = sum_t [ -log pi(a_t | x_t) * adv_t + lambda * ||logits_t||^2 ] with the
// advantages held constant. Gradient is with respect to theta.
LossAndGrad reinforce_policy_grad(const nn::ParamVector& theta, std::span<const nn::Vector> inputs,
                                  std::span<const int> actions, std::span<const double> advantages, double lambda);

// Same loss with theta = H(embedding); gradient with respect to the hypernet.
LossAndGrad reinforce_hypernet_grad(const hyper::HypernetModel& hnet, const nn::VectorRef& embedding,
                                    std::span<const nn::Vector> inputs, std::span<const int> actions,
                                    std::span<const double> advantages, double lambda);

nn::NetworkSpec baseline_spec(int input_width = hyper::kLocalCells, int hidden = 64);
double baseline_value(const nn::ParamVector& baseline, const nn::VectorRef& input);

// mean_t (b(x_t) - target_t)^2 and its gradient.
LossAndGrad baseline_mse_grad(const nn::ParamVector& baseline, std::span<const nn::Vector> inputs,
                              std::span<const double> targets);

// Loss value of a recorded trajectory under `baseline` (advantage G - b).
double reinforce_loss(const Trajectory& traj, const nn::ParamVector& baseline, double lambda);

struct CurveRow {
  int episode = 0;
  int option_index = 0;
  double episode_reward = 0.0;
  int episode_steps = 0;
  double loss = 0.0;
  double baseline_mse = 0.0;
  bool success = false;
};

struct TrainedOptions {
  hyper::HypernetModel hnet;
  std::vector<nn::ParamVector> baselines;  // one per option
  std::vector<CurveRow> curve;
};

// Episodes cycle through the eight options; each episode runs one rollout
// from a uniform start in a random training room, one baseline regression
// step and one Adam step on the hypernet. Throws NumericError with a dump of
// the offending episode on a non-finite loss.
TrainedOptions train_options(const grid::BuildingLayout& layout, const TrainConfig& config);

struct OptionEval {
  int option_index = 0;
  int starts = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;      // over successful starts
  double mean_bfs_steps = 0.0;  // shortest paths over the same starts
};

// Greedy evaluation from every interior cell of every training room.
OptionEval evaluate_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index, int t1_max);

std::string curve_csv_header();
std::string curve_csv_row(const CurveRow& row);

}  // namespace apc::options
