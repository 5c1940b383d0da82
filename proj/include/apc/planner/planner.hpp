#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "apc/common/rng.hpp"
#include "apc/gridworld/gridworld.hpp"
#include "apc/nn/batch.hpp"
#include "apc/world_model/world_model.hpp"

namespace apc::plan {

struct Goal {
  grid::Pos room;
  grid::Corner corner = grid::Corner::kNW;

  grid::Pos cell() const;
  bool operator==(const Goal&) const = default;
};

// Goal for a cell that is an interior corner of some room.
Goal goal_at(const grid::BuildingLayout& layout, grid::Pos cell);

enum class Sampling {
  kUniform,     // each step draws one of the eight options
  kByRoomType,  // each step draws a corner; the type follows the imagined room
};

struct PlannerConfig {
  int horizon = 4;
  int num_trajectories = 1024;
  double per_option_cost = -0.4;
  double goal_bonus = 10.0;
  // Optional weight of -||final room - goal room|| (in slots) for sequences
  // that miss the goal in imagination. Off by default: without it a plan that
  // finds no goal falls back to the first sampled (random) sequence.
  double distance_weight = 0.0;
  Sampling sampling = Sampling::kByRoomType;
  bool exhaustive = false;  // enumerate every sequence instead of sampling
  bool snap = true;         // binarize image and snap location between imagined steps
  Goal goal;
  int max_options = 100;  // safety cap; planning repeats until the goal is reached
  int t1_max = 20;
  int max_primitive_steps = 400;  // low-level planner cap
  std::uint64_t seed = 0;

  void validate() const;
};

// High-level dynamics used in imagination, one column per rollout.
class HighLevelModel {
 public:
  explicit HighLevelModel(const grid::BuildingLayout& layout) : rooms_h_(layout.rooms_h()), rooms_w_(layout.rooms_w()) {}
  virtual ~HighLevelModel() = default;

  virtual nn::BatchLstmState initial_memory(int batch) const = 0;
  virtual nn::Matrix predict(const nn::Matrix& states, std::span<const int> options, nn::BatchLstmState& memory) const = 0;

  int rooms_h() const { return rooms_h_; }
  int rooms_w() const { return rooms_w_; }

 private:
  int rooms_h_;
  int rooms_w_;
};

// Learned F_s with predictions clamped to [0, 1].
class LearnedModel final : public HighLevelModel {
 public:
  LearnedModel(const wm::WorldModel& model, const grid::BuildingLayout& layout);
  nn::BatchLstmState initial_memory(int batch) const override;
  nn::Matrix predict(const nn::Matrix& states, std::span<const int> options, nn::BatchLstmState& memory) const override;

 private:
  const wm::WorldModel* model_;
  nn::Matrix embeddings_;  // one column per option
};

// Exact room-level transitions of perfectly executed options.
class OracleModel final : public HighLevelModel {
 public:
  explicit OracleModel(const grid::BuildingLayout& layout) : HighLevelModel(layout), layout_(&layout) {}
  nn::BatchLstmState initial_memory(int batch) const override;
  nn::Matrix predict(const nn::Matrix& states, std::span<const int> options, nn::BatchLstmState& memory) const override;

 private:
  const grid::BuildingLayout* layout_;
};

// Nearest slot of the state's location.
grid::Pos state_room(const HighLevelModel& model, const nn::VectorRef& state);
// Template whose image is closest to the state's binarized image (R1 on ties).
grid::RoomType state_room_type(const nn::VectorRef& state);
// Corner an option lands on after crossing its door.
grid::Corner landing_corner(grid::RoomType type, grid::Corner corner);

struct PlanResult {
  std::vector<int> options;                 // truncated after an imagined goal
  std::vector<nn::Vector> predicted_states;  // one per option
  double total_reward = 0.0;
  bool goal_reached_in_imagination = false;
};

// Reward per step: per_option_cost, plus goal_bonus when the option passes
// the goal corner inside the goal room or lands on it after crossing; nothing
// accrues after the goal. Non-goal sequences add the distance term at the end.
PlanResult imagined_rollout(const HighLevelModel& model, const nn::VectorRef& r0, std::span<const int> options,
                            const PlannerConfig& config);

// Random-shooting MPC: best of N sequences (ties to the lowest index). Each
// sequence draws from its own sub-stream of one value taken from `rng`, so a
// larger N only adds sequences. Exhaustive mode enumerates in lexicographic order.
PlanResult mpc_plan(const HighLevelModel& model, const nn::VectorRef& r0, const PlannerConfig& config, Rng& rng);

struct NavigationRecord {
  int planning_steps = 0;
  int primitive_steps = 0;
  bool reached = false;
  double episode_reward = 0.0;  // (reached ? 10 : 0) - 0.1 * primitive_steps
  std::vector<int> options;     // executed, in order; empty for the low-level planner
  std::vector<grid::Pos> trail;  // low-level planner: cell after each action
};

double episode_reward(bool reached, int primitive_steps);

// Plan, execute the first option greedily in the real building, repeat until
// the goal cell is reached or max_options plans were made.
NavigationRecord navigate(const grid::BuildingLayout& layout, grid::Pos start, const HighLevelModel& model,
                          const std::vector<nn::ParamVector>& thetas, const PlannerConfig& config, Rng& rng);

// Primitive-action MPC with the true step function: N random action
// sequences of length `horizon`, scored by their rewards minus the Euclidean
// distance from the final cell to the goal; executes one action per plan.
NavigationRecord low_level_mpc(const grid::BuildingLayout& layout, grid::Pos start, grid::Pos goal_cell,
                               const PlannerConfig& config, Rng& rng);

std::string navigation_csv_header();
std::string navigation_csv_row(int run_id, int goal_distance, const NavigationRecord& rec);

}  // namespace apc::plan
