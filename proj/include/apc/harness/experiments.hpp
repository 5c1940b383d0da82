#pragma once

#include <string>
#include <vector>

#include "apc/harness/checkpoint.hpp"
#include "apc/harness/config.hpp"
#include "apc/options/options.hpp"
#include "apc/planner/planner.hpp"
#include "apc/world_model/world_model.hpp"

namespace apc::harness {

// 4x4 rooms, R1 where row + col is even.
grid::BuildingLayout checkerboard_layout(int rooms_h = 4, int rooms_w = 4, bool flip = false);
// config.layout_path, or the 4x4 checkerboard when it is empty.
grid::BuildingLayout base_layout(const ExperimentConfig& config);
// Three R1/R2 buildings that differ from the base layout.
std::vector<grid::BuildingLayout> builtin_transfer_layouts();

// Mastery thresholds shared by the CLI and the acceptance run.
inline constexpr double kMasterySuccess = 0.95;
inline constexpr double kMasteryExtraSteps = 1.0;
inline constexpr double kImageAccuracy = 0.95;
inline constexpr double kMaxLocationError = 0.5;  // slots
inline constexpr double kPlateauFraction = 0.9;
inline constexpr int kRecoveryEpisodes = 10;
inline constexpr int kFlatStayBelow = 500;
inline constexpr double kTransferSuccessBand = 0.02;
inline constexpr double kTransferReachRate = 0.9;
inline constexpr double kLowLevelRatio = 3.0;

struct TrainOptionsSummary {
  std::vector<options::OptionEval> evals;
  bool passed = false;
};
TrainOptionsSummary run_train_options(const ExperimentConfig& config);

struct WorldModelSummary {
  std::vector<double> epoch_loss;
  wm::Fidelity heldout;
  bool passed = false;
};
WorldModelSummary run_train_worldmodel(const ExperimentConfig& config);

struct GoalSegment {
  plan::Goal goal;
  std::vector<double> apc_rewards;
  std::vector<double> flat_rewards;
  double apc_plateau = 0.0;    // median APC reward of the segment
  int apc_recovery = -1;       // first episode (0-based) at >= 90% of the plateau
                               // (a plateau <= 0 never counts as recovered)
  double flat_plateau = 0.0;   // mean of the last 100 flat rewards of the segment
  double flat_post_max = 0.0;  // max moving average over the first 500 episodes
  bool apc_ok = false;         // only judged after a change
  bool flat_ok = false;
};
struct GoalChangeSummary {
  std::vector<GoalSegment> segments;
  bool apc_passed = false;
  bool flat_passed = false;
  bool passed() const { return apc_passed && flat_passed; }
};
GoalChangeSummary run_goal_change(const ExperimentConfig& config);

struct DistanceRow {
  int distance = 0;
  int trials = 0;
  double apc_mean = 0.0, apc_std = 0.0, apc_reach = 0.0;
  double low_mean = 0.0, low_std = 0.0, low_reach = 0.0;
};
struct PlanCompareSummary {
  std::vector<DistanceRow> rows;
  double apc_slope = 0.0;  // least squares over d >= 1
  double apc_intercept = 0.0;
  bool passed = false;
};
PlanCompareSummary run_plan_compare(const ExperimentConfig& config);

struct TransferLayoutResult {
  std::string name;
  double option_success = 0.0;  // mean over the eight options
  double base_success = 0.0;
  double max_option_gap = 0.0;  // max |new - base| over options
  int navigations = 0;
  int reached = 0;
  wm::Fidelity fidelity;
  std::vector<plan::NavigationRecord> records;
};
struct TransferSummary {
  std::vector<TransferLayoutResult> layouts;
  double reach_rate = 0.0;
  bool passed = false;
};
TransferSummary run_transfer(const ExperimentConfig& config);

struct GradcheckRow {
  std::string loss;
  int params = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};
struct GradcheckSummary {
  std::vector<GradcheckRow> rows;
  bool passed = false;
};
// REINFORCE through the hypernet, F_s sequence MSE and baseline MSE on small
// random nets (<= 200 parameters each).
GradcheckSummary run_gradcheck(const ExperimentConfig& config);

}  // namespace apc::harness
