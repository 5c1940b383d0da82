#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "apc/options/options.hpp"
#include "apc/planner/flat_agent.hpp"
#include "apc/planner/planner.hpp"
#include "apc/world_model/world_model.hpp"

namespace apc::harness {

inline constexpr const char* kVersion = "1.0.0";

struct ExperimentConfig {
  std::string experiment;
  std::string layout_path;  // empty: built-in 4x4 checkerboard
  std::string output_dir = "out";
  std::string checkpoint;   // empty: <output_dir>/checkpoint.apck
  std::uint64_t seed = 0;
  int threads = 1;

  // Layer lists as written in the config (input width excluded).
  std::vector<int> hypernet_layers = {16, 128, 128};
  std::vector<int> policy_layers = {64, 64, 4};
  std::vector<int> fs_layers = {128, 256, 256};
  std::vector<int> flat_layers = {128, 256, 128, 32, 4};

  options::TrainConfig options;
  wm::CollectConfig collect;
  wm::WmTrainConfig world_model;
  int wm_heldout_episodes = 100;
  plan::PlannerConfig planner;
  plan::FlatConfig flat;

  int goal_changes = 3;
  int flat_episodes_per_goal = 1000;
  int apc_episodes_per_goal = 50;
  int goal_max_room_distance = 6;  // 6 covers every room of a 4x4 building
  int moving_average_window = 20;

  int compare_max_distance = 4;
  int compare_trials = 30;

  std::vector<std::string> transfer_layouts;  // empty: built-in set
  int transfer_goals = 5;

  double gradcheck_tolerance = 1e-4;

  // Rebuilds the module configs from the layer lists and shared values and
  // checks every range. Throws ConfigError.
  void finalize();

  std::string checkpoint_path() const;
  // [43, fs_layers..., 27]; the second entry is the LSTM.
  nn::NetworkSpec fs_spec() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// `key = value` lines; blank lines and lines starting with '#' are skipped.
// Errors are reported as "name:line: message".
KeyValues parse_key_values(std::istream& in, const std::string& name = "<config>");

// Applies one key; throws ConfigError for an unknown key or a bad value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

ExperimentConfig load_config(const std::string& path);

// Every key in sorted order, one `key=value` per line.
std::string canonical_text(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace apc::harness
