#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apc/common/rng.hpp"
#include "apc/gridworld/gridworld.hpp"
#include "apc/hypernet/hypernet.hpp"
#include "apc/nn/network.hpp"

namespace apc::wm {

inline constexpr int kStateWidth = grid::kImageCells + 2;  // 27

// Room image followed by the room location normalized by (H - 1, W - 1);
// a single-slot axis maps to 0.
nn::Vector encode_room(const grid::BuildingLayout& layout, grid::Pos room);
nn::Vector encode_high_state(const grid::BuildingLayout& layout, grid::Pos cell, std::optional<grid::Pos> last_room = std::nullopt);

// Nearest slot to a normalized location, clamped to the grid.
grid::Pos decode_location(const grid::BuildingLayout& layout, const nn::VectorRef& state);
// Image entries thresholded at 0.5.
std::array<std::uint8_t, grid::kImageCells> binarize_image(const nn::VectorRef& state);

// [27 + option width, 128, LSTM 256, 256, 27] with relu, LSTM, elu, linear.
nn::NetworkSpec default_fs_spec(int option_width = hyper::kEmbeddingWidth);

struct WorldModel {
  nn::ParamVector params;

  int option_width() const { return params.spec().input_width() - kStateWidth; }
  nn::LstmState zero_hidden() const { return nn::LstmState::zeros(params.spec().recurrent_width()); }
};

WorldModel init_world_model(Rng& rng, const nn::NetworkSpec& spec = default_fs_spec());

struct FsOutput {
  nn::Vector state;  // prediction with every entry clamped to [0, 1]
  nn::LstmState hidden;
};

FsOutput fs_step(const WorldModel& model, const nn::VectorRef& state, const nn::VectorRef& option,
                 const nn::LstmState& hidden);

struct Transition {
  nn::Vector state;
  int option_index = 0;
  nn::Vector next;
};

struct Episode {
  std::vector<Transition> steps;
};

struct TransitionDataset {
  std::vector<Episode> episodes;

  std::size_t size() const;
};

struct CollectConfig {
  int episodes = 200;
  int options_per_episode = 8;
  int t1_max = 20;
};

// Random options executed greedily from random interior starts; one
// transition per option boundary. Timeouts are recorded where they end.
TransitionDataset execute_and_collect(const grid::BuildingLayout& layout, const std::vector<nn::ParamVector>& thetas,
                                      const CollectConfig& config, Rng& rng);

bool episodes_chain(const TransitionDataset& data);

struct WmTrainConfig {
  double lr = 5e-4;
  int epochs = 60;
  std::uint64_t seed = 0;
};

struct WmTrainResult {
  WorldModel model;
  std::vector<double> epoch_loss;  // mean per-transition MSE of each epoch
};

// Adam on the per-entry MSE of the raw output, backpropagated through each
// whole episode; one update per episode, episodes shuffled every epoch.
WmTrainResult train_world_model(const TransitionDataset& data, const WmTrainConfig& config,
                                const nn::NetworkSpec& spec = default_fs_spec());
WmTrainResult train_world_model(const TransitionDataset& data, const WmTrainConfig& config, WorldModel init);

// Mean over steps and entries of (y_t - target_t)^2 for a recurrent net run
// from a zero hidden state; fills `grad` (BPTT) when given.
double sequence_mse(const nn::ParamVector& params, std::span<const nn::Vector> inputs,
                    std::span<const nn::Vector> targets, std::vector<double>* grad);

// Mean-square error of one episode and its parameter gradient.
double episode_mse(const WorldModel& model, const Episode& ep, std::vector<double>* grad);

struct Fidelity {
  std::size_t transitions = 0;
  double image_exact = 0.0;     // fraction with every binarized pixel right
  double location_exact = 0.0;  // fraction within half a slot on both axes
  double max_location_error = 0.0;  // in slots
  double mse = 0.0;
};

// Teacher-forced one-step evaluation with the hidden state reset per episode.
Fidelity evaluate_world_model(const WorldModel& model, const TransitionDataset& data, const grid::BuildingLayout& layout);

std::string dataset_csv_header();
void write_dataset_csv(std::ostream& out, const TransitionDataset& data);

}  // namespace apc::wm
