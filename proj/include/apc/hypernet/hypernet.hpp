#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "apc/common/rng.hpp"
#include "apc/gridworld/gridworld.hpp"
#include "apc/nn/network.hpp"

namespace apc::hyper {

inline constexpr int kNumOptions = 8;
inline constexpr int kEmbeddingWidth = 16;
inline constexpr int kLocalCells = grid::kRoomSize * grid::kRoomSize;

// [9, 64, 64, 4], relu/relu/linear: one-hot local cell in, action logits out.
nn::NetworkSpec default_policy_spec();
// Trunk widths start with the embedding width.
std::vector<int> default_trunk_widths();  // {16, 128, 128}

// Trunk widths with relu activations followed by one linear layer whose
// output is the target network's full parameter vector.
nn::NetworkSpec make_hypernet_spec(const nn::NetworkSpec& target, const std::vector<int>& trunk);

/// Option identity: indices 0..3 are the NW, NE, SW, SE corners of R1 and
/// 4..7 the same corners of R2. Canonical values are one-hot over the first
/// eight slots, zero-padded to the embedding width.
struct OptionEmbedding {
  nn::Vector values;
  int option_index = 0;
  grid::Corner corner = grid::Corner::kNW;
  grid::RoomType room_type = grid::RoomType::kR1;

  static OptionEmbedding canonical(int index, int width = kEmbeddingWidth);
};

int option_index(grid::RoomType type, grid::Corner corner);

struct HypernetModel {
  nn::NetworkSpec policy_spec;
  nn::ParamVector params;

  int embedding_width() const { return params.spec().input_width(); }
};

// Trunk layers use fan-in scaling. The final layer is split into one head
// per generated weight matrix and bias: weight heads are scaled so that, for
// a one-hot embedding, each generated weight has variance 2 / fan_in of the
// policy layer it feeds; bias heads start at zero.
HypernetModel init_hypernet(Rng& rng, const nn::NetworkSpec& policy = default_policy_spec(),
                            const std::vector<int>& trunk = default_trunk_widths());

// Expected mean square of the last trunk activation for a unit-norm input.
double trunk_output_mean_square(const nn::NetworkSpec& hypernet);

struct GeneratedPolicy {
  nn::ParamVector theta;
  nn::Tape tape;  // hypernet tape; backward(tape, dL/dtheta) gives dL/dhypernet
};

GeneratedPolicy generate_with_tape(const HypernetModel& model, const nn::VectorRef& embedding);
nn::ParamVector generate_policy_params(const HypernetModel& model, const nn::VectorRef& embedding);
nn::ParamVector generate_policy_params(const HypernetModel& model, const OptionEmbedding& option);

nn::Vector local_onehot(grid::Pos local);
nn::Vector policy_logits(const nn::ParamVector& theta, const nn::VectorRef& input);

// Tagged network block: "APCN", uint32 kind, then for hypernets the target
// network manifest, then an APCP1 parameter block.
enum class NetworkKind : std::uint32_t { kDirect = 1, kHypernet = 2 };

struct StoredNetwork {
  NetworkKind kind = NetworkKind::kDirect;
  std::optional<nn::NetworkSpec> generates;
  nn::ParamVector params;
};

void write_network(std::ostream& out, const nn::ParamVector& params);
void write_network(std::ostream& out, const HypernetModel& model);
StoredNetwork read_network(std::istream& in);
nn::ParamVector read_direct(std::istream& in);
HypernetModel read_hypernet(std::istream& in);

}  // namespace apc::hyper
