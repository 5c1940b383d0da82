#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "apc/gridworld/gridworld.hpp"
#include "apc/hypernet/hypernet.hpp"
#include "apc/nn/network.hpp"
#include "apc/world_model/world_model.hpp"

namespace apc::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_text;  // canonical config of the run that wrote it
  grid::BuildingLayout layout;
  hyper::HypernetModel hnet;
  std::vector<nn::ParamVector> baselines;  // one per option
  std::optional<wm::WorldModel> world_model;
};

// "APCK", uint32 version, payload, then the CRC-32 of everything before it.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
// Throws ConfigError when the file is missing and FormatError on a bad
// magic, a version mismatch or a checksum failure. Nothing is returned on error.
Checkpoint load_checkpoint(const std::string& path);

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name = "<checkpoint>");

std::uint32_t crc32_of(const std::string& bytes);

}  // namespace apc::harness
