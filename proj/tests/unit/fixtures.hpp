#pragma once

#include <vector>

#include "apc/gridworld/gridworld.hpp"
#include "apc/hypernet/hypernet.hpp"
#include "apc/nn/network.hpp"

namespace apc::testing {

inline grid::BuildingLayout checkerboard(int h, int w, bool flip = false) {
  grid::RoomGrid g(h, std::vector<grid::Slot>(w));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) g[r][c] = ((r + c) % 2 != 0) != flip ? grid::Slot::kR2 : grid::Slot::kR1;
  return grid::compose_building(g);
}

// Lookup-table policy [9 -> 4] that walks to the option's corner (rows
// first) and then steps through the option template's door.
inline nn::ParamVector table_policy(int option_index) {
  const auto opt = hyper::OptionEmbedding::canonical(option_index);
  const grid::Pos corner = grid::corner_local(opt.corner);
  nn::ParamVector p(nn::NetworkSpec{{9, 4}, {nn::Activation::kLinear}, std::nullopt});
  auto layers = p.unpack();
  for (int cell = 0; cell < 9; ++cell) {
    const grid::Pos here{cell / 3, cell % 3};
    grid::Action a;
    if (here.r != corner.r) a = here.r < corner.r ? grid::Action::kS : grid::Action::kN;
    else if (here.c != corner.c) a = here.c < corner.c ? grid::Action::kE : grid::Action::kW;
    else a = grid::door_side(opt.room_type, opt.corner);
    layers[0].weights(static_cast<int>(a), cell) = 10.0;
  }
  return nn::ParamVector::pack(p.spec(), layers);
}

inline std::vector<nn::ParamVector> table_policies() {
  std::vector<nn::ParamVector> out;
  for (int k = 0; k < hyper::kNumOptions; ++k) out.push_back(table_policy(k));
  return out;
}

}  // namespace apc::testing
