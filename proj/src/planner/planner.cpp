#include "apc/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "apc/common/errors.hpp"
#include "apc/hypernet/hypernet.hpp"
#include "apc/options/options.hpp"

namespace apc::plan {

using grid::Pos;
using nn::Matrix;
using nn::Vector;

Pos Goal::cell() const { return grid::BuildingLayout::room_origin(room) + grid::corner_local(corner); }

Goal goal_at(const grid::BuildingLayout& layout, Pos cell) {
  const auto room = layout.interior_room(cell);
  if (room) {
    const Pos local = cell - grid::BuildingLayout::room_origin(*room);
    for (auto c : grid::kCorners)
      if (grid::corner_local(c) == local) return {*room, c};
  }
  throw ConfigError("goal (" + std::to_string(cell.r) + "," + std::to_string(cell.c) + ") is not a room corner");
}

void PlannerConfig::validate() const {
  if (horizon < 1) throw ConfigError("planner horizon must be positive");
  if (num_trajectories < 1) throw ConfigError("planner needs at least one trajectory");
  if (!(distance_weight >= 0.0)) throw ConfigError("distance_weight must be non-negative");
  if (max_options < 1 || t1_max < 1 || max_primitive_steps < 1) throw ConfigError("planner caps must be positive");
  if (exhaustive && horizon > 6) throw ConfigError("exhaustive planning is limited to horizon 6");
}

LearnedModel::LearnedModel(const wm::WorldModel& model, const grid::BuildingLayout& layout)
    : HighLevelModel(layout), model_(&model), embeddings_(model.option_width(), hyper::kNumOptions) {
  for (int k = 0; k < hyper::kNumOptions; ++k)
    embeddings_.col(k) = hyper::OptionEmbedding::canonical(k, model.option_width()).values;
}

nn::BatchLstmState LearnedModel::initial_memory(int batch) const {
  return nn::BatchLstmState::zeros(model_->params.spec().recurrent_width(), batch);
}

Matrix LearnedModel::predict(const Matrix& states, std::span<const int> options, nn::BatchLstmState& memory) const {
  Matrix x(wm::kStateWidth + embeddings_.rows(), states.cols());
  x.topRows(wm::kStateWidth) = states;
  for (Eigen::Index j = 0; j < states.cols(); ++j) x.col(j).tail(embeddings_.rows()) = embeddings_.col(options[j]);
  return nn::batch_forward(model_->params, x, &memory).cwiseMax(0.0).cwiseMin(1.0);
}

nn::BatchLstmState OracleModel::initial_memory(int batch) const { return {Matrix(0, batch), Matrix(0, batch)}; }

Matrix OracleModel::predict(const Matrix& states, std::span<const int> options, nn::BatchLstmState&) const {
  Matrix out(wm::kStateWidth, states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Pos room = state_room(*this, states.col(j));
    if (!layout_->has_room(room)) {
      out.col(j) = states.col(j);
      continue;
    }
    const Pos sub = options::option_subgoal(*layout_, room, options[j]);
    out.col(j) = wm::encode_room(*layout_, layout_->interior_room(sub).value_or(room));
  }
  return out;
}

Pos state_room(const HighLevelModel& model, const nn::VectorRef& state) {
  auto snap = [](double v, int extent) {
    if (extent <= 1) return 0;
    return std::clamp(static_cast<int>(std::lround(v * (extent - 1))), 0, extent - 1);
  };
  return {snap(state[grid::kImageCells], model.rooms_h()), snap(state[grid::kImageCells + 1], model.rooms_w())};
}

grid::RoomType state_room_type(const nn::VectorRef& state) {
  const auto img = wm::binarize_image(state);
  int best = 0, best_dist = grid::kImageCells + 1;
  for (int t = 0; t < 2; ++t) {
    const auto ref = grid::template_image(static_cast<grid::RoomType>(t));
    int d = 0;
    for (int i = 0; i < grid::kImageCells; ++i) d += (img[i] != 0) != (ref[i] > 0.5);
    if (d < best_dist) {
      best = t;
      best_dist = d;
    }
  }
  return static_cast<grid::RoomType>(best);
}

grid::Corner landing_corner(grid::RoomType type, grid::Corner corner) {
  const auto side = grid::door_side(type, corner);
  const int bits = static_cast<int>(corner);
  const bool vertical = side == grid::Action::kN || side == grid::Action::kS;
  return static_cast<grid::Corner>(vertical ? bits ^ 2 : bits ^ 1);  // row bit 2, column bit 1
}

namespace {

// Snapped copy: image thresholded, location moved to the nearest slot.
Vector snapped(const HighLevelModel& model, const nn::VectorRef& s) {
  Vector out = s;
  for (int i = 0; i < grid::kImageCells; ++i) out[i] = s[i] > 0.5 ? 1.0 : 0.0;
  const Pos room = state_room(model, s);
  out[grid::kImageCells] = model.rooms_h() > 1 ? static_cast<double>(room.r) / (model.rooms_h() - 1) : 0.0;
  out[grid::kImageCells + 1] = model.rooms_w() > 1 ? static_cast<double>(room.c) / (model.rooms_w() - 1) : 0.0;
  return out;
}

double goal_distance(const HighLevelModel& model, const nn::VectorRef& s, Pos goal_room) {
  const double r = s[grid::kImageCells] * std::max(model.rooms_h() - 1, 0);
  const double c = s[grid::kImageCells + 1] * std::max(model.rooms_w() - 1, 0);
  return std::hypot(r - goal_room.r, c - goal_room.c);
}

bool reaches_goal(Pos before, Pos after, int option, const Goal& goal) {
  const auto opt = hyper::OptionEmbedding::canonical(option);
  if (before == goal.room && opt.corner == goal.corner) return true;
  return after == goal.room && after != before && landing_corner(opt.room_type, opt.corner) == goal.corner;
}

// Sequences as a prefix tree expanded one depth at a time, so shared
// prefixes are imagined once. `choices` is row-major (sequence, step).
struct Level {
  Matrix states;
  nn::BatchLstmState memory;
  std::vector<int> parent;
  std::vector<int> option;
  std::vector<double> total;
  std::vector<char> done;
};

struct TreeResult {
  std::vector<Level> levels;
  std::vector<int> leaf;  // node at the last depth per sequence
};

TreeResult expand(const HighLevelModel& model, const nn::VectorRef& r0, std::span<const int> choices, int num_seq,
                  int depth, const PlannerConfig& config, bool choice_is_option) {
  TreeResult tree;
  Level root;
  root.states = r0;
  root.memory = model.initial_memory(1);
  root.total = {0.0};
  root.done = {0};
  tree.levels.push_back(std::move(root));
  std::vector<int> node(num_seq, 0);
  const int fan = choice_is_option ? hyper::kNumOptions : 4;
  for (int t = 0; t < depth; ++t) {
    const Level& prev = tree.levels.back();
    const int m = static_cast<int>(prev.total.size());
    std::vector<int> child_of(static_cast<std::size_t>(m) * fan, -1);
    Level next;
    for (int i = 0; i < num_seq; ++i) {
      const int ch = choices[static_cast<std::size_t>(i) * depth + t];
      int& slot = child_of[static_cast<std::size_t>(node[i]) * fan + ch];
      if (slot < 0) {
        slot = static_cast<int>(next.parent.size());
        const int p = node[i];
        next.parent.push_back(p);
        next.option.push_back(choice_is_option ? ch
                                               : hyper::option_index(state_room_type(prev.states.col(p)), grid::kCorners[ch]));
      }
      node[i] = slot;
    }
    const int n = static_cast<int>(next.parent.size());
    Matrix in(wm::kStateWidth, n);
    for (int j = 0; j < n; ++j) in.col(j) = prev.states.col(next.parent[j]);
    next.memory = prev.memory.gather(next.parent);
    next.states = model.predict(in, next.option, next.memory);
    next.total.resize(n);
    next.done.resize(n);
    for (int j = 0; j < n; ++j) {
      if (config.snap) next.states.col(j) = snapped(model, next.states.col(j));
      const int p = next.parent[j];
      if (prev.done[p]) {
        next.total[j] = prev.total[p];
        next.done[j] = 1;
        continue;
      }
      const bool hit = reaches_goal(state_room(model, prev.states.col(p)), state_room(model, next.states.col(j)),
                                    next.option[j], config.goal);
      next.total[j] = prev.total[p] + config.per_option_cost + (hit ? config.goal_bonus : 0.0);
      next.done[j] = hit;
    }
    tree.levels.push_back(std::move(next));
  }
  tree.leaf = std::move(node);
  return tree;
}

double leaf_score(const HighLevelModel& model, const TreeResult& tree, int leaf, const PlannerConfig& config) {
  const Level& last = tree.levels.back();
  if (last.done[leaf] || config.distance_weight == 0.0) return last.total[leaf];
  return last.total[leaf] - config.distance_weight * goal_distance(model, last.states.col(leaf), config.goal.room);
}

PlanResult trace(const HighLevelModel& model, const TreeResult& tree, int leaf, const PlannerConfig& config) {
  PlanResult res;
  res.total_reward = leaf_score(model, tree, leaf, config);
  std::vector<int> path;
  for (int d = static_cast<int>(tree.levels.size()) - 1, j = leaf; d >= 1; j = tree.levels[d].parent[j], --d)
    path.push_back(j);
  std::reverse(path.begin(), path.end());
  for (std::size_t d = 0; d < path.size(); ++d) {
    const Level& lv = tree.levels[d + 1];
    res.options.push_back(lv.option[path[d]]);
    res.predicted_states.push_back(lv.states.col(path[d]));
    if (lv.done[path[d]]) {
      res.goal_reached_in_imagination = true;
      break;
    }
  }
  return res;
}

}  // namespace

PlanResult imagined_rollout(const HighLevelModel& model, const nn::VectorRef& r0, std::span<const int> options,
                            const PlannerConfig& config) {
  if (static_cast<int>(options.size()) > config.horizon) throw ConfigError("option sequence longer than the horizon");
  for (int k : options)
    if (k < 0 || k >= hyper::kNumOptions) throw ConfigError("option index out of range");
  if (options.empty()) return {{}, {}, 0.0, false};
  const auto tree = expand(model, r0, options, 1, static_cast<int>(options.size()), config, true);
  return trace(model, tree, tree.leaf[0], config);
}

PlanResult mpc_plan(const HighLevelModel& model, const nn::VectorRef& r0, const PlannerConfig& config, Rng& rng) {
  config.validate();
  if (r0.size() != wm::kStateWidth) throw ConfigError("planner state must be 27 wide");
  const bool uniform = config.sampling == Sampling::kUniform;
  const int fan = uniform ? hyper::kNumOptions : 4;
  const int h = config.horizon;
  std::vector<int> choices;
  int n = config.num_trajectories;
  if (config.exhaustive) {
    n = 1;
    for (int t = 0; t < h; ++t) n *= fan;
    choices.resize(static_cast<std::size_t>(n) * h);
    for (int i = 0; i < n; ++i)
      for (int t = h - 1, v = i; t >= 0; --t, v /= fan) choices[static_cast<std::size_t>(i) * h + t] = v % fan;
  } else {
    const std::uint64_t base = rng();
    choices.resize(static_cast<std::size_t>(n) * h);
    for (int i = 0; i < n; ++i) {
      Rng sub = make_rng(base, {static_cast<std::uint64_t>(i)});
      for (int t = 0; t < h; ++t) choices[static_cast<std::size_t>(i) * h + t] = uniform_int(sub, fan);
    }
  }
  const auto tree = expand(model, r0, choices, n, h, config, uniform);
  int best = 0;
  double best_score = leaf_score(model, tree, tree.leaf[0], config);
  for (int i = 1; i < n; ++i) {
    const double s = leaf_score(model, tree, tree.leaf[i], config);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return trace(model, tree, tree.leaf[best], config);
}

double episode_reward(bool reached, int primitive_steps) {
  return (reached ? grid::kGoalReward : 0.0) + grid::kStepReward * primitive_steps;
}

NavigationRecord navigate(const grid::BuildingLayout& layout, Pos start, const HighLevelModel& model,
                          const std::vector<nn::ParamVector>& thetas, const PlannerConfig& config, Rng& rng) {
  config.validate();
  if (thetas.size() != static_cast<std::size_t>(hyper::kNumOptions)) throw ConfigError("expected one policy per option");
  grid::BuildingLayout task = layout;
  task.set_start(start);
  task.set_goal(config.goal.cell());
  NavigationRecord rec;
  Pos cell = start;
  Pos room = *task.interior_room(start);
  while (cell != task.goal() && rec.planning_steps < config.max_options) {
    const auto plan = mpc_plan(model, wm::encode_high_state(task, cell, room), config, rng);
    const int k = plan.options.front();
    const auto ex = options::execute_option(task, thetas[k], k, cell, room, config.t1_max, true);
    ++rec.planning_steps;
    rec.primitive_steps += ex.steps;
    rec.options.push_back(k);
    cell = ex.end;
    room = ex.end_room;
  }
  rec.reached = cell == task.goal();
  rec.episode_reward = episode_reward(rec.reached, rec.primitive_steps);
  return rec;
}

NavigationRecord low_level_mpc(const grid::BuildingLayout& layout, Pos start, Pos goal_cell, const PlannerConfig& config,
                               Rng& rng) {
  config.validate();
  grid::BuildingLayout task = layout;
  task.set_start(start);
  task.set_goal(goal_cell);
  const int h = config.horizon;
  int n = config.num_trajectories;
  if (config.exhaustive) {
    n = 1;
    for (int t = 0; t < h; ++t) n *= grid::kNumActions;
  }
  std::vector<int> seq(static_cast<std::size_t>(h));
  NavigationRecord rec;
  Pos cell = start;
  while (cell != goal_cell && rec.primitive_steps < config.max_primitive_steps) {
    const std::uint64_t base = rng();
    int best_action = 0;
    double best = -INFINITY;
    for (int i = 0; i < n; ++i) {
      if (config.exhaustive) {
        for (int t = h - 1, v = i; t >= 0; --t, v /= grid::kNumActions) seq[t] = v % grid::kNumActions;
      } else {
        Rng sub = make_rng(base, {static_cast<std::uint64_t>(i)});
        for (int t = 0; t < h; ++t) seq[t] = uniform_int(sub, grid::kNumActions);
      }
      Pos p = cell;
      double score = 0.0;
      bool done = false;
      for (int t = 0; t < h && !done; ++t) {
        const auto sr = grid::step(task, p, static_cast<grid::Action>(seq[t]));
        p = sr.next;
        score += sr.reward;
        done = sr.done;
      }
      if (!done) score -= std::hypot(p.r - goal_cell.r, p.c - goal_cell.c);
      if (score > best) {
        best = score;
        best_action = seq[0];
      }
    }
    cell = grid::step(task, cell, static_cast<grid::Action>(best_action)).next;
    rec.trail.push_back(cell);
    ++rec.planning_steps;
    ++rec.primitive_steps;
  }
  rec.reached = cell == goal_cell;
  rec.episode_reward = episode_reward(rec.reached, rec.primitive_steps);
  return rec;
}

std::string navigation_csv_header() { return "run_id,goal_distance,planning_steps,primitive_steps,reached,episode_reward"; }

std::string navigation_csv_row(int run_id, int goal_distance, const NavigationRecord& rec) {
  std::ostringstream out;
  out << std::setprecision(17) << run_id << ',' << goal_distance << ',' << rec.planning_steps << ',' << rec.primitive_steps
      << ',' << (rec.reached ? 1 : 0) << ',' << rec.episode_reward;
  return out.str();
}

}  // namespace apc::plan
