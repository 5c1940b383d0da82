#include "apc/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "apc/common/errors.hpp"
#include "apc/harness/output.hpp"
#include "apc/nn/finite_diff.hpp"
#include "apc/planner/flat_agent.hpp"

namespace apc::harness {

using grid::Pos;

namespace {

// Sub-stream tags.
constexpr std::uint64_t kCollectTag = 0xc011;
constexpr std::uint64_t kHeldoutTag = 0xc012;
constexpr std::uint64_t kGoalTag = 0x90a1;
constexpr std::uint64_t kApcTag = 0xa9c;
constexpr std::uint64_t kFlatTag = 0xe915;
constexpr std::uint64_t kCompareTag = 0xc0a7;
constexpr std::uint64_t kLowLevelTag = 0x10e1;
constexpr std::uint64_t kTransferTag = 0x7a;
constexpr std::uint64_t kGradTag = 0x9c;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

template <typename... Ts>
std::string row(const Ts&... xs) {
  std::ostringstream o;
  bool first = true;
  auto put = [&](const auto& x) {
    if (!first) o << ',';
    first = false;
    using T = std::decay_t<decltype(x)>;
    if constexpr (std::is_floating_point_v<T>) o << num(x);
    else if constexpr (std::is_same_v<T, bool>) o << (x ? 1 : 0);
    else if constexpr (std::is_convertible_v<T, std::string>) o << csv_field(std::string(x));
    else o << x;
  };
  (put(xs), ...);
  return o.str();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Pos random_interior(const grid::BuildingLayout& layout, Pos room, Rng& rng) {
  (void)layout;
  return grid::BuildingLayout::room_origin(room) + Pos{uniform_int(rng, grid::kRoomSize), uniform_int(rng, grid::kRoomSize)};
}

Checkpoint require_checkpoint(const ExperimentConfig& config, bool need_world_model) {
  Checkpoint ck = load_checkpoint(config.checkpoint_path());
  if (need_world_model && !ck.world_model)
    throw ConfigError("checkpoint '" + config.checkpoint_path() + "' has no world model; run `apc train-worldmodel` first");
  if (ck.baselines.size() != hyper::kNumOptions) throw FormatError("checkpoint holds the wrong number of baselines");
  return ck;
}

Checkpoint make_checkpoint(const ExperimentConfig& config, const grid::BuildingLayout& layout) {
  Checkpoint ck;
  ck.seed = config.seed;
  ck.config_hash = config_hash(config);
  ck.config_text = canonical_text(config);
  ck.layout = layout;
  return ck;
}

struct TrainedModel {
  wm::WorldModel model;
  std::vector<double> epoch_loss;
  wm::Fidelity train;
  wm::Fidelity heldout;
};

TrainedModel fit_world_model(const ExperimentConfig& config, const grid::BuildingLayout& layout,
                             const std::vector<nn::ParamVector>& thetas, std::uint64_t key) {
  Rng rng = make_rng(config.seed, {key, kCollectTag});
  const auto data = wm::execute_and_collect(layout, thetas, config.collect, rng);
  wm::CollectConfig held_cfg = config.collect;
  held_cfg.episodes = config.wm_heldout_episodes;
  Rng held_rng = make_rng(config.seed, {key, kHeldoutTag});
  const auto held = wm::execute_and_collect(layout, thetas, held_cfg, held_rng);
  wm::WmTrainConfig wc = config.world_model;
  wc.seed = derive_seed(config.seed, {key});
  auto res = wm::train_world_model(data, wc, config.fs_spec());
  TrainedModel out{res.model, res.epoch_loss, {}, {}};
  out.train = wm::evaluate_world_model(out.model, data, layout);
  out.heldout = wm::evaluate_world_model(out.model, held, layout);
  return out;
}

std::string fidelity_row(const std::string& split, const wm::Fidelity& f) {
  return row(split, f.transitions, f.image_exact, f.location_exact, f.max_location_error, f.mse);
}

const char* kFidelityHeader = "split,transitions,image_exact,location_exact,max_location_error,mse";

}  // namespace

grid::BuildingLayout checkerboard_layout(int rooms_h, int rooms_w, bool flip) {
  grid::RoomGrid g(rooms_h, std::vector<grid::Slot>(rooms_w));
  for (int r = 0; r < rooms_h; ++r)
    for (int c = 0; c < rooms_w; ++c) g[r][c] = ((r + c) % 2 != 0) != flip ? grid::Slot::kR2 : grid::Slot::kR1;
  return grid::compose_building(g);
}

grid::BuildingLayout base_layout(const ExperimentConfig& config) {
  return config.layout_path.empty() ? checkerboard_layout() : grid::load_layout(config.layout_path);
}

std::vector<grid::BuildingLayout> builtin_transfer_layouts() {
  using grid::Slot;
  constexpr Slot A = Slot::kR1, B = Slot::kR2, X = Slot::kSolid;
  return {
      checkerboard_layout(3, 3, true),
      grid::compose_building({{A, B, A, X}, {B, A, B, A}, {X, B, A, B}}),
      grid::compose_building({{A, B, A, B, A}, {B, X, B, X, B}, {A, B, A, B, A}}),
  };
}

// ---------------------------------------------------------------- options

TrainOptionsSummary run_train_options(const ExperimentConfig& config) {
  const auto layout = base_layout(config);
  auto trained = options::train_options(layout, config.options);
  const auto thetas = options::generate_all(trained.hnet);

  TrainOptionsSummary out;
  out.passed = true;
  std::vector<std::string> eval_rows;
  for (int k = 0; k < hyper::kNumOptions; ++k) {
    const auto ev = options::evaluate_option(layout, thetas[k], k, config.options.t1_max);
    const bool ok = ev.success_rate >= kMasterySuccess && ev.mean_steps <= ev.mean_bfs_steps + kMasteryExtraSteps;
    out.passed = out.passed && ok;
    out.evals.push_back(ev);
    eval_rows.push_back(row(k, ev.starts, ev.success_rate, ev.mean_steps, ev.mean_bfs_steps, ok));
  }

  std::vector<std::string> curve_rows;
  for (const auto& r : trained.curve) curve_rows.push_back(options::curve_csv_row(r));
  write_csv(config, "options_curve.csv", options::curve_csv_header(), curve_rows);
  write_csv(config, "options_eval.csv", "option_index,starts,success_rate,mean_steps,mean_bfs_steps,mastered", eval_rows);

  PlotSpec plot{"Option training", "episode of this option",
                "episode reward (" + std::to_string(config.moving_average_window) + "-episode moving average)", {}, {}};
  for (int k = 0; k < hyper::kNumOptions; ++k) {
    Series s;
    s.label = hyper::OptionEmbedding::canonical(k).room_type == grid::RoomType::kR1 ? "R1 " : "R2 ";
    s.label += grid::to_string(hyper::OptionEmbedding::canonical(k).corner);
    s.color = kPalette[k];
    for (const auto& r : trained.curve)
      if (r.option_index == k) s.y.push_back(r.episode_reward);
    s.y = moving_average(s.y, config.moving_average_window);
    for (std::size_t i = 0; i < s.y.size(); ++i) s.x.push_back(static_cast<double>(i));
    plot.series.push_back(std::move(s));
  }
  write_svg(config, "options_curve.svg", plot);

  Checkpoint ck = make_checkpoint(config, layout);
  ck.hnet = std::move(trained.hnet);
  ck.baselines = std::move(trained.baselines);
  save_checkpoint(ck, config.checkpoint_path());
  return out;
}

// ---------------------------------------------------------------- world model

WorldModelSummary run_train_worldmodel(const ExperimentConfig& config) {
  Checkpoint ck = require_checkpoint(config, false);
  const auto layout = config.layout_path.empty() ? ck.layout : base_layout(config);
  const auto thetas = options::generate_all(ck.hnet);
  const auto fit = fit_world_model(config, layout, thetas, 0);

  WorldModelSummary out{fit.epoch_loss, fit.heldout, false};
  out.passed = fit.heldout.image_exact >= kImageAccuracy && fit.heldout.max_location_error < kMaxLocationError;

  std::vector<std::string> loss_rows;
  for (std::size_t e = 0; e < fit.epoch_loss.size(); ++e) loss_rows.push_back(row(e, fit.epoch_loss[e]));
  write_csv(config, "worldmodel_curve.csv", "epoch,train_mse", loss_rows);
  write_csv(config, "worldmodel_fidelity.csv", kFidelityHeader,
            {fidelity_row("train", fit.train), fidelity_row("heldout", fit.heldout)});
  Series s{"train MSE", {}, fit.epoch_loss, {}, kPalette[0]};
  for (std::size_t e = 0; e < fit.epoch_loss.size(); ++e) s.x.push_back(static_cast<double>(e));
  write_svg(config, "worldmodel_curve.svg", {"World-model training", "epoch", "mean squared error", {s}, {}});

  ck.layout = layout;
  ck.world_model = fit.model;
  ck.config_hash = config_hash(config);
  ck.config_text = canonical_text(config);
  save_checkpoint(ck, config.checkpoint_path());
  return out;
}

// ---------------------------------------------------------------- goal change

GoalChangeSummary run_goal_change(const ExperimentConfig& config) {
  const Checkpoint ck = require_checkpoint(config, true);
  const auto& layout = ck.layout;
  const auto thetas = options::generate_all(ck.hnet);
  const plan::LearnedModel model(*ck.world_model, layout);
  const Pos start = layout.start();
  const Pos start_room = *layout.interior_room(start);

  // Goals: a random corner of a room 1..max rooms away, never repeated back to back.
  std::vector<Pos> candidates;
  const auto dist = grid::room_distances(layout, start_room);
  for (Pos room : layout.rooms()) {
    const int d = dist[room.r * layout.rooms_w() + room.c];
    if (d >= 1 && d <= config.goal_max_room_distance) candidates.push_back(room);
  }
  if (candidates.empty()) throw ConfigError("no goal room within goal_max_room_distance of the start");
  Rng goal_rng = make_rng(config.seed, {kGoalTag});
  GoalChangeSummary out;
  for (int s = 0; s <= config.goal_changes; ++s) {
    plan::Goal g;
    do {
      g.room = candidates[uniform_int(goal_rng, static_cast<int>(candidates.size()))];
      g.corner = grid::kCorners[uniform_int(goal_rng, 4)];
    } while (!out.segments.empty() && g == out.segments.back().goal);
    out.segments.push_back({g, {}, {}, 0, -1, 0, 0, false, false});
  }

  std::vector<std::string> rows;
  plan::FlatAgent agent = plan::init_flat_agent(config.flat);
  int flat_episode_index = 0;
  for (std::size_t s = 0; s < out.segments.size(); ++s) {
    auto& seg = out.segments[s];
    plan::PlannerConfig pc = config.planner;
    pc.goal = seg.goal;
    std::vector<double> apc_steps, apc_reached;
    for (int e = 0; e < config.apc_episodes_per_goal; ++e) {
      Rng rng = make_rng(config.seed, {kApcTag, s, static_cast<std::uint64_t>(e)});
      const auto rec = plan::navigate(layout, start, model, thetas, pc, rng);
      seg.apc_rewards.push_back(rec.episode_reward);
      apc_steps.push_back(rec.primitive_steps);
      apc_reached.push_back(rec.reached);
    }
    grid::BuildingLayout flat_layout = layout;
    flat_layout.set_goal(seg.goal.cell());
    std::vector<double> flat_steps, flat_reached;
    for (int e = 0; e < config.flat_episodes_per_goal; ++e, ++flat_episode_index) {
      Rng rng = make_rng(config.seed, {kFlatTag, static_cast<std::uint64_t>(flat_episode_index)});
      const auto ep = plan::flat_episode(agent, flat_layout, config.flat, rng);
      seg.flat_rewards.push_back(ep.reward);
      flat_steps.push_back(ep.steps);
      flat_reached.push_back(ep.reached);
    }

    const auto apc_ma = moving_average(seg.apc_rewards, config.moving_average_window);
    const auto flat_ma = moving_average(seg.flat_rewards, config.moving_average_window);
    const Pos gc = seg.goal.cell();
    for (std::size_t e = 0; e < seg.apc_rewards.size(); ++e)
      rows.push_back(row("apc", s, e, gc.r, gc.c, seg.apc_rewards[e], static_cast<int>(apc_steps[e]), apc_reached[e] > 0, apc_ma[e]));
    for (std::size_t e = 0; e < seg.flat_rewards.size(); ++e)
      rows.push_back(row("flat", s, e, gc.r, gc.c, seg.flat_rewards[e], static_cast<int>(flat_steps[e]), flat_reached[e] > 0, flat_ma[e]));

    seg.apc_plateau = median(seg.apc_rewards);
    const double bar = seg.apc_plateau - (1.0 - kPlateauFraction) * std::abs(seg.apc_plateau);
    for (std::size_t e = 0; e < seg.apc_rewards.size(); ++e)
      if (seg.apc_rewards[e] >= bar) {
        seg.apc_recovery = static_cast<int>(e);
        break;
      }
    const std::size_t tail = std::min<std::size_t>(100, seg.flat_rewards.size());
    seg.flat_plateau = mean(std::vector<double>(seg.flat_rewards.end() - static_cast<std::ptrdiff_t>(tail), seg.flat_rewards.end()));
    // Moving averages over a full window of post-change episodes only.
    const std::size_t w = static_cast<std::size_t>(config.moving_average_window);
    const std::size_t horizon = std::min<std::size_t>(kFlatStayBelow, flat_ma.size());
    seg.flat_post_max = -INFINITY;
    for (std::size_t e = std::min(w, horizon) - 1; e < horizon; ++e) seg.flat_post_max = std::max(seg.flat_post_max, flat_ma[e]);
    if (s > 0) {
      seg.apc_ok = seg.apc_plateau > 0.0 && seg.apc_recovery >= 0 && seg.apc_recovery < kRecoveryEpisodes;
      seg.flat_ok = seg.flat_post_max < out.segments[s - 1].flat_plateau;
    }
  }
  out.apc_passed = out.flat_passed = true;
  std::vector<std::string> summary;
  for (std::size_t s = 0; s < out.segments.size(); ++s) {
    const auto& seg = out.segments[s];
    const Pos gc = seg.goal.cell();
    if (s > 0) {
      out.apc_passed = out.apc_passed && seg.apc_ok;
      out.flat_passed = out.flat_passed && seg.flat_ok;
    }
    summary.push_back(row(s, gc.r, gc.c, seg.apc_plateau, seg.apc_recovery, seg.apc_ok, seg.flat_plateau, seg.flat_post_max, seg.flat_ok));
  }

  const std::string window = std::to_string(config.moving_average_window);
  write_csv(config, "goal_change.csv", "agent,segment,episode,goal_r,goal_c,reward,steps,reached,moving_average_" + window, rows);
  write_csv(config, "goal_change_summary.csv",
            "segment,goal_r,goal_c,apc_plateau,apc_recovery_episode,apc_recovered,flat_plateau,flat_post_change_max_ma,flat_stayed_below",
            summary);

  auto plot_for = [&](bool flat) {
    PlotSpec p{flat ? "Flat RL under goal changes" : "APC planning under goal changes", "episode", "episode reward", {}, {}};
    Series raw{"per-episode reward", {}, {}, {}, "#9ecae1"};
    Series ma{window + "-episode moving average", {}, {}, {}, "#08519c"};
    double x = 0;
    for (std::size_t s = 0; s < out.segments.size(); ++s) {
      const auto& r = flat ? out.segments[s].flat_rewards : out.segments[s].apc_rewards;
      const auto m = moving_average(r, config.moving_average_window);
      if (s > 0) p.markers.push_back(x);
      for (std::size_t e = 0; e < r.size(); ++e, ++x) {
        raw.x.push_back(x);
        raw.y.push_back(r[e]);
        ma.x.push_back(x);
        ma.y.push_back(m[e]);
      }
    }
    p.series = {raw, ma};
    return p;
  };
  write_svg(config, "goal_change_apc.svg", plot_for(false));
  write_svg(config, "goal_change_flat.svg", plot_for(true));
  return out;
}

// ---------------------------------------------------------------- plan compare

PlanCompareSummary run_plan_compare(const ExperimentConfig& config) {
  const Checkpoint ck = require_checkpoint(config, true);
  const auto& layout = ck.layout;
  const auto thetas = options::generate_all(ck.hnet);
  const plan::LearnedModel model(*ck.world_model, layout);
  const auto rooms = layout.rooms();

  PlanCompareSummary out;
  std::vector<std::string> runs;
  for (int d = 0; d <= config.compare_max_distance; ++d) {
    std::vector<std::pair<Pos, Pos>> pairs;
    for (Pos a : rooms)
      for (Pos b : rooms)
        if (grid::manhattan(a, b) == d) pairs.emplace_back(a, b);
    if (pairs.empty()) continue;
    std::vector<double> apc, low, apc_hit, low_hit;
    for (int k = 0; k < config.compare_trials; ++k) {
      Rng rng = make_rng(config.seed, {kCompareTag, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(k)});
      const auto [sr, gr] = pairs[uniform_int(rng, static_cast<int>(pairs.size()))];
      plan::PlannerConfig pc = config.planner;
      pc.goal = {gr, grid::kCorners[uniform_int(rng, 4)]};
      Pos start;
      do start = random_interior(layout, sr, rng);
      while (start == pc.goal.cell());
      const auto a = plan::navigate(layout, start, model, thetas, pc, rng);
      Rng low_rng = make_rng(config.seed, {kLowLevelTag, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(k)});
      const auto b = plan::low_level_mpc(layout, start, pc.goal.cell(), pc, low_rng);
      const int id = d * config.compare_trials + k;
      runs.push_back("apc," + plan::navigation_csv_row(id, d, a));
      runs.push_back("low_level," + plan::navigation_csv_row(id, d, b));
      apc.push_back(a.planning_steps);
      low.push_back(b.planning_steps);
      apc_hit.push_back(a.reached);
      low_hit.push_back(b.reached);
    }
    out.rows.push_back({d, config.compare_trials, mean(apc), stddev(apc), mean(apc_hit), mean(low), stddev(low), mean(low_hit)});
  }

  // Least squares over d >= 1.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (const auto& r : out.rows)
    if (r.distance >= 1) {
      sx += r.distance, sy += r.apc_mean, sxx += r.distance * r.distance, sxy += r.distance * r.apc_mean, n += 1;
    }
  if (n >= 2) {
    out.apc_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.apc_intercept = (sy - out.apc_slope * sx) / n;
  }

  out.passed = !out.rows.empty();
  std::vector<std::string> rows;
  for (const auto& r : out.rows) {
    const bool ok = r.distance == 0 ? r.apc_mean == 1.0 : r.apc_mean <= r.distance + 1.0;
    out.passed = out.passed && ok;
    rows.push_back(row(r.distance, r.trials, r.apc_mean, r.apc_std, r.apc_reach, r.low_mean, r.low_std, r.low_reach, ok));
  }
  if (!out.rows.empty()) {
    const auto& last = out.rows.back();
    out.passed = out.passed && last.low_mean >= kLowLevelRatio * last.apc_mean;
  }
  write_csv(config, "plan_compare.csv",
            "distance,trials,apc_mean_steps,apc_std_steps,apc_reach_rate,low_level_mean_steps,low_level_std_steps,"
            "low_level_reach_rate,apc_within_bound",
            rows);
  write_csv(config, "plan_compare_runs.csv", "planner," + plan::navigation_csv_header(), runs);
  write_csv(config, "plan_compare_fit.csv", "apc_slope,apc_intercept", {row(out.apc_slope, out.apc_intercept)});

  Series a{"APC (options + learned model)", {}, {}, {}, kPalette[0]};
  Series b{"low-level MPC (primitive actions)", {}, {}, {}, kPalette[1]};
  for (const auto& r : out.rows) {
    a.x.push_back(r.distance), a.y.push_back(r.apc_mean), a.err.push_back(r.apc_std);
    b.x.push_back(r.distance), b.y.push_back(r.low_mean), b.err.push_back(r.low_std);
  }
  write_svg(config, "plan_compare.svg",
            {"Planning steps to reach the goal", "goal distance (rooms)", "planning steps (mean +- std)", {a, b}, {}});
  return out;
}

// ---------------------------------------------------------------- transfer

TransferSummary run_transfer(const ExperimentConfig& config) {
  const Checkpoint ck = require_checkpoint(config, false);
  const auto thetas = options::generate_all(ck.hnet);
  const int t1 = config.options.t1_max;

  std::vector<double> base_success;
  for (int k = 0; k < hyper::kNumOptions; ++k)
    base_success.push_back(options::evaluate_option(ck.layout, thetas[k], k, t1).success_rate);

  std::vector<std::pair<std::string, grid::BuildingLayout>> layouts;
  if (config.transfer_layouts.empty()) {
    const auto builtin = builtin_transfer_layouts();
    for (std::size_t i = 0; i < builtin.size(); ++i) layouts.emplace_back("builtin-" + std::to_string(i + 1), builtin[i]);
  } else {
    for (const auto& path : config.transfer_layouts) layouts.emplace_back(path, grid::load_layout(path));
  }

  TransferSummary out;
  std::vector<std::string> option_rows, nav_rows, summary_rows;
  int total = 0, hits = 0;
  bool options_ok = true;
  for (const auto& [name, layout] : layouts) {
    // Keyed by content so the same building always gets the same streams.
    const std::uint64_t key = fnv1a64(grid::format_layout(layout));
    TransferLayoutResult res;
    res.name = name;
    res.base_success = mean(base_success);
    std::vector<double> success;
    for (int k = 0; k < hyper::kNumOptions; ++k) {
      const auto ev = options::evaluate_option(layout, thetas[k], k, t1);
      success.push_back(ev.success_rate);
      res.max_option_gap = std::max(res.max_option_gap, std::abs(ev.success_rate - base_success[k]));
      option_rows.push_back(row(name, k, ev.starts, ev.success_rate, base_success[k], ev.mean_steps, ev.mean_bfs_steps));
    }
    res.option_success = mean(success);
    options_ok = options_ok && res.max_option_gap <= kTransferSuccessBand;

    const auto fit = fit_world_model(config, layout, thetas, key);
    res.fidelity = fit.heldout;
    const plan::LearnedModel model(fit.model, layout);
    const auto rooms = layout.rooms();
    for (int i = 0; i < config.transfer_goals; ++i) {
      Rng rng = make_rng(config.seed, {kTransferTag, key, static_cast<std::uint64_t>(i)});
      const Pos start = random_interior(layout, rooms[uniform_int(rng, static_cast<int>(rooms.size()))], rng);
      plan::PlannerConfig pc = config.planner;
      do pc.goal = {rooms[uniform_int(rng, static_cast<int>(rooms.size()))], grid::kCorners[uniform_int(rng, 4)]};
      while (pc.goal.cell() == start);
      const auto rec = plan::navigate(layout, start, model, thetas, pc, rng);
      res.navigations += 1;
      res.reached += rec.reached;
      const Pos gc = pc.goal.cell();
      nav_rows.push_back(row(name, i, start.r, start.c, gc.r, gc.c, rec.planning_steps, rec.primitive_steps, rec.reached,
                             rec.episode_reward));
      res.records.push_back(rec);
    }
    total += res.navigations;
    hits += res.reached;
    summary_rows.push_back(row(name, layout.rooms_h(), layout.rooms_w(), res.option_success, res.base_success,
                               res.max_option_gap, res.fidelity.image_exact, res.navigations, res.reached));
    out.layouts.push_back(std::move(res));
  }
  out.reach_rate = total ? static_cast<double>(hits) / total : 0.0;
  out.passed = options_ok && total > 0 && out.reach_rate >= kTransferReachRate;

  write_csv(config, "transfer_options.csv",
            "layout,option_index,starts,success_rate,base_success_rate,mean_steps,mean_bfs_steps", option_rows);
  write_csv(config, "transfer.csv",
            "layout,navigation,start_r,start_c,goal_r,goal_c,planning_steps,primitive_steps,reached,episode_reward", nav_rows);
  write_csv(config, "transfer_summary.csv",
            "layout,rooms_h,rooms_w,option_success,base_option_success,max_option_gap,heldout_image_exact,navigations,reached",
            summary_rows);
  return out;
}

// ---------------------------------------------------------------- gradcheck

GradcheckSummary run_gradcheck(const ExperimentConfig& config) {
  using nn::Activation;
  using nn::Vector;
  Rng rng = make_rng(config.seed, {kGradTag});
  GradcheckSummary out;
  auto record = [&](const std::string& name, std::size_t params, const std::vector<double>& g, const std::vector<double>& fd) {
    const double err = nn::max_relative_error(g, fd, 1e-3);
    out.rows.push_back({name, static_cast<int>(params), err, params <= 200 && err <= config.gradcheck_tolerance});
  };

  {  // REINFORCE surrogate through H_a -> f_a
    const nn::NetworkSpec policy{{2, 3, 2}, {Activation::kRelu, Activation::kLinear}, std::nullopt};
    auto m = hyper::init_hypernet(rng, policy, {4, 3});
    for (double& v : m.params.values()) v += 0.1 * standard_normal(rng);
    const Vector e = Vector::Unit(4, 2);
    std::vector<Vector> xs;
    std::vector<int> as;
    std::vector<double> adv;
    for (int t = 0; t < 4; ++t) {
      xs.push_back(Vector::NullaryExpr(2, [&] { return standard_normal(rng); }));
      as.push_back(t % 2);
      adv.push_back(standard_normal(rng));
    }
    const double lambda = config.options.lambda_l2;
    const auto g = options::reinforce_hypernet_grad(m, e, xs, as, adv, lambda);
    const auto fd = nn::finite_diff_grad(
        [&](std::span<const double> p) {
          hyper::HypernetModel q{m.policy_spec, nn::ParamVector(m.params.spec(), {p.begin(), p.end()})};
          return options::reinforce_hypernet_grad(q, e, xs, as, adv, lambda).loss;
        },
        m.params.values(), 1e-4);
    record("reinforce_hypernet", m.params.size(), g.grad, fd);
  }
  {  // F_s sequence MSE
    const nn::NetworkSpec spec{{3, 2, 3, 2, 3}, {Activation::kRelu, Activation::kTanh, Activation::kElu, Activation::kLinear}, 1};
    const auto p = nn::init_params(spec, rng);
    std::vector<Vector> xs, ys;
    for (int t = 0; t < 5; ++t) {
      xs.push_back(Vector::NullaryExpr(3, [&] { return standard_normal(rng); }));
      ys.push_back(Vector::NullaryExpr(3, [&] { return uniform01(rng); }));
    }
    std::vector<double> g;
    wm::sequence_mse(p, xs, ys, &g);
    const auto fd = nn::finite_diff_grad(
        [&](std::span<const double> v) { return wm::sequence_mse(nn::ParamVector(spec, {v.begin(), v.end()}), xs, ys, nullptr); },
        p.values(), 1e-5);
    record("world_model_mse", p.size(), g, fd);
  }
  {  // baseline MSE
    const auto b = nn::init_params(options::baseline_spec(3, 5), rng);
    std::vector<Vector> xs;
    std::vector<double> ys;
    for (int t = 0; t < 6; ++t) {
      xs.push_back(Vector::NullaryExpr(3, [&] { return standard_normal(rng); }));
      ys.push_back(standard_normal(rng));
    }
    const auto g = options::baseline_mse_grad(b, xs, ys);
    const auto fd = nn::finite_diff_grad(
        [&](std::span<const double> v) {
          return options::baseline_mse_grad(nn::ParamVector(b.spec(), {v.begin(), v.end()}), xs, ys).loss;
        },
        b.values(), 1e-4);
    record("baseline_mse", b.size(), g.grad, fd);
  }

  out.passed = true;
  std::vector<std::string> rows;
  for (const auto& r : out.rows) {
    out.passed = out.passed && r.passed;
    rows.push_back(row(r.loss, r.params, r.max_rel_error, config.gradcheck_tolerance, r.passed));
  }
  write_csv(config, "gradcheck.csv", "loss,params,max_relative_error,tolerance,passed", rows);
  return out;
}

}  // namespace apc::harness
