#include "apc/options/options.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "apc/common/errors.hpp"
#include "apc/nn/categorical.hpp"

namespace apc::options {

using grid::Pos;
using nn::Vector;

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lr_agent > 0.0) || !(lr_baseline > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lambda_l2 >= 0.0)) throw ConfigError("lambda_l2 must be non-negative");
  if (t1_max < 1) throw ConfigError("t1_max must be positive");
  if (episodes_per_option < 0) throw ConfigError("episodes_per_option must be non-negative");
  if (baseline_hidden < 1) throw ConfigError("baseline_hidden must be positive");
  policy.validate();
  if (policy.input_width() != hyper::kLocalCells || policy.output_width() != grid::kNumActions)
    throw ConfigError("option policy must map 9 local cells to 4 actions");
}

Pos option_subgoal(const grid::BuildingLayout& layout, Pos room, int option_index) {
  const auto opt = hyper::OptionEmbedding::canonical(option_index);
  if (auto landing = grid::landing_cell(layout, room, opt.room_type, opt.corner)) return *landing;
  return grid::subgoal_cell(layout, room, opt.corner);
}

std::vector<Pos> training_rooms(const grid::BuildingLayout& layout, int option_index) {
  const auto opt = hyper::OptionEmbedding::canonical(option_index);
  std::vector<Pos> out;
  for (Pos room : layout.rooms()) {
    if (layout.room_type(room) == opt.room_type && grid::landing_cell(layout, room, opt.room_type, opt.corner))
      out.push_back(room);
  }
  return out;
}

double Trajectory::total_reward() const {
  double sum = 0.0;
  for (const auto& s : steps) sum += s.reward;
  return sum;
}

namespace {

struct Run {
  Trajectory traj;
  Execution exec;
};

// Shared rollout loop; `env` additionally tracks environment rewards and
// stops on the layout goal.
Run run_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index, Pos start,
               std::optional<Pos> frame_room, int t1_max, ActionMode mode, Rng* rng, bool env) {
  if (!frame_room) frame_room = layout.interior_room(start);
  if (!frame_room) throw ConfigError("option start is not inside a room and no frame room was given");
  const Pos frame = *frame_room;
  const Pos subgoal = option_subgoal(layout, frame, option_index);

  Run run;
  run.traj.option_index = option_index;
  Pos pos = start;
  if (pos == subgoal) run.traj.success = true;
  for (int t = 0; t < t1_max && !run.traj.success; ++t) {
    const auto lf = grid::local_frame(layout, pos, frame);
    const Vector x = hyper::local_onehot(lf.local);
    const Vector logits = hyper::policy_logits(theta, x);
    const int a = mode == ActionMode::kGreedy ? nn::argmax(logits) : nn::categorical_sample(logits, *rng);
    const auto sr = grid::step(layout, pos, static_cast<grid::Action>(a));
    pos = sr.next;
    const bool reached = pos == subgoal;
    run.traj.steps.push_back({lf.local, a, nn::categorical_log_prob(logits, a), logits.squaredNorm(),
                              reached ? grid::kGoalReward : grid::kStepReward});
    run.exec.env_reward += sr.reward;
    if (reached) run.traj.success = true;
    if (env && sr.done) {
      run.exec.goal_reached = true;
      break;
    }
    const auto room = layout.interior_room(pos);
    if (room && *room != frame) break;
  }
  run.traj.end = pos;
  run.traj.end_room = layout.interior_room(pos).value_or(frame);
  run.exec.end = pos;
  run.exec.end_room = run.traj.end_room;
  run.exec.steps = static_cast<int>(run.traj.steps.size());
  run.exec.subgoal_reached = run.traj.success;
  return run;
}

std::string dump_episode(const Trajectory& t, const std::string& why) {
  std::ostringstream out;
  out << why << " (option " << t.option_index << ", " << t.steps.size() << " steps)";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    out << "\n  t=" << i << " local=(" << s.local.r << "," << s.local.c << ") action=" << s.action
        << " log_prob=" << s.log_prob << " logits_sq=" << s.logits_sq_norm << " reward=" << s.reward
        << " G=" << (i < t.returns.size() ? t.returns[i] : NAN);
  }
  return out.str();
}

}  // namespace

Trajectory rollout_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index, Pos start,
                          std::optional<Pos> frame_room, int t1_max, double gamma, ActionMode mode, Rng* rng) {
  if (mode == ActionMode::kSample && !rng) throw ConfigError("sampled rollouts need an rng");
  auto run = run_option(layout, theta, option_index, start, frame_room, t1_max, mode, rng, false);
  std::vector<double> rewards;
  for (const auto& s : run.traj.steps) rewards.push_back(s.reward);
  run.traj.returns = discounted_returns(rewards, gamma);
  return std::move(run.traj);
}

Trajectory rollout_option(const grid::BuildingLayout& layout, const hyper::HypernetModel& hnet, int option_index, Pos start,
                          const TrainConfig& config, Rng& rng) {
  const auto theta = hyper::generate_policy_params(hnet, hyper::OptionEmbedding::canonical(option_index, hnet.embedding_width()));
  return rollout_option(layout, theta, option_index, start, std::nullopt, config.t1_max, config.gamma, ActionMode::kSample, &rng);
}

Execution execute_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index, Pos start,
                         std::optional<Pos> frame_room, int t1_max, bool stop_at_goal) {
  return run_option(layout, theta, option_index, start, frame_room, t1_max, ActionMode::kGreedy, nullptr, stop_at_goal).exec;
}

std::vector<nn::ParamVector> generate_all(const hyper::HypernetModel& hnet) {
  std::vector<nn::ParamVector> out;
  for (int i = 0; i < hyper::kNumOptions; ++i)
    out.push_back(hyper::generate_policy_params(hnet, hyper::OptionEmbedding::canonical(i, hnet.embedding_width())));
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double next = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    next = rewards[i] + gamma * next;
    g[i] = next;
  }
  return g;
}

LossAndGrad reinforce_policy_grad(const nn::ParamVector& theta, std::span<const Vector> inputs, std::span<const int> actions,
                                  std::span<const double> advantages, double lambda) {
  if (inputs.size() != actions.size() || inputs.size() != advantages.size())
    throw ConfigError("reinforce: inputs, actions and advantages differ in length");
  LossAndGrad out;
  out.grad.assign(theta.size(), 0.0);
  if (inputs.empty()) return out;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto fp = nn::dense_forward(theta, inputs[t]);
    const Vector& z = fp.output;
    out.loss += -nn::categorical_log_prob(z, actions[t]) * advantages[t] + lambda * z.squaredNorm();
    Vector g = -advantages[t] * nn::categorical_log_prob_grad(z, actions[t]) + 2.0 * lambda * z;
    auto gp = nn::backward(fp.tape, g);
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += gp.params[i];
  }
  return out;
}

LossAndGrad reinforce_hypernet_grad(const hyper::HypernetModel& hnet, const nn::VectorRef& embedding,
                                    std::span<const Vector> inputs, std::span<const int> actions,
                                    std::span<const double> advantages, double lambda) {
  auto gen = hyper::generate_with_tape(hnet, embedding);
  auto pg = reinforce_policy_grad(gen.theta, inputs, actions, advantages, lambda);
  const Vector dtheta = Eigen::Map<const Vector>(pg.grad.data(), static_cast<Eigen::Index>(pg.grad.size()));
  auto g = nn::backward(gen.tape, dtheta);
  return {pg.loss, std::move(g.params)};
}

nn::NetworkSpec baseline_spec(int input_width, int hidden) {
  return {{input_width, hidden, 1}, {nn::Activation::kRelu, nn::Activation::kLinear}, std::nullopt};
}

double baseline_value(const nn::ParamVector& baseline, const nn::VectorRef& input) {
  return nn::dense_eval(baseline, input)[0];
}

LossAndGrad baseline_mse_grad(const nn::ParamVector& baseline, std::span<const Vector> inputs, std::span<const double> targets) {
  if (inputs.size() != targets.size()) throw ConfigError("baseline: inputs and targets differ in length");
  LossAndGrad out;
  out.grad.assign(baseline.size(), 0.0);
  if (inputs.empty()) return out;
  const double n = static_cast<double>(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto fp = nn::dense_forward(baseline, inputs[t]);
    const double err = fp.output[0] - targets[t];
    out.loss += err * err / n;
    auto gp = nn::backward(fp.tape, Vector::Constant(1, 2.0 * err / n));
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += gp.params[i];
  }
  return out;
}

double reinforce_loss(const Trajectory& traj, const nn::ParamVector& baseline, double lambda) {
  double loss = 0.0;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& s = traj.steps[t];
    const double adv = traj.returns[t] - baseline_value(baseline, hyper::local_onehot(s.local));
    loss += -s.log_prob * adv + lambda * s.logits_sq_norm;
  }
  return loss;
}

TrainedOptions train_options(const grid::BuildingLayout& layout, const TrainConfig& config) {
  config.validate();
  std::vector<std::vector<Pos>> rooms(hyper::kNumOptions);
  for (int k = 0; k < hyper::kNumOptions; ++k) {
    rooms[k] = training_rooms(layout, k);
    if (rooms[k].empty())
      throw ConfigError("layout has no room where option " + std::to_string(k) + " can leave through its door");
  }

  Rng init_rng = make_rng(config.seed, {0x1417});
  TrainedOptions out{hyper::init_hypernet(init_rng, config.policy, config.hypernet_trunk), {}, {}};
  auto hadam = nn::AdamState::zeros(out.hnet.params.size(), config.lr_agent);
  std::vector<nn::AdamState> badam;
  for (int k = 0; k < hyper::kNumOptions; ++k) {
    out.baselines.push_back(nn::init_params(baseline_spec(hyper::kLocalCells, config.baseline_hidden), init_rng));
    badam.push_back(nn::AdamState::zeros(out.baselines.back().size(), config.lr_baseline));
  }
  out.curve.reserve(static_cast<std::size_t>(config.episodes_per_option) * hyper::kNumOptions);

  for (int ep = 0; ep < config.episodes_per_option; ++ep) {
    for (int k = 0; k < hyper::kNumOptions; ++k) {
      Rng rng = make_rng(config.seed, {0x0e9, static_cast<std::uint64_t>(ep), static_cast<std::uint64_t>(k)});
      const Pos room = rooms[k][uniform_int(rng, static_cast<int>(rooms[k].size()))];
      const Pos start = grid::BuildingLayout::room_origin(room) + Pos{uniform_int(rng, 3), uniform_int(rng, 3)};
      const Vector emb = hyper::OptionEmbedding::canonical(k, out.hnet.embedding_width()).values;

      const auto theta = hyper::generate_policy_params(out.hnet, emb);
      const Trajectory traj = rollout_option(layout, theta, k, start, room, config.t1_max, config.gamma, ActionMode::kSample, &rng);

      CurveRow row{ep, k, traj.total_reward(), static_cast<int>(traj.steps.size()), 0.0, 0.0, traj.success};
      if (!traj.steps.empty()) {
        std::vector<Vector> inputs;
        std::vector<int> actions;
        std::vector<double> adv;
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
          inputs.push_back(hyper::local_onehot(traj.steps[t].local));
          actions.push_back(traj.steps[t].action);
          adv.push_back(traj.returns[t] - baseline_value(out.baselines[k], inputs.back()));
        }
        auto bl = baseline_mse_grad(out.baselines[k], inputs, traj.returns);
        auto pg = reinforce_hypernet_grad(out.hnet, emb, inputs, actions, adv, config.lambda_l2);
        if (!std::isfinite(pg.loss) || !std::isfinite(bl.loss))
          throw NumericError(dump_episode(traj, "non-finite loss at episode " + std::to_string(ep)));
        try {
          nn::adam_step(badam[k], out.baselines[k].values(), bl.grad);
          nn::adam_step(hadam, out.hnet.params.values(), pg.grad);
        } catch (const NumericError& e) {
          throw NumericError(dump_episode(traj, std::string(e.what()) + " at episode " + std::to_string(ep)));
        }
        row.loss = pg.loss;
        row.baseline_mse = bl.loss;
      }
      out.curve.push_back(row);
    }
  }
  return out;
}

OptionEval evaluate_option(const grid::BuildingLayout& layout, const nn::ParamVector& theta, int option_index, int t1_max) {
  OptionEval ev;
  ev.option_index = option_index;
  int successes = 0;
  double steps = 0.0;
  double bfs = 0.0;
  for (Pos room : training_rooms(layout, option_index)) {
    const Pos subgoal = option_subgoal(layout, room, option_index);
    const auto dist = grid::bfs_distances(layout, subgoal);
    for (int r = 0; r < grid::kRoomSize; ++r) {
      for (int c = 0; c < grid::kRoomSize; ++c) {
        const Pos start = grid::BuildingLayout::room_origin(room) + Pos{r, c};
        ++ev.starts;
        const auto t = rollout_option(layout, theta, option_index, start, room, t1_max, 1.0, ActionMode::kGreedy, nullptr);
        if (!t.success) continue;
        ++successes;
        steps += static_cast<double>(t.steps.size());
        bfs += dist[layout.index(start)];
      }
    }
  }
  if (ev.starts > 0) ev.success_rate = static_cast<double>(successes) / ev.starts;
  if (successes > 0) {
    ev.mean_steps = steps / successes;
    ev.mean_bfs_steps = bfs / successes;
  }
  return ev;
}

std::string curve_csv_header() { return "episode,option_index,episode_reward,episode_steps,loss,baseline_mse,success"; }

std::string curve_csv_row(const CurveRow& row) {
  std::ostringstream out;
  out << std::setprecision(17) << row.episode << ',' << row.option_index << ',' << row.episode_reward << ','
      << row.episode_steps << ',' << row.loss << ',' << row.baseline_mse << ',' << (row.success ? 1 : 0);
  return out.str();
}

}  // namespace apc::options
