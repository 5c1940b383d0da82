#include "apc/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "apc/common/errors.hpp"

namespace apc::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + v + "' (expected true or false)");
}

std::vector<std::string> split(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split(v)) out.push_back(parse_number<int>(key, s));
  if (out.empty()) throw ConfigError("bad value for " + key + ": empty list");
  return out;
}

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define APC_FIELD(expr, type)                                                             \
  Field {                                                                                 \
    [](ExperimentConfig& c, const std::string& v) { (expr) = parse_number<type>("", v); }, \
        [](const ExperimentConfig& c) {                                                   \
          std::ostringstream o;                                                           \
          o << std::setprecision(17) << (expr);                                           \
          return o.str();                                                                 \
        }                                                                                 \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"layout", {[](ExperimentConfig& c, const std::string& v) { c.layout_path = v; },
                  [](const ExperimentConfig& c) { return c.layout_path; }}},
      {"output_dir", {[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                      [](const ExperimentConfig& c) { return c.output_dir; }}},
      {"checkpoint", {[](ExperimentConfig& c, const std::string& v) { c.checkpoint = v; },
                      [](const ExperimentConfig& c) { return c.checkpoint; }}},
      {"seed", APC_FIELD(c.seed, std::uint64_t)},
      {"threads", APC_FIELD(c.threads, int)},
      {"hypernet_layers", {[](ExperimentConfig& c, const std::string& v) { c.hypernet_layers = parse_ints("hypernet_layers", v); },
                           [](const ExperimentConfig& c) { return join(c.hypernet_layers); }}},
      {"policy_layers", {[](ExperimentConfig& c, const std::string& v) { c.policy_layers = parse_ints("policy_layers", v); },
                         [](const ExperimentConfig& c) { return join(c.policy_layers); }}},
      {"fs_layers", {[](ExperimentConfig& c, const std::string& v) { c.fs_layers = parse_ints("fs_layers", v); },
                     [](const ExperimentConfig& c) { return join(c.fs_layers); }}},
      {"flat_layers", {[](ExperimentConfig& c, const std::string& v) { c.flat_layers = parse_ints("flat_layers", v); },
                       [](const ExperimentConfig& c) { return join(c.flat_layers); }}},
      {"gamma", APC_FIELD(c.options.gamma, double)},
      {"lr_agent", APC_FIELD(c.options.lr_agent, double)},
      {"lr_baseline", APC_FIELD(c.options.lr_baseline, double)},
      {"lr_worldmodel", APC_FIELD(c.world_model.lr, double)},
      {"lambda_l2", APC_FIELD(c.options.lambda_l2, double)},
      {"t1_max", APC_FIELD(c.options.t1_max, int)},
      {"episodes_per_option", APC_FIELD(c.options.episodes_per_option, int)},
      {"baseline_hidden", APC_FIELD(c.options.baseline_hidden, int)},
      {"wm_episodes", APC_FIELD(c.collect.episodes, int)},
      {"wm_options_per_episode", APC_FIELD(c.collect.options_per_episode, int)},
      {"wm_epochs", APC_FIELD(c.world_model.epochs, int)},
      {"wm_heldout_episodes", APC_FIELD(c.wm_heldout_episodes, int)},
      {"horizon", APC_FIELD(c.planner.horizon, int)},
      {"num_trajectories", APC_FIELD(c.planner.num_trajectories, int)},
      {"per_option_cost", APC_FIELD(c.planner.per_option_cost, double)},
      {"goal_bonus", APC_FIELD(c.planner.goal_bonus, double)},
      {"distance_weight", APC_FIELD(c.planner.distance_weight, double)},
      {"sampling", {[](ExperimentConfig& c, const std::string& v) {
                      if (v == "uniform") c.planner.sampling = plan::Sampling::kUniform;
                      else if (v == "by_room_type") c.planner.sampling = plan::Sampling::kByRoomType;
                      else throw ConfigError("bad value for sampling: '" + v + "' (uniform or by_room_type)");
                    },
                    [](const ExperimentConfig& c) {
                      return std::string(c.planner.sampling == plan::Sampling::kUniform ? "uniform" : "by_room_type");
                    }}},
      {"snap", {[](ExperimentConfig& c, const std::string& v) { c.planner.snap = parse_bool("snap", v); },
                [](const ExperimentConfig& c) { return std::string(c.planner.snap ? "true" : "false"); }}},
      {"max_options", APC_FIELD(c.planner.max_options, int)},
      {"low_level_max_steps", APC_FIELD(c.planner.max_primitive_steps, int)},
      {"flat_t_max", APC_FIELD(c.flat.t_max, int)},
      {"goal_changes", APC_FIELD(c.goal_changes, int)},
      {"flat_episodes_per_goal", APC_FIELD(c.flat_episodes_per_goal, int)},
      {"apc_episodes_per_goal", APC_FIELD(c.apc_episodes_per_goal, int)},
      {"goal_max_room_distance", APC_FIELD(c.goal_max_room_distance, int)},
      {"moving_average_window", APC_FIELD(c.moving_average_window, int)},
      {"compare_max_distance", APC_FIELD(c.compare_max_distance, int)},
      {"compare_trials", APC_FIELD(c.compare_trials, int)},
      {"transfer_layouts", {[](ExperimentConfig& c, const std::string& v) { c.transfer_layouts = split(v); },
                            [](const ExperimentConfig& c) {
                              std::string s;
                              for (std::size_t i = 0; i < c.transfer_layouts.size(); ++i) s += (i ? "," : "") + c.transfer_layouts[i];
                              return s;
                            }}},
      {"transfer_goals", APC_FIELD(c.transfer_goals, int)},
      {"gradcheck_tolerance", APC_FIELD(c.gradcheck_tolerance, double)},
  };
  return table;
}

#undef APC_FIELD

nn::NetworkSpec recurrent_spec(int in, const std::vector<int>& hidden, int out, nn::Activation after, const char* what) {
  if (hidden.size() < 2) throw ConfigError(std::string(what) + " needs at least two hidden widths (the second is the LSTM)");
  nn::NetworkSpec s;
  s.widths = {in};
  s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
  s.widths.push_back(out);
  s.activations = {nn::Activation::kRelu, nn::Activation::kTanh};
  s.activations.resize(hidden.size(), after);
  s.activations.push_back(nn::Activation::kLinear);
  s.recurrent_layer = 1;
  s.validate();
  return s;
}

}  // namespace

void ExperimentConfig::finalize() {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");

  if (hypernet_layers.size() < 2 || hypernet_layers.front() != hyper::kEmbeddingWidth)
    throw ConfigError("hypernet_layers must start with the embedding width " + std::to_string(hyper::kEmbeddingWidth));
  options.hypernet_trunk = hypernet_layers;

  if (policy_layers.size() < 2 || policy_layers.back() != grid::kNumActions)
    throw ConfigError("policy_layers must end with 4 actions");
  options.policy.widths = {hyper::kLocalCells};
  options.policy.widths.insert(options.policy.widths.end(), policy_layers.begin(), policy_layers.end());
  options.policy.activations.assign(policy_layers.size() - 1, nn::Activation::kRelu);
  options.policy.activations.push_back(nn::Activation::kLinear);
  options.policy.recurrent_layer.reset();
  options.seed = seed;
  options.validate();

  if (flat_layers.empty() || flat_layers.back() != grid::kNumActions) throw ConfigError("flat_layers must end with 4 actions");
  flat.policy = recurrent_spec(2, {flat_layers.begin(), flat_layers.end() - 1}, grid::kNumActions, nn::Activation::kRelu,
                               "flat_layers");
  flat.gamma = options.gamma;
  flat.lr_agent = options.lr_agent;
  flat.lr_baseline = options.lr_baseline;
  flat.lambda_l2 = options.lambda_l2;
  flat.baseline_hidden = options.baseline_hidden;
  flat.seed = seed;
  flat.validate();

  fs_spec();
  if (collect.episodes < 1 || collect.options_per_episode < 1 || wm_heldout_episodes < 1)
    throw ConfigError("world-model data counts must be positive");
  collect.t1_max = options.t1_max;
  world_model.seed = seed;
  if (!(world_model.lr > 0.0) || world_model.epochs < 1) throw ConfigError("lr_worldmodel and wm_epochs must be positive");

  planner.t1_max = options.t1_max;
  planner.seed = seed;
  planner.validate();

  if (goal_changes < 0 || flat_episodes_per_goal < 1 || apc_episodes_per_goal < 1 || goal_max_room_distance < 1 ||
      moving_average_window < 1)
    throw ConfigError("goal-change counts must be positive");
  if (compare_max_distance < 0 || compare_trials < 1) throw ConfigError("plan-compare counts must be positive");
  if (transfer_goals < 1) throw ConfigError("transfer_goals must be positive");
  if (!(gradcheck_tolerance > 0.0)) throw ConfigError("gradcheck_tolerance must be positive");
}

nn::NetworkSpec ExperimentConfig::fs_spec() const {
  return recurrent_spec(wm::kStateWidth + hyper::kEmbeddingWidth, fs_layers, wm::kStateWidth, nn::Activation::kElu,
                        "fs_layers");
}

std::string ExperimentConfig::checkpoint_path() const {
  return checkpoint.empty() ? output_dir + "/checkpoint.apck" : checkpoint;
}

KeyValues parse_key_values(std::istream& in, const std::string& name) {
  KeyValues out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(name + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(name + ":" + std::to_string(n) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(config, value);
  } catch (const ConfigError&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ExperimentConfig c;
  for (const auto& [k, v] : parse_key_values(in, path)) {
    try {
      apply_setting(c, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return c;
}

std::string canonical_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, f] : fields()) {
    if (k == "output_dir" || k == "checkpoint" || k == "threads") continue;  // do not change results
    out += k + "=" + f.get(config) + "\n";
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(canonical_text(config)); }

}  // namespace apc::harness
