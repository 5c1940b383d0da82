#include "apc/world_model/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "apc/common/errors.hpp"
#include "apc/nn/adam.hpp"
#include "apc/options/options.hpp"

namespace apc::wm {

using grid::Pos;
using nn::Vector;

namespace {

double normalize(int index, int extent) { return extent > 1 ? static_cast<double>(index) / (extent - 1) : 0.0; }

Vector fs_input(const nn::VectorRef& state, const nn::VectorRef& option) {
  Vector x(state.size() + option.size());
  x << state, option;
  return x;
}

}  // namespace

Vector encode_room(const grid::BuildingLayout& layout, Pos room) {
  Vector s(kStateWidth);
  const auto img = grid::render_room_image(layout, room);
  for (int i = 0; i < grid::kImageCells; ++i) s[i] = img[i];
  s[grid::kImageCells] = normalize(room.r, layout.rooms_h());
  s[grid::kImageCells + 1] = normalize(room.c, layout.rooms_w());
  return s;
}

Vector encode_high_state(const grid::BuildingLayout& layout, Pos cell, std::optional<Pos> last_room) {
  return encode_room(layout, grid::local_frame(layout, cell, last_room).room);
}

Pos decode_location(const grid::BuildingLayout& layout, const nn::VectorRef& state) {
  auto snap = [](double v, int extent) {
    if (extent <= 1) return 0;
    return std::clamp(static_cast<int>(std::lround(v * (extent - 1))), 0, extent - 1);
  };
  return {snap(state[grid::kImageCells], layout.rooms_h()), snap(state[grid::kImageCells + 1], layout.rooms_w())};
}

std::array<std::uint8_t, grid::kImageCells> binarize_image(const nn::VectorRef& state) {
  std::array<std::uint8_t, grid::kImageCells> out{};
  for (int i = 0; i < grid::kImageCells; ++i) out[i] = state[i] > 0.5 ? 1 : 0;
  return out;
}

nn::NetworkSpec default_fs_spec(int option_width) {
  using nn::Activation;
  return {{kStateWidth + option_width, 128, 256, 256, kStateWidth},
          {Activation::kRelu, Activation::kTanh, Activation::kElu, Activation::kLinear},
          1};
}

WorldModel init_world_model(Rng& rng, const nn::NetworkSpec& spec) {
  spec.validate();
  if (!spec.is_recurrent()) throw ConfigError("world model needs a recurrent layer");
  if (spec.output_width() != kStateWidth || spec.input_width() <= kStateWidth)
    throw ConfigError("world model must map state + option to a 27-wide state");
  return {nn::init_params(spec, rng)};
}

FsOutput fs_step(const WorldModel& model, const nn::VectorRef& state, const nn::VectorRef& option, const nn::LstmState& hidden) {
  if (state.size() != kStateWidth || option.size() != model.option_width())
    throw ConfigError("fs_step: state or option width mismatch");
  auto out = nn::recurrent_step(model.params, fs_input(state, option), hidden);
  return {out.output.cwiseMax(0.0).cwiseMin(1.0), std::move(out.hidden)};
}

std::size_t TransitionDataset::size() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.steps.size();
  return n;
}

TransitionDataset execute_and_collect(const grid::BuildingLayout& layout, const std::vector<nn::ParamVector>& thetas,
                                      const CollectConfig& config, Rng& rng) {
  if (thetas.size() != static_cast<std::size_t>(hyper::kNumOptions)) throw ConfigError("expected one policy per option");
  const auto rooms = layout.rooms();
  TransitionDataset data;
  for (int e = 0; e < config.episodes; ++e) {
    Episode ep;
    Pos room = rooms[uniform_int(rng, static_cast<int>(rooms.size()))];
    Pos cell = grid::BuildingLayout::room_origin(room) + Pos{uniform_int(rng, 3), uniform_int(rng, 3)};
    for (int t = 0; t < config.options_per_episode; ++t) {
      const int k = uniform_int(rng, hyper::kNumOptions);
      const auto ex = options::execute_option(layout, thetas[k], k, cell, room, config.t1_max, false);
      ep.steps.push_back({encode_room(layout, room), k, encode_room(layout, ex.end_room)});
      cell = ex.end;
      room = ex.end_room;
    }
    data.episodes.push_back(std::move(ep));
  }
  return data;
}

bool episodes_chain(const TransitionDataset& data) {
  for (const auto& ep : data.episodes) {
    for (std::size_t t = 0; t + 1 < ep.steps.size(); ++t)
      if (ep.steps[t].next != ep.steps[t + 1].state) return false;
  }
  return true;
}

double sequence_mse(const nn::ParamVector& params, std::span<const Vector> inputs, std::span<const Vector> targets,
                    std::vector<double>* grad) {
  if (inputs.size() != targets.size()) throw ConfigError("sequence_mse: inputs and targets differ in length");
  if (inputs.empty()) {
    if (grad) grad->assign(params.size(), 0.0);
    return 0.0;
  }
  nn::Tape tape;
  auto hidden = nn::LstmState::zeros(params.spec().recurrent_width());
  std::vector<Vector> dys;
  double loss = 0.0;
  const double scale = 1.0 / (static_cast<double>(params.spec().output_width()) * inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto out = nn::recurrent_step(params, inputs[t], hidden, grad ? &tape : nullptr);
    hidden = std::move(out.hidden);
    const Vector err = out.output - targets[t];
    loss += err.squaredNorm() * scale;
    if (grad) dys.push_back(2.0 * scale * err);
  }
  if (grad) *grad = nn::backward(tape, dys).params;
  return loss;
}

double episode_mse(const WorldModel& model, const Episode& ep, std::vector<double>* grad) {
  std::vector<Vector> inputs, targets;
  for (const auto& tr : ep.steps) {
    inputs.push_back(fs_input(tr.state, hyper::OptionEmbedding::canonical(tr.option_index, model.option_width()).values));
    targets.push_back(tr.next);
  }
  return sequence_mse(model.params, inputs, targets, grad);
}

WmTrainResult train_world_model(const TransitionDataset& data, const WmTrainConfig& config, const nn::NetworkSpec& spec) {
  Rng rng = make_rng(config.seed, {0xf5});
  return train_world_model(data, config, init_world_model(rng, spec));
}

WmTrainResult train_world_model(const TransitionDataset& data, const WmTrainConfig& config, WorldModel init) {
  if (data.size() == 0) throw ConfigError("world-model dataset is empty");
  if (!(config.lr > 0.0) || config.epochs < 1) throw ConfigError("world-model lr and epochs must be positive");
  WmTrainResult res{std::move(init), {}};
  auto adam = nn::AdamState::zeros(res.model.params.size(), config.lr);
  Rng rng = make_rng(config.seed, {0x5f1e});
  std::vector<std::size_t> order(data.episodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_int(rng, static_cast<int>(i))]);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto& ep = data.episodes[idx];
      if (ep.steps.empty()) continue;
      const double loss = episode_mse(res.model, ep, &grad);
      if (!std::isfinite(loss))
        throw NumericError("non-finite world-model loss in epoch " + std::to_string(epoch) + ", episode " + std::to_string(idx));
      nn::adam_step(adam, res.model.params.values(), grad);
      total += loss * ep.steps.size();
    }
    res.epoch_loss.push_back(total / data.size());
  }
  return res;
}

Fidelity evaluate_world_model(const WorldModel& model, const TransitionDataset& data, const grid::BuildingLayout& layout) {
  Fidelity f;
  std::size_t image_ok = 0, loc_ok = 0;
  const double scale_r = std::max(layout.rooms_h() - 1, 1);
  const double scale_c = std::max(layout.rooms_w() - 1, 1);
  for (const auto& ep : data.episodes) {
    auto hidden = model.zero_hidden();
    for (const auto& tr : ep.steps) {
      const Vector option = hyper::OptionEmbedding::canonical(tr.option_index, model.option_width()).values;
      auto out = fs_step(model, tr.state, option, hidden);
      hidden = std::move(out.hidden);
      ++f.transitions;
      if (binarize_image(out.state) == binarize_image(tr.next)) ++image_ok;
      const double er = std::abs(out.state[grid::kImageCells] - tr.next[grid::kImageCells]) * scale_r;
      const double ec = std::abs(out.state[grid::kImageCells + 1] - tr.next[grid::kImageCells + 1]) * scale_c;
      f.max_location_error = std::max({f.max_location_error, er, ec});
      if (er < 0.5 && ec < 0.5) ++loc_ok;
      f.mse += (out.state - tr.next).squaredNorm() / kStateWidth;
    }
  }
  if (f.transitions) {
    f.image_exact = static_cast<double>(image_ok) / f.transitions;
    f.location_exact = static_cast<double>(loc_ok) / f.transitions;
    f.mse /= f.transitions;
  }
  return f;
}

std::string dataset_csv_header() {
  std::string h = "episode_id,t";
  for (int i = 0; i < kStateWidth; ++i) h += ",R_t_" + std::to_string(i);
  h += ",option_index";
  for (int i = 0; i < kStateWidth; ++i) h += ",R_next_" + std::to_string(i);
  return h;
}

void write_dataset_csv(std::ostream& out, const TransitionDataset& data) {
  out << dataset_csv_header() << '\n' << std::setprecision(17);
  for (std::size_t e = 0; e < data.episodes.size(); ++e) {
    const auto& ep = data.episodes[e];
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const auto& tr = ep.steps[t];
      out << e << ',' << t;
      for (int i = 0; i < kStateWidth; ++i) out << ',' << tr.state[i];
      out << ',' << tr.option_index;
      for (int i = 0; i < kStateWidth; ++i) out << ',' << tr.next[i];
      out << '\n';
    }
  }
}

}  // namespace apc::wm
