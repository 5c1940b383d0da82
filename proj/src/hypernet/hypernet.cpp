#include "apc/hypernet/hypernet.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "apc/common/errors.hpp"
#include "apc/nn/serialize.hpp"

namespace apc::hyper {

using nn::Activation;

namespace {
constexpr char kNetworkMagic[] = "APCN";
}

nn::NetworkSpec default_policy_spec() {
  return {{kLocalCells, 64, 64, grid::kNumActions}, {Activation::kRelu, Activation::kRelu, Activation::kLinear}, std::nullopt};
}

std::vector<int> default_trunk_widths() { return {kEmbeddingWidth, 128, 128}; }

nn::NetworkSpec make_hypernet_spec(const nn::NetworkSpec& target, const std::vector<int>& trunk) {
  if (trunk.empty()) throw ConfigError("hypernet trunk needs at least the embedding width");
  target.validate();
  nn::NetworkSpec spec;
  spec.widths = trunk;
  spec.widths.push_back(static_cast<int>(nn::param_count(target)));
  spec.activations.assign(trunk.size() - 1, Activation::kRelu);
  spec.activations.push_back(Activation::kLinear);
  spec.validate();
  return spec;
}

OptionEmbedding OptionEmbedding::canonical(int index, int width) {
  if (index < 0 || index >= kNumOptions) throw ConfigError("option index out of range: " + std::to_string(index));
  if (width < kNumOptions) throw ConfigError("embedding width must be at least 8");
  OptionEmbedding e;
  e.values = nn::Vector::Zero(width);
  e.values[index] = 1.0;
  e.option_index = index;
  e.corner = static_cast<grid::Corner>(index % 4);
  e.room_type = static_cast<grid::RoomType>(index / 4);
  return e;
}

int option_index(grid::RoomType type, grid::Corner corner) {
  return 4 * static_cast<int>(type) + static_cast<int>(corner);
}

double trunk_output_mean_square(const nn::NetworkSpec& hypernet) {
  // Zero biases and w ~ N(0, gain / fan_in): Var z = gain / fan_in * sum E[x^2].
  // A relu keeps half of E[z^2]; other activations are treated as identity.
  double total = 1.0;  // sum of squares of a one-hot input
  for (int k = 0; k + 1 < hypernet.num_layers(); ++k) {
    const Activation a = hypernet.activations[k];
    const double gain = (a == Activation::kRelu || a == Activation::kElu) ? 2.0 : 1.0;
    const double var_z = gain / hypernet.widths[k] * total;
    const double per_unit = a == Activation::kRelu ? 0.5 * var_z : var_z;
    total = per_unit * hypernet.widths[k + 1];
  }
  return total;
}

HypernetModel init_hypernet(Rng& rng, const nn::NetworkSpec& policy, const std::vector<int>& trunk) {
  const nn::NetworkSpec spec = make_hypernet_spec(policy, trunk);
  HypernetModel model{policy, nn::init_params(spec, rng)};
  auto& v = model.params.values();
  const auto& head = model.params.layers().back();
  const double sum_sq = trunk_output_mean_square(spec);

  // Generated parameter j is row j of the head; map it to the policy block.
  for (const auto& block : nn::manifest(policy)) {
    const double target_var = 2.0 / block.fan_in;
    const double stddev = std::sqrt(target_var / sum_sq);
    for (std::size_t j = block.weights; j < block.end; ++j) {
      const bool is_bias = j >= block.bias;
      for (int col = 0; col < head.fan_in; ++col) {
        double& w = v[head.weights + static_cast<std::size_t>(col) * head.fan_out + j];
        w = is_bias ? 0.0 : stddev * standard_normal(rng);
      }
    }
  }
  return model;
}

GeneratedPolicy generate_with_tape(const HypernetModel& model, const nn::VectorRef& embedding) {
  if (embedding.size() != model.embedding_width())
    throw ConfigError("embedding width " + std::to_string(embedding.size()) + " does not match hypernet input " +
                      std::to_string(model.embedding_width()));
  auto fp = nn::dense_forward(model.params, embedding);
  return {nn::ParamVector(model.policy_spec, std::vector<double>(fp.output.data(), fp.output.data() + fp.output.size())),
          std::move(fp.tape)};
}

nn::ParamVector generate_policy_params(const HypernetModel& model, const nn::VectorRef& embedding) {
  if (embedding.size() != model.embedding_width())
    throw ConfigError("embedding width " + std::to_string(embedding.size()) + " does not match hypernet input " +
                      std::to_string(model.embedding_width()));
  const nn::Vector out = nn::dense_eval(model.params, embedding);
  return nn::ParamVector(model.policy_spec, std::vector<double>(out.data(), out.data() + out.size()));
}

nn::ParamVector generate_policy_params(const HypernetModel& model, const OptionEmbedding& option) {
  return generate_policy_params(model, option.values);
}

nn::Vector local_onehot(grid::Pos local) {
  if (local.r < 0 || local.c < 0 || local.r >= grid::kRoomSize || local.c >= grid::kRoomSize)
    throw ConfigError("local cell out of range");
  nn::Vector x = nn::Vector::Zero(kLocalCells);
  x[local.r * grid::kRoomSize + local.c] = 1.0;
  return x;
}

nn::Vector policy_logits(const nn::ParamVector& theta, const nn::VectorRef& input) {
  return nn::dense_eval(theta, input);
}

void write_network(std::ostream& out, const nn::ParamVector& params) {
  out.write(kNetworkMagic, 4);
  nn::write_u32(out, static_cast<std::uint32_t>(NetworkKind::kDirect));
  nn::write_params(out, params);
}

void write_network(std::ostream& out, const HypernetModel& model) {
  out.write(kNetworkMagic, 4);
  nn::write_u32(out, static_cast<std::uint32_t>(NetworkKind::kHypernet));
  nn::write_spec(out, model.policy_spec);
  nn::write_params(out, model.params);
}

StoredNetwork read_network(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kNetworkMagic, 4) != 0) throw FormatError("not an APCN network block");
  StoredNetwork s;
  const std::uint32_t kind = nn::read_u32(in);
  if (kind == static_cast<std::uint32_t>(NetworkKind::kDirect)) {
    s.kind = NetworkKind::kDirect;
  } else if (kind == static_cast<std::uint32_t>(NetworkKind::kHypernet)) {
    s.kind = NetworkKind::kHypernet;
    s.generates = nn::read_spec(in);
  } else {
    throw FormatError("unknown network kind " + std::to_string(kind));
  }
  s.params = nn::read_params(in);
  if (s.generates && static_cast<std::size_t>(s.params.spec().output_width()) != nn::param_count(*s.generates))
    throw FormatError("hypernet output width does not match the generated network");
  return s;
}

nn::ParamVector read_direct(std::istream& in) {
  auto s = read_network(in);
  if (s.kind != NetworkKind::kDirect) throw FormatError("expected a directly parameterized network, found a hypernet");
  return std::move(s.params);
}

HypernetModel read_hypernet(std::istream& in) {
  auto s = read_network(in);
  if (s.kind != NetworkKind::kHypernet) throw FormatError("expected a hypernet, found a directly parameterized network");
  return {*s.generates, std::move(s.params)};
}

}  // namespace apc::hyper
