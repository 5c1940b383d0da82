#include "apc/nn/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "apc/common/errors.hpp"

namespace apc::nn {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw FormatError("unexpected end of parameter data");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_i32(std::ostream& out, std::int32_t v) { put_le(out, static_cast<std::uint32_t>(v)); }
void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void write_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
std::int32_t read_i32(std::istream& in) { return static_cast<std::int32_t>(get_le<std::uint32_t>(in)); }
std::uint32_t read_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void write_spec(std::ostream& out, const NetworkSpec& spec) {
  write_i32(out, spec.num_layers());
  for (int w : spec.widths) write_i32(out, w);
  for (Activation a : spec.activations) write_i32(out, static_cast<std::int32_t>(a));
  write_i32(out, spec.recurrent_layer ? *spec.recurrent_layer : -1);
}

NetworkSpec read_spec(std::istream& in) {
  const std::int32_t layers = read_i32(in);
  if (layers < 1 || layers > 64) throw FormatError("implausible layer count " + std::to_string(layers));
  NetworkSpec spec;
  for (int i = 0; i <= layers; ++i) spec.widths.push_back(read_i32(in));
  for (int i = 0; i < layers; ++i) {
    const std::int32_t tag = read_i32(in);
    if (tag < 0 || tag > 3) throw FormatError("unknown activation tag " + std::to_string(tag));
    spec.activations.push_back(static_cast<Activation>(tag));
  }
  const std::int32_t rec = read_i32(in);
  if (rec >= 0) spec.recurrent_layer = rec;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
  return spec;
}

void write_params(std::ostream& out, const ParamVector& params) {
  out.write(kParamMagic, 5);
  write_spec(out, params.spec());
  for (double v : params.values()) write_f64(out, v);
}

ParamVector read_params(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kParamMagic, 5) != 0) {
    throw FormatError("not an APCP1 parameter block");
  }
  NetworkSpec spec = read_spec(in);
  std::vector<double> values(param_count(spec));
  for (double& v : values) v = read_f64(in);
  return ParamVector(std::move(spec), std::move(values));
}

void save_params(const std::string& path, const ParamVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_params(out, params);
  if (!out) throw FormatError("write failed for " + path);
}

ParamVector load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_params(in);
}

}  // namespace apc::nn
