#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "apc/nn/network.hpp"

namespace apc::nn {

// Parameter block layout ("APCP1"):
//   magic   "APCP1" (5 bytes)
//   int32   layer count L
//   int32   widths[L + 1]
//   int32   activation tags[L]
//   int32   recurrent layer index, -1 when absent
//   float64 values[param_count(spec)]
// Integers and floats are little-endian.
inline constexpr char kParamMagic[] = "APCP1";

// Manifest only: layer count, widths, activation tags, recurrent index.
void write_spec(std::ostream& out, const NetworkSpec& spec);
NetworkSpec read_spec(std::istream& in);

void write_params(std::ostream& out, const ParamVector& params);
ParamVector read_params(std::istream& in);

void save_params(const std::string& path, const ParamVector& params);
ParamVector load_params(const std::string& path);

// Little-endian primitives shared with other on-disk formats.
void write_i32(std::ostream& out, std::int32_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::int32_t read_i32(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace apc::nn
