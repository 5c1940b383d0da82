#include "apc/harness/checkpoint.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "apc/common/errors.hpp"
#include "apc/nn/serialize.hpp"

namespace apc::harness {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'C', 'K'};

void write_string(std::ostream& out, const std::string& s) {
  nn::write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t n = nn::read_u64(in);
  if (n > (1ULL << 30)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("unexpected end of data");
  return s;
}

}  // namespace

std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string encode_checkpoint(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  nn::write_u32(out, kCheckpointVersion);
  nn::write_u64(out, ck.seed);
  nn::write_u64(out, ck.config_hash);
  write_string(out, ck.config_text);
  write_string(out, grid::format_layout(ck.layout));
  hyper::write_network(out, ck.hnet);
  nn::write_u32(out, static_cast<std::uint32_t>(ck.baselines.size()));
  for (const auto& b : ck.baselines) hyper::write_network(out, b);
  nn::write_u32(out, ck.world_model ? 1 : 0);
  if (ck.world_model) hyper::write_network(out, ck.world_model->params);
  std::string bytes = out.str();
  std::ostringstream trailer(std::ios::binary);
  nn::write_u32(trailer, crc32_of(bytes));
  return bytes + trailer.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 12 || bytes.compare(0, 4, kMagic, 4) != 0)
    throw FormatError(name + ": not a checkpoint (bad magic or too short)");
  std::istringstream head(bytes.substr(4, 4));
  const std::uint32_t version = nn::read_u32(head);
  if (version != kCheckpointVersion)
    throw FormatError(name + ": checkpoint version " + std::to_string(version) + ", this build reads version " +
                      std::to_string(kCheckpointVersion));
  const std::string payload = bytes.substr(0, bytes.size() - 4);
  std::istringstream tail(bytes.substr(bytes.size() - 4));
  const std::uint32_t stored = nn::read_u32(tail);
  const std::uint32_t actual = crc32_of(payload);
  if (stored != actual) {
    std::ostringstream msg;
    msg << name << ": checksum failure (stored crc32 " << std::hex << stored << ", computed " << actual
        << "); the file is truncated or corrupt";
    throw FormatError(msg.str());
  }

  std::istringstream in(payload.substr(8), std::ios::binary);
  in.exceptions(std::ios::badbit);
  try {
    Checkpoint ck;
    ck.seed = nn::read_u64(in);
    ck.config_hash = nn::read_u64(in);
    ck.config_text = read_string(in);
    std::istringstream layout_text(read_string(in));
    ck.layout = grid::parse_layout(layout_text, name + "/layout");
    ck.hnet = hyper::read_hypernet(in);
    const std::uint32_t nb = nn::read_u32(in);
    if (nb > 64) throw FormatError("baseline count out of range");
    for (std::uint32_t i = 0; i < nb; ++i) ck.baselines.push_back(hyper::read_direct(in));
    if (nn::read_u32(in)) ck.world_model = wm::WorldModel{hyper::read_direct(in)};
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
    return ck;
  } catch (const ConfigError& e) {
    throw FormatError(name + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(name + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("checkpoint '" + path + "' not found; run `apc train-options` (and `apc train-worldmodel`) " +
                      "first or pass --checkpoint");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path);
}

}  // namespace apc::harness
