#include "rrm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rrm/config.hpp"
#include "rrm/error.hpp"

namespace rrm {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'K', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

struct Parsed {
  nlohmann::json header;
  const std::uint8_t* blob = nullptr;
  std::size_t blob_floats = 0;
};

Parsed parse(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const std::size_t header_len = get_u32(bytes.data() + 4);
  if (bytes.size() < 8 + header_len) throw FormatError("checkpoint header is truncated");
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::size_t blob_bytes = bytes.size() - 8 - header_len;
  if (blob_bytes % 4 != 0) throw FormatError("checkpoint blob length is not a multiple of 4");
  p.blob = bytes.data() + 8 + header_len;
  p.blob_floats = blob_bytes / 4;
  return p;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const RetinexRawMamba& net, std::size_t step, const nlohmann::json& extra) {
  const ParamList params = net.parameters();
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const NamedParam& p : params) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}, {"length", p.tensor.numel()}});
    offset += p.tensor.numel();
  }
  const nlohmann::json header = {
      {"config", net.config()}, {"seed", net.seed()}, {"step", step}, {"extra", extra}, {"tensors", tensors}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * offset);
  for (const NamedParam& p : params) {
    for (double v : p.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const Parsed parsed = parse(bytes);
  LoadedCheckpoint out;
  try {
    NetworkConfig config;
    from_json(parsed.header.at("config"), config);
    out.net = std::make_unique<RetinexRawMamba>(config, parsed.header.at("seed").get<std::uint64_t>());
    out.step = parsed.header.at("step").get<std::size_t>();
    out.extra = parsed.header.value("extra", nlohmann::json::object());

    ParamList params = out.net->parameters();
    const auto& tensors = parsed.header.at("tensors");
    if (tensors.size() != params.size()) {
      throw FormatError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, config expects " +
                        std::to_string(params.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& entry = tensors[k];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (name != params[k].name || shape != params[k].tensor.shape() || length != params[k].tensor.numel()) {
        throw FormatError("checkpoint tensor '" + name + "' does not match expected '" + params[k].name + "' " +
                          shape_string(params[k].tensor.shape()));
      }
      if (offset + length > parsed.blob_floats) throw FormatError("checkpoint tensor '" + name + "' exceeds the blob");
      auto values = params[k].tensor.mutable_data();
      for (std::size_t i = 0; i < length; ++i) {
        values[i] = static_cast<double>(std::bit_cast<float>(get_u32(parsed.blob + 4 * (offset + i))));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const RetinexRawMamba& net, std::size_t step,
                     const nlohmann::json& extra) {
  const auto bytes = encode_checkpoint(net, step, extra);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) { return parse(read_file(path)).header; }

}  // namespace rrm
