#include "rrm/raw_io.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "rrm/error.hpp"

namespace rrm {

namespace {

constexpr std::array<char, 4> kRawMagic = {'R', 'R', 'A', 'W'};

// 0 = R, 1 = G, 2 = B.
constexpr int kXTrans[6][6] = {
    {1, 1, 0, 1, 1, 2},
    {1, 1, 2, 1, 1, 0},
    {2, 0, 1, 0, 2, 1},
    {1, 1, 2, 1, 1, 0},
    {1, 1, 0, 1, 1, 2},
    {0, 2, 1, 2, 0, 1},
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

std::string cfa_name(Cfa cfa) { return cfa == Cfa::BayerRGGB ? "RGGB" : "XTRANS"; }

Cfa parse_cfa(const std::string& name) {
  if (name == "RGGB") return Cfa::BayerRGGB;
  if (name == "XTRANS") return Cfa::XTrans;
  throw ConfigError("unknown CFA pattern '" + name + "' (expected RGGB or XTRANS)");
}

std::size_t cfa_block(Cfa cfa) { return cfa == Cfa::BayerRGGB ? 2 : 3; }
std::size_t cfa_channels(Cfa cfa) { return cfa_block(cfa) * cfa_block(cfa); }

int cfa_color(Cfa cfa, std::size_t row, std::size_t col) {
  if (cfa == Cfa::BayerRGGB) {
    const std::size_t site = (row % 2) * 2 + (col % 2);
    return site == 0 ? 0 : (site == 3 ? 2 : 1);
  }
  return kXTrans[row % 6][col % 6];
}

void validate_for_packing(const RawImage& raw) {
  const std::size_t b = cfa_block(raw.cfa);
  if (raw.width == 0 || raw.height == 0 || raw.width % b != 0 || raw.height % b != 0) {
    throw ConfigError(cfa_name(raw.cfa) + " mosaic of " + std::to_string(raw.height) + "x" +
                      std::to_string(raw.width) + " is not divisible by " + std::to_string(b));
  }
  if (!(raw.white_level > raw.black_level)) {
    throw ConfigError("white level must exceed black level");
  }
  if (!(raw.exposure_ratio > 0.0)) throw ConfigError("exposure ratio must be positive");
  if (raw.plane.size() != raw.width * raw.height) {
    throw ConfigError("plane holds " + std::to_string(raw.plane.size()) + " values for " +
                      std::to_string(raw.height) + "x" + std::to_string(raw.width));
  }
}

Tensor pack(const RawImage& raw) {
  validate_for_packing(raw);
  const std::size_t h = raw.height, w = raw.width;
  std::vector<double> normalized(h * w);
  const double range = raw.white_level - raw.black_level;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double v = raw.exposure_ratio * (static_cast<double>(raw.plane[i]) - raw.black_level) / range;
    normalized[i] = std::clamp(v, 0.0, 1.0);
  }
  return pack_mosaic(Tensor({1, h, w}, std::move(normalized)), raw.cfa);
}

Tensor pack_mosaic(const Tensor& mosaic, Cfa cfa) {
  const std::size_t b = cfa_block(cfa);
  if (mosaic.rank() != 3 || mosaic.dim(0) != 1) {
    throw DimensionError("pack_mosaic expects [1, H, W], got " + shape_string(mosaic.shape()));
  }
  const std::size_t h = mosaic.dim(1), w = mosaic.dim(2);
  if (h % b != 0 || w % b != 0) {
    throw ConfigError(cfa_name(cfa) + " mosaic of " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by " + std::to_string(b));
  }
  const std::size_t ph = h / b, pw = w / b;
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t c = (y % b) * b + (x % b);
      out[(c * ph + y / b) * pw + x / b] = mosaic[y * w + x];
    }
  }
  return Tensor({b * b, ph, pw}, std::move(out));
}

Tensor mosaic(const Tensor& rgb, Cfa cfa) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw DimensionError("mosaic expects [3, H, W], got " + shape_string(rgb.shape()));
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out[y * w + x] = rgb[(static_cast<std::size_t>(cfa_color(cfa, y, x)) * h + y) * w + x];
    }
  }
  return Tensor({1, h, w}, std::move(out));
}

Tensor unpack(const Tensor& packed, Cfa cfa) {
  const std::size_t b = cfa_block(cfa);
  if (packed.rank() != 3 || packed.dim(0) != b * b) {
    throw ConfigError("unpack: " + shape_string(packed.shape()) + " does not match " + cfa_name(cfa) +
                      " (" + std::to_string(b * b) + " channels)");
  }
  const std::size_t ph = packed.dim(1), pw = packed.dim(2);
  const std::size_t h = ph * b, w = pw * b;
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t c = (y % b) * b + (x % b);
      out[y * w + x] = packed[(c * ph + y / b) * pw + x / b];
    }
  }
  return Tensor({1, h, w}, std::move(out));
}

std::vector<std::uint8_t> encode_raw_container(const RawImage& raw) {
  if (raw.plane.size() != raw.width * raw.height) {
    throw ConfigError("plane size does not match declared dimensions");
  }
  nlohmann::json header = {
      {"width", raw.width},
      {"height", raw.height},
      {"cfa", cfa_name(raw.cfa)},
      {"black_level", raw.black_level},
      {"white_level", raw.white_level},
      {"exposure_ratio", raw.exposure_ratio},
  };
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kRawMagic.begin(), kRawMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 2 * raw.plane.size());
  for (std::uint16_t v : raw.plane) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

RawImage decode_raw_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(kRawMagic.begin(), kRawMagic.end(), bytes.begin())) {
    throw FormatError("bad magic: not an RRAW container");
  }
  const std::size_t header_len = get_u32(bytes.data() + 4);
  if (8 + header_len > bytes.size()) throw FormatError("truncated RRAW header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("RRAW header is not valid JSON: ") + e.what());
  }
  RawImage raw;
  try {
    raw.width = header.at("width").get<std::size_t>();
    raw.height = header.at("height").get<std::size_t>();
    raw.cfa = parse_cfa(header.at("cfa").get<std::string>());
    raw.black_level = header.at("black_level").get<double>();
    raw.white_level = header.at("white_level").get<double>();
    raw.exposure_ratio = header.at("exposure_ratio").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("RRAW header field error: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  const std::size_t count = raw.width * raw.height;
  const std::size_t plane_bytes = bytes.size() - 8 - header_len;
  if (plane_bytes != 2 * count) {
    throw FormatError("RRAW plane holds " + std::to_string(plane_bytes / 2) + " values, header declares " +
                      std::to_string(raw.height) + "x" + std::to_string(raw.width));
  }
  raw.plane.resize(count);
  const std::uint8_t* p = bytes.data() + 8 + header_len;
  for (std::size_t i = 0; i < count; ++i) {
    raw.plane[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
  }
  return raw;
}

void write_raw_container(const RawImage& raw, const std::filesystem::path& path) {
  const auto bytes = encode_raw_container(raw);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

RawImage read_raw_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_raw_container(bytes);
}

}  // namespace rrm
