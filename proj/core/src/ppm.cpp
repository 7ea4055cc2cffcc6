#include "rrm/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "rrm/error.hpp"

namespace rrm {

unsigned char quantize_u8(double v) {
  const double clipped = std::min(1.0, std::max(0.0, v));
  return static_cast<unsigned char>(std::floor(255.0 * clipped + 0.5));
}

std::size_t write_ppm(const Tensor& rgb, const std::filesystem::path& path) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw DimensionError("write_ppm expects [3, H, W], got " + shape_string(rgb.shape()));
  }
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  std::vector<unsigned char> bytes(3 * h * w);
  std::size_t clipped = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = rgb[(c * h + y) * w + x];
        if (v < 0.0 || v > 1.0) ++clipped;
        bytes[(y * w + x) * 3 + c] = quantize_u8(v);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
  return clipped;
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

std::size_t parse_extent(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used != token.size() || v <= 0) throw FormatError("");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("bad PPM header field '" + token + "' in " + path.string());
  }
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in) != "P6") throw FormatError(path.string() + " is not a binary PPM (P6)");
  const std::size_t w = parse_extent(next_token(in), path);
  const std::size_t h = parse_extent(next_token(in), path);
  if (parse_extent(next_token(in), path) != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
  std::vector<unsigned char> bytes(3 * h * w);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  std::vector<double> values(bytes.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) values[(c * h + y) * w + x] = bytes[(y * w + x) * 3 + c] / 255.0;
    }
  }
  return Tensor({3, h, w}, std::move(values));
}

}  // namespace rrm
