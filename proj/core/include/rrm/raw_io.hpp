#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rrm/tensor.hpp"

namespace rrm {

enum class Cfa { BayerRGGB, XTrans };

/// "RGGB" / "XTRANS".
std::string cfa_name(Cfa cfa);
Cfa parse_cfa(const std::string& name);

/// Side length of the packing block: 2 for Bayer, 3 for X-Trans.
std::size_t cfa_block(Cfa cfa);
/// Channels of the packed representation: 4 for Bayer, 9 for X-Trans.
std::size_t cfa_channels(Cfa cfa);

/// Color (0 = R, 1 = G, 2 = B) sampled at mosaic site (row, col).
/// X-Trans uses the 6x6 Fujifilm period.
int cfa_color(Cfa cfa, std::size_t row, std::size_t col);

/// Single-plane sensor mosaic.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Cfa cfa = Cfa::BayerRGGB;
  double black_level = 0.0;
  double white_level = 1.0;
  double exposure_ratio = 1.0;
  std::vector<std::uint16_t> plane;  // height x width, row-major

  std::uint16_t at(std::size_t row, std::size_t col) const { return plane[row * width + col]; }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Throws ConfigError unless the dimensions fit the CFA block and the levels are ordered.
void validate_for_packing(const RawImage& raw);

/// Packs the mosaic into [channels, H/b, W/b] with
/// value = clip(ratio * (v - black) / (white - black), 0, 1).
/// Channel c holds site (c / b, c % b) of every b x b block.
Tensor pack(const RawImage& raw);

/// Same layout change applied to an already-normalized H x W mosaic, no scaling or clipping.
Tensor pack_mosaic(const Tensor& mosaic, Cfa cfa);

/// Samples a [3, H, W] image through the CFA: [1, H, W] with out(y, x) = rgb(cfa_color(y, x), y, x).
Tensor mosaic(const Tensor& rgb, Cfa cfa);

/// Inverse rearrangement of pack: [channels, h, w] -> [1, h b, w b].
Tensor unpack(const Tensor& packed, Cfa cfa);

/// RAW container: "RRAW", u32 LE header length, UTF-8 JSON header, u16 LE plane.
void write_raw_container(const RawImage& raw, const std::filesystem::path& path);
RawImage read_raw_container(const std::filesystem::path& path);

/// In-memory forms of the container, used by the file functions.
std::vector<std::uint8_t> encode_raw_container(const RawImage& raw);
RawImage decode_raw_container(const std::vector<std::uint8_t>& bytes);

}  // namespace rrm
