#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rrm/blocks.hpp"
#include "rrm/layers.hpp"
#include "rrm/raw_io.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

/// Where the reflectance features R_i are fused.
enum class EnhanceStage { Encoding, Decoding };

std::string fusion_name(FusionKind kind);
FusionKind parse_fusion(const std::string& name);
std::string enhance_stage_name(EnhanceStage stage);
EnhanceStage parse_enhance_stage(const std::string& name);

struct NetworkConfig {
  std::size_t base_width = 8;
  std::size_t depth = 3;
  std::size_t denoise_blocks = 1;
  std::size_t demosaic_blocks = 1;
  Cfa cfa = Cfa::BayerRGGB;
  std::size_t state_dim = 4;
  std::size_t scan_directions = 8;
  std::size_t ca_reduction = 4;
  bool use_rdm = true;
  bool enhance_branch = true;
  FusionKind fusion = FusionKind::Daf;
  EnhanceStage enhance_stage = EnhanceStage::Encoding;
  /// Adds a fixed block-average demosaic of O1 to the sRGB head output.
  bool srgb_skip = true;

  std::size_t in_channels() const { return cfa_channels(cfa); }
  std::size_t width(std::size_t level) const { return base_width << level; }
  /// Packed spatial extents must be divisible by this.
  std::size_t spatial_multiple() const { return std::size_t{1} << (depth - 1); }
  /// Upsampling factor from packed to full resolution.
  std::size_t shuffle_factor() const { return cfa_block(cfa) == 2 ? 2 : 3; }
  /// R_i fusion is active (requires the RDM).
  bool fuses_reflectance() const { return use_rdm && enhance_branch; }

  /// Throws ConfigError on an unusable combination.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct NetworkOutput {
  Tensor raw;   // O1 [C_in, h, w]
  Tensor srgb;  // O2 [3, H, W]
};

/// Two-stage denoise -> demosaic UNet with the reflectance enhance branch.
///
/// Denoise stage: SDB UNet over X_in producing O1 = head + X_in at packed
/// resolution. Demosaic stage: RAWMamba UNet over X_in, with stage-one encoder
/// features fused in at every encoder level, ending in a sub-pixel shuffle to
/// full resolution. With srgb_skip the shuffled head output is a residual
/// over a fixed block-average demosaic of O1: every pixel of a CFA block gets,
/// per color, the mean of that block's sites of that color.
class RetinexRawMamba {
 public:
  RetinexRawMamba(const NetworkConfig& config, std::uint64_t seed);

  /// packed: [C_in, h, w] with h, w divisible by spatial_multiple().
  NetworkOutput forward(const Tensor& packed) const;

  const NetworkConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  /// Every learnable tensor with a stable dotted name, in a fixed order.
  ParamList parameters() const;

 private:
  struct Level {
    Conv2d down;    // stride-2 3x3 from the previous level; unused at level 0
    Fusion reflect; // R_i fusion
    Fusion cross;   // stage-one feature fusion (demosaic stage only)
    std::vector<SimpleDenoisingBlock> sdb;
    std::vector<RawMambaBlock> mamba;
  };
  struct UpLevel {
    ConvTranspose2d up;
    Conv2d merge;  // 1x1 over concat(up, skip)
    std::vector<SimpleDenoisingBlock> sdb;
    std::vector<RawMambaBlock> mamba;
  };

  void check_input(const Tensor& packed) const;
  Tensor block_demosaic(const Tensor& raw) const;

  NetworkConfig config_;
  std::uint64_t seed_;

  RetinexDecomposition rdm_;
  std::vector<Conv2d> reflect_down_;  // R_i -> R_{i+1}

  Conv2d dn_stem_;
  std::vector<Level> dn_enc_;
  std::vector<UpLevel> dn_dec_;
  Conv2d dn_head_;

  Conv2d dm_stem_;
  std::vector<Level> dm_enc_;
  std::vector<UpLevel> dm_dec_;
  Conv2d dm_head_;
};

struct ParamReport {
  std::size_t total = 0;
  std::size_t conv = 0;  // weights and biases of convolutions
};

ParamReport count_params(const NetworkConfig& config);

/// Multiply-accumulates of one forward pass at the given packed size.
std::uint64_t count_flops(const NetworkConfig& config, std::size_t packed_height, std::size_t packed_width);

}  // namespace rrm
