#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rrm/config.hpp"
#include "rrm/synthetic.hpp"

namespace rrm {

struct AblationVariant {
  std::string name;
  NetworkConfig network;
  LossConfig loss;
};

struct AblationRow {
  std::string variant;
  double psnr = 0.0;
  double ssim = 0.0;
  double wall_ms = 0.0;  // fastest of several single-image forward passes
  std::uint64_t seed = 0;
};

/// "scan_directions", "rdm_on_off", "fusion", "loss", "enhance_stage".
const std::vector<std::string>& ablation_axes();

/// Variants of one axis applied on top of the base configs. Loss variants are
/// named raw/srgb, with "-" for no raw supervision. Throws ConfigError for an
/// unknown axis.
std::vector<AblationVariant> ablation_variants(const std::string& axis, const NetworkConfig& network,
                                               const LossConfig& loss);

/// Trains every variant of the axis from the same seed and evaluates it on the
/// same data. Metric columns are deterministic per seed; wall_ms is measured.
std::vector<AblationRow> run_ablation(const std::string& axis, const RunConfig& base, const Dataset& data,
                                      std::uint64_t seed, std::size_t timing_repeats = 5,
                                      const std::function<void(const AblationRow&)>& on_row = {});

/// CSV with header "variant,psnr,ssim,wall_ms,seed".
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace rrm
