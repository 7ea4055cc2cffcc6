#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/network.hpp"
#include "rrm/raw_io.hpp"

namespace rrm {

enum class PixelLoss { L1, L2, None };

std::string pixel_loss_name(PixelLoss loss);
PixelLoss parse_pixel_loss(const std::string& name);

struct LossConfig {
  double alpha_raw = 1.0;
  double beta_srgb = 1.0;
  PixelLoss raw_loss = PixelLoss::L1;
  PixelLoss srgb_loss = PixelLoss::L1;

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct TrainConfig {
  double lr_init = 1e-4;
  double lr_final = 1e-5;
  std::string schedule = "cosine";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  std::size_t epochs = 1;
  /// Total optimizer steps; 0 means epochs x dataset size.
  std::size_t steps = 0;
  /// Steps over which the cosine decays; 0 means all steps. lr stays at
  /// lr_final afterwards.
  std::size_t cosine_steps = 0;
  std::uint64_t seed = 0;
  std::size_t batch = 1;
  /// Random horizontal / vertical flips of each training pair.
  bool augment = true;
  std::size_t log_every = 10;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct DataConfig {
  std::size_t count = 16;
  std::size_t size = 32;
  Cfa cfa = Cfa::BayerRGGB;
  /// Read-noise std in the exposure-amplified normalized domain.
  double read_noise = 0.02;
  /// Electrons at white level; sets the shot-noise variance ratio * v / full_well.
  double full_well = 4000.0;
  bool shot_noise = true;
  /// Each sample draws its exposure ratio from this list.
  std::vector<double> ratios = {100.0};
  double black_level = 64.0;
  double white_level = 16384.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

/// All sections of a run configuration.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  LossConfig loss;
  DataConfig data;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Fields missing from the JSON keep their defaults; unknown fields and
/// ill-typed values throw ConfigError. The result is validated.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace rrm
