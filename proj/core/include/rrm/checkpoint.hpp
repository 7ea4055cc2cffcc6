#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/network.hpp"

namespace rrm {

/// Checkpoint file layout:
///   "RCKP" | u32 LE header length | JSON header | float32 LE blob
/// The header holds {config, seed, step, extra, tensors: [{name, shape,
/// offset, length}]}; offset and length count elements of the blob.
std::vector<std::uint8_t> encode_checkpoint(const RetinexRawMamba& net, std::size_t step,
                                            const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  std::unique_ptr<RetinexRawMamba> net;
  std::size_t step = 0;
  nlohmann::json extra;
};

/// Rebuilds the network from the stored config and seed, then overwrites every
/// parameter. Throws FormatError on a malformed file or a tensor set that does
/// not match the config.
LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const RetinexRawMamba& net, std::size_t step,
                     const nlohmann::json& extra = nlohmann::json::object());
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Header only, without rebuilding the network.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace rrm
