#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "kae/model.hpp"
#include "kae/training.hpp"

namespace kae {

// Binary checkpoint layout (little-endian):
//   8 bytes  magic "KAECKPT\0"
//   u32      format version (1)
//   u64      header length H
//   H bytes  UTF-8 JSON header: model config, optimizer hyper-parameters,
//            epochs completed, loss history, and a tensor directory
//            [{"name": ..., "shape": [...]}, ...]
//   doubles  tensor payloads in directory order
//
// Tensor names are "param/<key>", "adam.m/<key>" and "adam.v/<key>" with keys
// from ModelParams::named(). The target epoch count is not stored, so a run
// resumed to N epochs writes the same bytes as one trained to N directly.

nlohmann::json config_to_json(const KaeConfig& config);
KaeConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const TrainConfig& train_config);

struct LoadedCheckpoint {
  TrainState state;
  TrainConfig train_config;  // epochs set to epochs_completed
};

// Validates the magic, version, and every tensor shape against the stored
// config. Throws IoError or ParseError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kae
