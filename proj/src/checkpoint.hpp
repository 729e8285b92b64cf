#pragma once

#include <string>

#include "train.hpp"

namespace loga {

// Checkpoint container: magic "LOGA", u32 version, u32 record count, then
// length-prefixed named records. Tensor records carry a dtype tag, rank,
// extents and a little-endian payload; scalar and byte records hold the
// optimizer step, rng state and the serialized config. Layout details in the
// README.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const TrainedState& state);
TrainedState load_checkpoint(const std::string& path);

}  // namespace loga
