#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace loga {

enum class FrameFlag : uint8_t { clean = 0, occluded = 1, misaligned = 2, id_switch = 3 };

inline const char* flag_name(FrameFlag f) {
  switch (f) {
    case FrameFlag::clean: return "clean";
    case FrameFlag::occluded: return "occluded";
    case FrameFlag::misaligned: return "misaligned";
    case FrameFlag::id_switch: return "id_switch";
  }
  return "?";
}

enum class Split : uint8_t { train = 0, query = 1, gallery = 2 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "query") return Split::query;
  if (s == "gallery") return Split::gallery;
  raise(ErrCode::validation, "unknown split '", s, "'");
}

// A fixed-length window of a tracklet. Pixels are stored frame-major as
// [L][Cc][H][W], values in [0,1]. frame_flags never feed the forward pass;
// they exist so evaluation can attribute scores to known corruptions.
struct Clip {
  uint32_t id = 0;
  uint32_t identity = 0;
  uint32_t camera = 0;
  uint32_t tracklet = 0;           // global tracklet index
  uint32_t index_in_tracklet = 0;  // clip position within its tracklet
  Split split = Split::train;
  std::vector<FrameFlag> flags;    // length L
  std::vector<float> pixels;       // L * Cc * H * W
};

struct NoiseSpec {
  double p_occlude = 0.1;
  double p_misalign = 0.1;
  double p_idswitch = 0.1;
  int max_shift = 5;        // misalignment shift bound, pixels
  int occluder_min = 6;     // occluding rectangle side range, pixels
  int occluder_max = 12;
};

struct DatasetManifest {
  uint32_t version = 1;
  uint64_t seed = 0;
  int num_identities = 32;
  int tracklets_per_identity = 8;
  int frames_per_tracklet = 40;
  int clip_len = 10;  // L
  int height = 32;
  int width = 16;
  int channels = 1;
  int num_cameras = 2;
  int train_identities = 16;  // identities [0, train_identities) form the train split
  int chunk_capacity = 64;    // clips per chunk file
  NoiseSpec noise;

  long frame_pixels() const { return static_cast<long>(channels) * height * width; }
  long clip_values() const { return static_cast<long>(clip_len) * frame_pixels(); }
};

// Per-clip bookkeeping stored in the manifest file next to the chunk data.
struct ClipMeta {
  uint32_t id = 0;
  uint32_t identity = 0;
  uint32_t camera = 0;
  uint32_t tracklet = 0;
  uint32_t index_in_tracklet = 0;
  Split split = Split::train;
  std::vector<uint8_t> flags;
  uint32_t chunk = 0;
  uint32_t slot = 0;
};

}  // namespace loga
