#pragma once

#include <string>
#include <vector>

#include "data_types.hpp"

namespace loga {

// Deterministic clean render of one frame: the identity's procedural template
// animated by the frame index and passed through the camera's fixed
// photometric transform. Returns channels*height*width values in [0,1].
std::vector<float> render_clean_frame(const DatasetManifest& m, uint32_t identity,
                                      uint32_t camera, uint32_t tracklet_local,
                                      uint32_t frame_index);

// One frame of a tracklet after the noise model has been applied. `flag`
// receives the corruption that was drawn for this frame.
std::vector<float> render_frame(const DatasetManifest& m, uint32_t identity, uint32_t camera,
                                uint32_t tracklet_local, uint32_t tracklet_global,
                                uint32_t frame_index, FrameFlag* flag);

// Non-overlapping windows of length L over a frame sequence; a final partial
// window repeats the last frame (the padding frames carry that frame's flag).
// Each element of the result lists the source frame index per slot.
std::vector<std::vector<uint32_t>> split_into_clip_windows(uint32_t num_frames, uint32_t clip_len);

struct ValidationReport {
  int queries = 0;
  int gallery = 0;
};

// Checks structural consistency of a manifest (probabilities, camera counts,
// protocol feasibility). Throws ErrCode::validation on failure.
ValidationReport validate_manifest(const DatasetManifest& m);

// Deterministically renders the full benchmark into `out_dir`:
// manifest.json plus chunk_*.bin files. Byte-identical for identical
// manifests.
void generate_dataset(const DatasetManifest& m, const std::string& out_dir);

}  // namespace loga
