#pragma once

#include <string>
#include <vector>

#include "data_types.hpp"
#include "rng.hpp"

namespace loga {

// In-memory dataset: manifest plus fully validated clips. Chunk checksums are
// verified at load time.
class Dataset {
 public:
  Dataset(DatasetManifest manifest, std::vector<Clip> clips);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<Clip>& clips() const { return clips_; }
  const Clip& clip(uint32_t id) const;  // ErrCode::lookup on unknown id

  std::vector<uint32_t> clip_ids(Split split) const;
  // tracklet ids of all tracklets whose clips carry `split`
  std::vector<uint32_t> tracklet_ids(Split split) const;
  std::vector<uint32_t> tracklet_clips(uint32_t tracklet_gid) const;
  // sorted distinct identities of the train split (classifier label order)
  std::vector<uint32_t> train_identities() const;

 private:
  DatasetManifest manifest_;
  std::vector<Clip> clips_;
};

// manifest <-> JSON text (generation configs accept missing fields and fall
// back to defaults; "clips"/"chunks" are only present in generated manifests)
std::string manifest_to_json(const DatasetManifest& m, const std::vector<ClipMeta>& metas,
                             const std::vector<std::pair<std::string, uint32_t>>& chunks);
DatasetManifest manifest_from_json(const std::string& text, std::vector<ClipMeta>* metas,
                                   std::vector<std::pair<std::string, uint32_t>>* chunks);
DatasetManifest manifest_from_file(const std::string& path);

// chunk container layout (documented in the README):
//   bytes  0..7   magic "LOGACHNK"
//   bytes  8..11  u32 version (little endian)
//   bytes 12..15  u32 clip count
//   payload       clip_count * clip_values float32 little endian
//   final 4 bytes u32 CRC-32 (IEEE) over header + payload
void write_dataset_files(const DatasetManifest& m, const std::vector<ClipMeta>& metas,
                         const std::vector<std::vector<float>>& payloads,
                         const std::string& out_dir);

Dataset load_dataset(const std::string& dir);

// P identities x K clips per batch, deterministic given the seed. Identities
// are drawn without replacement per batch; an identity's clips are drawn
// without replacement when it has at least K, with replacement otherwise.
class PkBatchSampler {
 public:
  PkBatchSampler(const Dataset& data, int p, int k, uint64_t seed);
  std::vector<uint32_t> next_batch();
  int num_identities() const { return static_cast<int>(by_identity_.size()); }

 private:
  std::vector<std::vector<uint32_t>> by_identity_;  // train clip ids per identity
  int p_;
  int k_;
  Rng rng_;
};

}  // namespace loga
