#include "dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "datagen.hpp"

static_assert(std::endian::native == std::endian::little,
              "container formats are little endian");

namespace loga {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kChunkMagic[8] = {'L', 'O', 'G', 'A', 'C', 'H', 'N', 'K'};
constexpr uint64_t kTagSampler = 0x5a3b7e50;

void append_u32(std::vector<unsigned char>& buf, uint32_t v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  buf.insert(buf.end(), b, b + 4);
}

std::string chunk_file_name(uint32_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "chunk_%04u.bin", index);
  return name;
}

ordered_json noise_to_json(const NoiseSpec& n) {
  return ordered_json{{"p_occlude", n.p_occlude},     {"p_misalign", n.p_misalign},
                      {"p_idswitch", n.p_idswitch},   {"max_shift", n.max_shift},
                      {"occluder_min", n.occluder_min}, {"occluder_max", n.occluder_max}};
}

void noise_from_json(const nlohmann::json& j, NoiseSpec& n) {
  n.p_occlude = j.value("p_occlude", n.p_occlude);
  n.p_misalign = j.value("p_misalign", n.p_misalign);
  n.p_idswitch = j.value("p_idswitch", n.p_idswitch);
  n.max_shift = j.value("max_shift", n.max_shift);
  n.occluder_min = j.value("occluder_min", n.occluder_min);
  n.occluder_max = j.value("occluder_max", n.occluder_max);
}

}  // namespace

Dataset::Dataset(DatasetManifest manifest, std::vector<Clip> clips)
    : manifest_(std::move(manifest)), clips_(std::move(clips)) {}

const Clip& Dataset::clip(uint32_t id) const {
  require(id < clips_.size() && clips_[id].id == id, ErrCode::lookup, "unknown clip id ", id);
  return clips_[id];
}

std::vector<uint32_t> Dataset::clip_ids(Split split) const {
  std::vector<uint32_t> out;
  for (const Clip& c : clips_)
    if (c.split == split) out.push_back(c.id);
  return out;
}

std::vector<uint32_t> Dataset::tracklet_ids(Split split) const {
  std::vector<uint32_t> out;
  for (const Clip& c : clips_)
    if (c.split == split && c.index_in_tracklet == 0) out.push_back(c.tracklet);
  return out;
}

std::vector<uint32_t> Dataset::tracklet_clips(uint32_t tracklet_gid) const {
  std::vector<uint32_t> out;
  for (const Clip& c : clips_)
    if (c.tracklet == tracklet_gid) out.push_back(c.id);
  require(!out.empty(), ErrCode::lookup, "unknown tracklet id ", tracklet_gid);
  return out;
}

std::vector<uint32_t> Dataset::train_identities() const {
  std::vector<uint32_t> ids;
  for (const Clip& c : clips_)
    if (c.split == Split::train) ids.push_back(c.identity);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::string manifest_to_json(const DatasetManifest& m, const std::vector<ClipMeta>& metas,
                             const std::vector<std::pair<std::string, uint32_t>>& chunks) {
  ordered_json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["num_identities"] = m.num_identities;
  j["tracklets_per_identity"] = m.tracklets_per_identity;
  j["frames_per_tracklet"] = m.frames_per_tracklet;
  j["clip_len"] = m.clip_len;
  j["height"] = m.height;
  j["width"] = m.width;
  j["channels"] = m.channels;
  j["num_cameras"] = m.num_cameras;
  j["train_identities"] = m.train_identities;
  j["chunk_capacity"] = m.chunk_capacity;
  j["noise"] = noise_to_json(m.noise);
  if (!chunks.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& [file, count] : chunks) arr.push_back({{"file", file}, {"clips", count}});
    j["chunks"] = arr;
  }
  if (!metas.empty()) {
    ordered_json arr = ordered_json::array();
    for (const ClipMeta& c : metas) {
      ordered_json e;
      e["id"] = c.id;
      e["identity"] = c.identity;
      e["camera"] = c.camera;
      e["tracklet"] = c.tracklet;
      e["index"] = c.index_in_tracklet;
      e["split"] = split_name(c.split);
      e["flags"] = c.flags;
      e["chunk"] = c.chunk;
      e["slot"] = c.slot;
      arr.push_back(std::move(e));
    }
    j["clips"] = arr;
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, std::vector<ClipMeta>* metas,
                                   std::vector<std::pair<std::string, uint32_t>>* chunks) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrCode::validation, "manifest is not valid JSON: ", e.what());
  }
  DatasetManifest m;
  m.version = j.value("version", m.version);
  require(m.version == 1, ErrCode::version, "unsupported manifest version ", m.version);
  m.seed = j.value("seed", m.seed);
  m.num_identities = j.value("num_identities", m.num_identities);
  m.tracklets_per_identity = j.value("tracklets_per_identity", m.tracklets_per_identity);
  m.frames_per_tracklet = j.value("frames_per_tracklet", m.frames_per_tracklet);
  m.clip_len = j.value("clip_len", m.clip_len);
  m.height = j.value("height", m.height);
  m.width = j.value("width", m.width);
  m.channels = j.value("channels", m.channels);
  m.num_cameras = j.value("num_cameras", m.num_cameras);
  m.train_identities = j.value("train_identities", m.train_identities);
  m.chunk_capacity = j.value("chunk_capacity", m.chunk_capacity);
  if (j.contains("noise")) noise_from_json(j["noise"], m.noise);

  if (chunks && j.contains("chunks"))
    for (const auto& e : j["chunks"])
      chunks->emplace_back(e.at("file").get<std::string>(), e.at("clips").get<uint32_t>());

  if (metas && j.contains("clips")) {
    for (const auto& e : j["clips"]) {
      ClipMeta c;
      c.id = e.at("id").get<uint32_t>();
      c.identity = e.at("identity").get<uint32_t>();
      c.camera = e.at("camera").get<uint32_t>();
      c.tracklet = e.at("tracklet").get<uint32_t>();
      c.index_in_tracklet = e.at("index").get<uint32_t>();
      c.split = split_from_name(e.at("split").get<std::string>());
      c.flags = e.at("flags").get<std::vector<uint8_t>>();
      c.chunk = e.at("chunk").get<uint32_t>();
      c.slot = e.at("slot").get<uint32_t>();
      metas->push_back(std::move(c));
    }
  }
  return m;
}

DatasetManifest manifest_from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrCode::io, "cannot open manifest ", path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json(text, nullptr, nullptr);
}

void write_dataset_files(const DatasetManifest& m, const std::vector<ClipMeta>& metas,
                         const std::vector<std::vector<float>>& payloads,
                         const std::string& out_dir) {
  require(metas.size() == payloads.size(), ErrCode::internal, "meta/payload count mismatch");
  fs::create_directories(out_dir);

  std::vector<ClipMeta> placed = metas;
  std::vector<std::pair<std::string, uint32_t>> chunks;
  size_t next = 0;
  uint32_t chunk_index = 0;
  while (next < placed.size()) {
    uint32_t count = static_cast<uint32_t>(
        std::min<size_t>(static_cast<size_t>(m.chunk_capacity), placed.size() - next));
    std::vector<unsigned char> buf;
    buf.reserve(16 + static_cast<size_t>(count) * static_cast<size_t>(m.clip_values()) * 4 + 4);
    buf.insert(buf.end(), kChunkMagic, kChunkMagic + 8);
    append_u32(buf, m.version);
    append_u32(buf, count);
    for (uint32_t s = 0; s < count; ++s) {
      placed[next + s].chunk = chunk_index;
      placed[next + s].slot = s;
      const std::vector<float>& px = payloads[next + s];
      require(px.size() == static_cast<size_t>(m.clip_values()), ErrCode::internal,
              "clip payload size mismatch");
      size_t off = buf.size();
      buf.resize(off + px.size() * 4);
      std::memcpy(buf.data() + off, px.data(), px.size() * 4);
    }
    uint32_t crc = static_cast<uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    append_u32(buf, crc);

    std::string fname = chunk_file_name(chunk_index);
    std::ofstream out(fs::path(out_dir) / fname, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrCode::io, "cannot write ", fname);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(out.good(), ErrCode::io, "short write on ", fname);
    chunks.emplace_back(fname, count);
    next += count;
    ++chunk_index;
  }

  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  require(mf.good(), ErrCode::io, "cannot write manifest.json");
  mf << manifest_to_json(m, placed, chunks);
  require(mf.good(), ErrCode::io, "short write on manifest.json");
}

Dataset load_dataset(const std::string& dir) {
  fs::path root(dir);
  std::ifstream mf(root / "manifest.json");
  require(mf.good(), ErrCode::io, "cannot open ", (root / "manifest.json").string());
  std::string text((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());

  std::vector<ClipMeta> metas;
  std::vector<std::pair<std::string, uint32_t>> chunks;
  DatasetManifest m = manifest_from_json(text, &metas, &chunks);
  require(!metas.empty(), ErrCode::validation, "manifest lists no clips");
  validate_manifest(m);

  const long clip_values = m.clip_values();
  std::vector<std::vector<float>> chunk_data(chunks.size());
  for (size_t ci = 0; ci < chunks.size(); ++ci) {
    const auto& [fname, count] = chunks[ci];
    std::ifstream in(root / fname, std::ios::binary);
    require(in.good(), ErrCode::io, "cannot open chunk ", fname);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    size_t expected = 16 + static_cast<size_t>(count) * static_cast<size_t>(clip_values) * 4 + 4;
    require(buf.size() >= 16, ErrCode::truncated, "chunk ", fname, " is truncated");
    require(std::memcmp(buf.data(), kChunkMagic, 8) == 0, ErrCode::data, "chunk ", fname,
            " has a bad magic header");
    uint32_t version, clip_count;
    std::memcpy(&version, buf.data() + 8, 4);
    std::memcpy(&clip_count, buf.data() + 12, 4);
    require(version == m.version, ErrCode::version, "chunk ", fname, " has version ", version,
            ", expected ", m.version);
    require(clip_count == count, ErrCode::data, "chunk ", fname, " declares ", clip_count,
            " clips, manifest says ", count);
    require(buf.size() == expected, ErrCode::truncated, "chunk ", fname, " is truncated (",
            buf.size(), " bytes, expected ", expected, ")");
    uint32_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
    uint32_t actual = static_cast<uint32_t>(
        crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    require(stored == actual, ErrCode::checksum, "chunk ", fname, " failed its checksum");
    chunk_data[ci].resize(static_cast<size_t>(count) * static_cast<size_t>(clip_values));
    std::memcpy(chunk_data[ci].data(), buf.data() + 16, chunk_data[ci].size() * 4);
  }

  std::vector<Clip> clips(metas.size());
  for (const ClipMeta& meta : metas) {
    require(meta.id < clips.size(), ErrCode::validation, "clip id ", meta.id, " out of range");
    require(meta.chunk < chunk_data.size(), ErrCode::validation, "clip ", meta.id,
            " references missing chunk ", meta.chunk);
    require(static_cast<size_t>(meta.slot) < chunks[meta.chunk].second, ErrCode::validation,
            "clip ", meta.id, " references missing slot");
    require(meta.flags.size() == static_cast<size_t>(m.clip_len), ErrCode::validation, "clip ",
            meta.id, " has ", meta.flags.size(), " flags, expected ", m.clip_len);
    Clip c;
    c.id = meta.id;
    c.identity = meta.identity;
    c.camera = meta.camera;
    c.tracklet = meta.tracklet;
    c.index_in_tracklet = meta.index_in_tracklet;
    c.split = meta.split;
    c.flags.reserve(meta.flags.size());
    for (uint8_t f : meta.flags) {
      require(f <= 3, ErrCode::validation, "clip ", meta.id, " has unknown flag value ", int(f));
      c.flags.push_back(static_cast<FrameFlag>(f));
    }
    const float* src =
        chunk_data[meta.chunk].data() + static_cast<size_t>(meta.slot) * clip_values;
    c.pixels.assign(src, src + clip_values);
    clips[meta.id] = std::move(c);
  }
  return Dataset(m, std::move(clips));
}

PkBatchSampler::PkBatchSampler(const Dataset& data, int p, int k, uint64_t seed)
    : p_(p), k_(k), rng_(mix_seed(seed, kTagSampler)) {
  require(p >= 1 && k >= 1, ErrCode::config, "P and K must be positive");
  std::map<uint32_t, std::vector<uint32_t>> groups;
  for (const Clip& c : data.clips())
    if (c.split == Split::train) groups[c.identity].push_back(c.id);
  for (auto& [id, ids] : groups) by_identity_.push_back(std::move(ids));
  require(static_cast<int>(by_identity_.size()) >= p, ErrCode::config,
          "PK sampling needs at least P=", p, " train identities, dataset has ",
          by_identity_.size());
}

std::vector<uint32_t> PkBatchSampler::next_batch() {
  // partial Fisher-Yates over identity indices
  std::vector<uint32_t> order(by_identity_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
  std::vector<uint32_t> batch;
  batch.reserve(static_cast<size_t>(p_) * static_cast<size_t>(k_));
  for (int i = 0; i < p_; ++i) {
    uint32_t j = static_cast<uint32_t>(i) + rng_.below(static_cast<uint32_t>(order.size() - i));
    std::swap(order[i], order[j]);
    const std::vector<uint32_t>& clips = by_identity_[order[i]];
    if (static_cast<int>(clips.size()) >= k_) {
      std::vector<uint32_t> pick(clips);
      for (int t = 0; t < k_; ++t) {
        uint32_t r = static_cast<uint32_t>(t) + rng_.below(static_cast<uint32_t>(pick.size() - t));
        std::swap(pick[t], pick[r]);
        batch.push_back(pick[t]);
      }
    } else {
      for (int t = 0; t < k_; ++t)
        batch.push_back(clips[rng_.below(static_cast<uint32_t>(clips.size()))]);
    }
  }
  return batch;
}

}  // namespace loga
