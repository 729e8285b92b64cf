#include "datagen.hpp"

#include <algorithm>
#include <cmath>

#include "dataset.hpp"
#include "rng.hpp"

namespace loga {

namespace {

// rng stream tags
constexpr uint64_t kTagIdentity = 0x1d7e11f1;
constexpr uint64_t kTagNoise = 0x0cc1de17;

constexpr int kBodyBands = 4;

struct BandSpec {
  double base;
  int pattern;  // 0 solid, 1 vertical stripes, 2 horizontal stripes, 3 checker
  int period;
  int drift;       // pattern phase advance per frame
  double amplitude;
  double chan_offset[3];
};

struct TemplateSpec {
  BandSpec bands[kBodyBands];
};

// Identity appearance code. A low-discrepancy global tone spreads the
// identities across the intensity range; bands add id-specific offsets and
// texture (type, period, amplitude). Both the tone and the texture energy
// survive aggressive spatial pooling, so a downstream encoder can separate
// identities while occlusion/substitution noise displaces them strongly.
TemplateSpec identity_template(const DatasetManifest& m, uint32_t identity) {
  Rng rng(mix_seed(m.seed, kTagIdentity, identity));
  double tone = 0.3 + 0.4 * std::fmod(identity * 0.6180339887498949 + rng.uniform() * 0.02, 1.0);
  TemplateSpec t{};
  for (int b = 0; b < kBodyBands; ++b) {
    BandSpec& band = t.bands[b];
    band.base = std::clamp(tone + rng.uniform(-0.15, 0.15), 0.15, 0.85);
    band.pattern = rng.range(0, 3);
    band.period = rng.range(2, 4);
    band.drift = rng.range(1, 2);
    band.amplitude = 0.08 + 0.08 * rng.range(0, 2);
    for (int c = 0; c < 3; ++c) band.chan_offset[c] = rng.uniform(-0.08, 0.08);
  }
  return t;
}

double pattern_value(const BandSpec& band, int y, int x, int phase) {
  constexpr double amp = 0.14;
  int p = band.period;
  switch (band.pattern) {
    case 1: return (((x + phase) / p) % 2) ? amp : -amp;
    case 2: return (((y + phase) / p) % 2) ? amp : -amp;
    case 3: return ((((x + phase) / p) + (y / p)) % 2) ? amp : -amp;
    default: return 0.0;
  }
}

// fixed per-camera brightness/contrast so the cross-camera gap is systematic
void apply_photometric(const DatasetManifest& m, uint32_t camera, std::vector<float>& px) {
  double t = m.num_cameras > 1 ? static_cast<double>(camera) / (m.num_cameras - 1) : 0.5;
  double contrast = 0.90 + 0.20 * t;
  double bright = -0.05 + 0.10 * t;
  for (float& v : px) {
    double y = contrast * (v - 0.5) + 0.5 + bright;
    v = static_cast<float>(std::clamp(y, 0.0, 1.0));
  }
}

void occlude(std::vector<float>& px, const DatasetManifest& m, Rng& rng) {
  int oh = std::min(m.height, rng.range(m.noise.occluder_min, m.noise.occluder_max));
  int ow = std::min(m.width, rng.range(m.noise.occluder_min, m.noise.occluder_max));
  int y0 = rng.range(0, m.height - oh);
  int x0 = rng.range(0, m.width - ow);
  float fill = (rng.next_u32() & 1u) ? 1.0f : 0.0f;
  for (int c = 0; c < m.channels; ++c)
    for (int y = y0; y < y0 + oh; ++y)
      for (int x = x0; x < x0 + ow; ++x)
        px[static_cast<size_t>((c * m.height + y) * m.width + x)] = fill;
}

void misalign(std::vector<float>& px, const DatasetManifest& m, Rng& rng) {
  int dx = 0, dy = 0;
  do {
    dx = rng.range(-m.noise.max_shift, m.noise.max_shift);
    dy = rng.range(-m.noise.max_shift, m.noise.max_shift);
  } while (dx == 0 && dy == 0);
  std::vector<float> shifted(px.size(), 0.0f);
  for (int c = 0; c < m.channels; ++c)
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x) {
        int sy = y - dy, sx = x - dx;
        if (sy < 0 || sy >= m.height || sx < 0 || sx >= m.width) continue;
        shifted[static_cast<size_t>((c * m.height + y) * m.width + x)] =
            px[static_cast<size_t>((c * m.height + sy) * m.width + sx)];
      }
  px = std::move(shifted);
}

}  // namespace

std::vector<float> render_clean_frame(const DatasetManifest& m, uint32_t identity,
                                      uint32_t camera, uint32_t tracklet_local,
                                      uint32_t frame_index) {
  TemplateSpec tmpl = identity_template(m, identity);
  std::vector<float> px(static_cast<size_t>(m.frame_pixels()));
  int band_h = std::max(1, m.height / kBodyBands);
  for (int c = 0; c < m.channels; ++c)
    for (int y = 0; y < m.height; ++y) {
      int b = std::min(kBodyBands - 1, y / band_h);
      const BandSpec& band = tmpl.bands[b];
      int phase = static_cast<int>(tracklet_local) * 3 +
                  static_cast<int>(frame_index) * band.drift;
      double chan = m.channels == 3 ? band.chan_offset[c] : 0.0;
      for (int x = 0; x < m.width; ++x) {
        double v = band.base + chan + pattern_value(band, y, x, phase);
        px[static_cast<size_t>((c * m.height + y) * m.width + x)] =
            static_cast<float>(std::clamp(v, 0.12, 0.88));
      }
    }
  apply_photometric(m, camera, px);
  return px;
}

std::vector<float> render_frame(const DatasetManifest& m, uint32_t identity, uint32_t camera,
                                uint32_t tracklet_local, uint32_t tracklet_global,
                                uint32_t frame_index, FrameFlag* flag) {
  std::vector<float> px = render_clean_frame(m, identity, camera, tracklet_local, frame_index);
  Rng rng(mix_seed(m.seed, kTagNoise,
                   static_cast<uint64_t>(tracklet_global) * 1024ull + frame_index));
  double u = rng.uniform();
  FrameFlag f = FrameFlag::clean;
  const NoiseSpec& ns = m.noise;
  if (u < ns.p_occlude) {
    occlude(px, m, rng);
    f = FrameFlag::occluded;
  } else if (u < ns.p_occlude + ns.p_misalign) {
    misalign(px, m, rng);
    f = FrameFlag::misaligned;
  } else if (u < ns.p_occlude + ns.p_misalign + ns.p_idswitch) {
    uint32_t other = identity;
    do {
      other = rng.below(static_cast<uint32_t>(m.num_identities));
    } while (other == identity);
    px = render_clean_frame(m, other, camera, tracklet_local, frame_index);
    f = FrameFlag::id_switch;
  }
  if (flag) *flag = f;
  return px;
}

std::vector<std::vector<uint32_t>> split_into_clip_windows(uint32_t num_frames,
                                                           uint32_t clip_len) {
  require(num_frames >= 1, ErrCode::data, "tracklet must contain at least one frame");
  require(clip_len >= 1, ErrCode::config, "clip length must be positive");
  uint32_t num_clips = (num_frames + clip_len - 1) / clip_len;
  std::vector<std::vector<uint32_t>> windows(num_clips);
  for (uint32_t c = 0; c < num_clips; ++c) {
    windows[c].resize(clip_len);
    for (uint32_t k = 0; k < clip_len; ++k)
      windows[c][k] = std::min(c * clip_len + k, num_frames - 1);
  }
  return windows;
}

ValidationReport validate_manifest(const DatasetManifest& m) {
  require(m.version == 1, ErrCode::version, "unsupported manifest version ", m.version);
  require(m.num_identities >= 1, ErrCode::validation, "num_identities must be >= 1");
  require(m.tracklets_per_identity >= 1, ErrCode::validation,
          "tracklets_per_identity must be >= 1");
  require(m.frames_per_tracklet >= 1, ErrCode::validation, "frames_per_tracklet must be >= 1");
  require(m.clip_len >= 1, ErrCode::validation, "clip_len must be >= 1");
  require(m.height >= 1 && m.width >= 1, ErrCode::validation, "frame size must be positive");
  require(m.channels == 1 || m.channels == 3, ErrCode::validation, "channels must be 1 or 3");
  require(m.num_cameras >= 1, ErrCode::validation, "num_cameras must be >= 1");
  require(m.chunk_capacity >= 1, ErrCode::validation, "chunk_capacity must be >= 1");
  require(m.train_identities >= 0 && m.train_identities <= m.num_identities, ErrCode::validation,
          "train_identities must be within [0, num_identities]");
  const NoiseSpec& ns = m.noise;
  for (double p : {ns.p_occlude, ns.p_misalign, ns.p_idswitch})
    require(p >= 0.0 && p <= 1.0, ErrCode::validation, "corruption probability out of [0,1]");
  require(ns.p_occlude + ns.p_misalign + ns.p_idswitch <= 1.0 + 1e-12, ErrCode::validation,
          "per-frame corruption probabilities must sum to at most 1");
  require(ns.max_shift >= 1, ErrCode::validation, "max_shift must be >= 1");
  require(ns.occluder_min >= 1 && ns.occluder_max >= ns.occluder_min, ErrCode::validation,
          "occluder size range invalid");
  if (ns.p_idswitch > 0.0)
    require(m.num_identities >= 2, ErrCode::validation,
            "id_switch noise requires at least two identities");

  ValidationReport rep;
  int test_ids = m.num_identities - m.train_identities;
  if (test_ids > 0) {
    require(m.num_cameras >= 2, ErrCode::validation,
            "retrieval protocol requires at least two cameras");
    // per test identity: camera-0 tracklets exist (queries) and a tracklet on
    // another camera exists (cross-camera gallery)
    require(m.tracklets_per_identity >= 2, ErrCode::validation,
            "test identities need at least two tracklets (query + cross-camera gallery)");
    int cam0 = 0, other = 0;
    for (int t = 0; t < m.tracklets_per_identity; ++t)
      (t % m.num_cameras == 0 ? cam0 : other) += 1;
    require(cam0 >= 1 && other >= 1, ErrCode::validation,
            "test identities must appear in query and gallery under different cameras");
    int queries_per_id = (cam0 + 1) / 2;
    rep.queries = test_ids * queries_per_id;
    rep.gallery = test_ids * (m.tracklets_per_identity - queries_per_id);
  }
  return rep;
}

void generate_dataset(const DatasetManifest& m, const std::string& out_dir) {
  validate_manifest(m);

  std::vector<ClipMeta> metas;
  std::vector<std::vector<float>> payloads;

  auto windows = split_into_clip_windows(static_cast<uint32_t>(m.frames_per_tracklet),
                                         static_cast<uint32_t>(m.clip_len));

  for (int id = 0; id < m.num_identities; ++id) {
    // queries: first half of this identity's camera-0 tracklets (test ids only)
    int cam0_seen = 0;
    int cam0_total = 0;
    for (int t = 0; t < m.tracklets_per_identity; ++t)
      if (t % m.num_cameras == 0) ++cam0_total;
    int queries_per_id = (cam0_total + 1) / 2;

    for (int t = 0; t < m.tracklets_per_identity; ++t) {
      uint32_t camera = static_cast<uint32_t>(t % m.num_cameras);
      uint32_t gid = static_cast<uint32_t>(id * m.tracklets_per_identity + t);
      Split split;
      if (id < m.train_identities) {
        split = Split::train;
      } else if (camera == 0 && cam0_seen++ < queries_per_id) {
        split = Split::query;
      } else {
        split = Split::gallery;
      }

      std::vector<std::vector<float>> frames(static_cast<size_t>(m.frames_per_tracklet));
      std::vector<FrameFlag> flags(static_cast<size_t>(m.frames_per_tracklet));
      for (int f = 0; f < m.frames_per_tracklet; ++f)
        frames[static_cast<size_t>(f)] =
            render_frame(m, static_cast<uint32_t>(id), camera, static_cast<uint32_t>(t), gid,
                         static_cast<uint32_t>(f), &flags[static_cast<size_t>(f)]);

      for (size_t c = 0; c < windows.size(); ++c) {
        ClipMeta meta;
        meta.id = static_cast<uint32_t>(metas.size());
        meta.identity = static_cast<uint32_t>(id);
        meta.camera = camera;
        meta.tracklet = gid;
        meta.index_in_tracklet = static_cast<uint32_t>(c);
        meta.split = split;
        std::vector<float> payload;
        payload.reserve(static_cast<size_t>(m.clip_values()));
        for (uint32_t src : windows[c]) {
          meta.flags.push_back(static_cast<uint8_t>(flags[src]));
          const std::vector<float>& fpx = frames[src];
          payload.insert(payload.end(), fpx.begin(), fpx.end());
        }
        metas.push_back(std::move(meta));
        payloads.push_back(std::move(payload));
      }
    }
  }

  write_dataset_files(m, metas, payloads, out_dir);
}

}  // namespace loga
