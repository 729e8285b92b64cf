#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <utility>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little endian");

namespace loga {

namespace {

constexpr char kMagic[4] = {'L', 'O', 'G', 'A'};

enum RecordKind : uint8_t {
  kTensorF32 = 0,
  kTensorF64 = 1,
  kScalarU64 = 2,
  kBytes = 3,
};

struct Writer {
  std::ofstream out;

  explicit Writer(const std::string& path) : out(path, std::ios::binary | std::ios::trunc) {
    require(out.good(), ErrCode::io, "cannot write checkpoint ", path);
  }
  void raw(const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void name(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void tensor_f32(const std::string& n, const Tensor<float>& t) {
    name(n);
    u8(kTensorF32);
    u32(static_cast<uint32_t>(t.rank()));
    for (long e : t.shape()) u64(static_cast<uint64_t>(e));
    raw(t.data(), static_cast<size_t>(t.size()) * 4);
  }
  void scalar_u64(const std::string& n, uint64_t v) {
    name(n);
    u8(kScalarU64);
    u64(v);
  }
  void bytes(const std::string& n, const std::string& payload) {
    name(n);
    u8(kBytes);
    u64(payload.size());
    raw(payload.data(), payload.size());
  }
};

struct Reader {
  std::vector<unsigned char> buf;
  size_t pos = 0;
  std::string path;

  explicit Reader(const std::string& p) : path(p) {
    std::ifstream in(p, std::ios::binary);
    require(in.good(), ErrCode::io, "cannot open checkpoint ", p);
    buf.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  void raw(void* out, size_t n) {
    require(pos + n <= buf.size(), ErrCode::truncated, "checkpoint ", path, " is truncated");
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, 4);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string name() {
    uint32_t n = u32();
    require(n <= 4096, ErrCode::data, "checkpoint record name too long");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
};

struct LoadedRecords {
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  std::vector<std::pair<std::string, uint64_t>> scalars;
  std::vector<std::pair<std::string, std::string>> blobs;

  const Tensor<float>* tensor(const std::string& n) const {
    for (const auto& [k, v] : tensors)
      if (k == n) return &v;
    return nullptr;
  }
  bool scalar(const std::string& n, uint64_t* out) const {
    for (const auto& [k, v] : scalars)
      if (k == n) {
        *out = v;
        return true;
      }
    return false;
  }
  const std::string* blob(const std::string& n) const {
    for (const auto& [k, v] : blobs)
      if (k == n) return &v;
    return nullptr;
  }
};

LoadedRecords read_records(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrCode::data, "not a checkpoint file: ", path);
  uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrCode::version, "checkpoint version ", version,
          " not supported (expected ", kCheckpointVersion, ")");
  uint32_t count = r.u32();
  LoadedRecords rec;
  for (uint32_t i = 0; i < count; ++i) {
    std::string n = r.name();
    uint8_t kind = r.u8();
    switch (kind) {
      case kTensorF32:
      case kTensorF64: {
        uint32_t rank = r.u32();
        require(rank <= 8, ErrCode::data, "checkpoint tensor rank too large");
        std::vector<long> shape(rank);
        long total = 1;
        for (uint32_t k = 0; k < rank; ++k) {
          shape[k] = static_cast<long>(r.u64());
          total *= shape[k];
        }
        Tensor<float> t(shape);
        if (kind == kTensorF32) {
          r.raw(t.data(), static_cast<size_t>(total) * 4);
        } else {
          std::vector<double> tmp(static_cast<size_t>(total));
          r.raw(tmp.data(), static_cast<size_t>(total) * 8);
          for (long k = 0; k < total; ++k) t[k] = static_cast<float>(tmp[static_cast<size_t>(k)]);
        }
        rec.tensors.emplace_back(std::move(n), std::move(t));
        break;
      }
      case kScalarU64:
        rec.scalars.emplace_back(std::move(n), r.u64());
        break;
      case kBytes: {
        uint64_t len = r.u64();
        require(len <= (1ull << 30), ErrCode::data, "checkpoint blob too large");
        std::string payload(static_cast<size_t>(len), '\0');
        r.raw(payload.data(), payload.size());
        rec.blobs.emplace_back(std::move(n), std::move(payload));
        break;
      }
      default:
        raise(ErrCode::data, "unknown checkpoint record kind ", int(kind));
    }
  }
  return rec;
}

nlohmann::ordered_json model_config_json(const ModelConfig& mc) {
  nlohmann::ordered_json j;
  j["feature_dim"] = mc.feature_dim;
  j["clip_len"] = mc.clip_len;
  j["part_size"] = mc.part_size;
  j["height"] = mc.height;
  j["width"] = mc.width;
  j["channels"] = mc.channels;
  j["num_classes"] = mc.num_classes;
  j["strategy"] = strategy_name(mc.strategy);
  j["attention_scale"] = mc.attention_scale;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig mc;
  mc.feature_dim = j.at("feature_dim").get<int>();
  mc.clip_len = j.at("clip_len").get<int>();
  mc.part_size = j.at("part_size").get<int>();
  mc.height = j.at("height").get<int>();
  mc.width = j.at("width").get<int>();
  mc.channels = j.at("channels").get<int>();
  mc.num_classes = j.at("num_classes").get<int>();
  mc.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  mc.attention_scale = j.at("attention_scale").get<bool>();
  return mc;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedState& state) {
  require(state.model != nullptr, ErrCode::invalid_arg, "save_checkpoint: no model");
  const ParamStore<float>& store = state.model->store();

  Writer w(path);
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);

  uint32_t count = 1 /*config*/ + 1 /*epoch*/ +
                   static_cast<uint32_t>(store.params().size() + store.buffers().size());
  bool with_opt = state.optimizer != nullptr;
  if (with_opt) count += static_cast<uint32_t>(2 * store.params().size()) + 1;
  count += 2;  // rng state + inc
  w.u32(count);

  nlohmann::ordered_json meta;
  meta["train_config"] = nlohmann::ordered_json::parse(train_config_to_json(state.config));
  meta["model"] = model_config_json(state.model->config());
  w.bytes("meta/config", meta.dump(2));
  w.scalar_u64("meta/epoch", static_cast<uint64_t>(state.epoch));

  for (const auto& [name, p] : store.params()) w.tensor_f32("param/" + name, p->value);
  for (const auto& [name, b] : store.buffers()) w.tensor_f32("buffer/" + name, b);

  if (with_opt) {
    const auto& m = std::as_const(*state.optimizer).moments_m();
    const auto& v = std::as_const(*state.optimizer).moments_v();
    for (size_t i = 0; i < store.params().size(); ++i) {
      w.tensor_f32("opt/m/" + store.params()[i].first, m[i]);
      w.tensor_f32("opt/v/" + store.params()[i].first, v[i]);
    }
    w.scalar_u64("opt/step", static_cast<uint64_t>(state.optimizer->step_count()));
  }
  w.scalar_u64("rng/state", state.rng_state);
  w.scalar_u64("rng/inc", state.rng_inc);
  w.out.flush();
  require(w.out.good(), ErrCode::io, "short write on checkpoint ", path);
}

TrainedState load_checkpoint(const std::string& path) {
  LoadedRecords rec = read_records(path);

  const std::string* meta = rec.blob("meta/config");
  require(meta != nullptr, ErrCode::data, "checkpoint has no meta/config record");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(*meta);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrCode::data, "checkpoint meta/config is not valid JSON: ", e.what());
  }

  TrainedState state;
  state.config = train_config_from_json(j.at("train_config").dump());
  ModelConfig mc = model_config_from_json(j.at("model"));
  state.model = std::make_unique<LogaModel<float>>(mc, state.config.seed);
  state.optimizer = std::make_unique<AdamW<float>>(state.model->store(), 0.9, 0.999, 1e-8,
                                                   state.config.weight_decay);

  uint64_t v = 0;
  require(rec.scalar("meta/epoch", &v), ErrCode::data, "checkpoint has no epoch record");
  state.epoch = static_cast<int>(v);

  ParamStore<float>& store = state.model->store();
  for (auto& [name, p] : store.params()) {
    const Tensor<float>* t = rec.tensor("param/" + name);
    require(t != nullptr, ErrCode::data, "checkpoint is missing parameter ", name);
    require(t->same_shape(p->value), ErrCode::dim, "checkpoint parameter ", name, " has shape ",
            t->shape_str(), ", expected ", p->value.shape_str());
    p->value = *t;
  }
  for (auto& [name, b] : store.buffers()) {
    const Tensor<float>* t = rec.tensor("buffer/" + name);
    require(t != nullptr, ErrCode::data, "checkpoint is missing buffer ", name);
    require(t->same_shape(b), ErrCode::dim, "checkpoint buffer ", name, " has shape ",
            t->shape_str(), ", expected ", b.shape_str());
    b = *t;
  }
  if (rec.scalar("opt/step", &v)) {
    state.optimizer->restore_step_count(static_cast<long>(v));
    for (size_t i = 0; i < store.params().size(); ++i) {
      const std::string& name = store.params()[i].first;
      const Tensor<float>* m = rec.tensor("opt/m/" + name);
      const Tensor<float>* mv = rec.tensor("opt/v/" + name);
      require(m && mv, ErrCode::data, "checkpoint is missing optimizer state for ", name);
      state.optimizer->moments_m()[i] = *m;
      state.optimizer->moments_v()[i] = *mv;
    }
  }
  rec.scalar("rng/state", &state.rng_state);
  rec.scalar("rng/inc", &state.rng_inc);
  return state;
}

}  // namespace loga
