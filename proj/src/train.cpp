#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "checkpoint.hpp"
#include "evaluate.hpp"

namespace loga {

namespace {
constexpr uint64_t kTagTriplet = 0x7121b1e7;
constexpr uint64_t kTagTrain = 0x7121b000;
}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["lr_decay_factor"] = cfg.lr_decay_factor;
  j["lr_decay_every"] = cfg.lr_decay_every;
  j["epochs"] = cfg.epochs;
  j["margin"] = cfg.margin;
  j["batch_p"] = cfg.batch_p;
  j["batch_k"] = cfg.batch_k;
  j["clip_len"] = cfg.clip_len;
  j["part_size"] = cfg.part_size;
  j["feature_dim"] = cfg.feature_dim;
  j["strategy"] = strategy_name(cfg.strategy);
  j["mining"] = cfg.mining == TripletMining::random ? "random" : "batch_hard";
  j["attention_scale"] = cfg.attention_scale;
  j["seed"] = cfg.seed;
  j["checkpoint_every"] = cfg.checkpoint_every;
  return j.dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrCode::config, "train config is not valid JSON: ", e.what());
  }
  TrainConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.lr_decay_factor = j.value("lr_decay_factor", cfg.lr_decay_factor);
  cfg.lr_decay_every = j.value("lr_decay_every", cfg.lr_decay_every);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.margin = j.value("margin", cfg.margin);
  cfg.batch_p = j.value("batch_p", cfg.batch_p);
  cfg.batch_k = j.value("batch_k", cfg.batch_k);
  cfg.clip_len = j.value("clip_len", cfg.clip_len);
  cfg.part_size = j.value("part_size", cfg.part_size);
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  if (j.contains("strategy")) cfg.strategy = strategy_from_name(j["strategy"].get<std::string>());
  if (j.contains("mining")) {
    std::string m = j["mining"].get<std::string>();
    if (m == "random") cfg.mining = TripletMining::random;
    else if (m == "batch_hard") cfg.mining = TripletMining::batch_hard;
    else raise(ErrCode::config, "unknown mining mode '", m, "'");
  }
  cfg.attention_scale = j.value("attention_scale", cfg.attention_scale);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  validate_train_config(cfg);
  return cfg;
}

TrainConfig train_config_from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrCode::io, "cannot open train config ", path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return train_config_from_json(text);
}

void validate_train_config(const TrainConfig& cfg) {
  require(cfg.learning_rate >= 0, ErrCode::config, "learning_rate must be non-negative");
  require(cfg.weight_decay >= 0, ErrCode::config, "weight_decay must be non-negative");
  require(cfg.lr_decay_factor > 0, ErrCode::config, "lr_decay_factor must be positive");
  require(cfg.lr_decay_every >= 1, ErrCode::config, "lr_decay_every must be >= 1");
  require(cfg.epochs >= 0, ErrCode::config, "epochs must be non-negative");
  require(cfg.margin >= 0, ErrCode::config, "margin must be non-negative");
  require(cfg.batch_p >= 1 && cfg.batch_k >= 1, ErrCode::config, "P and K must be positive");
  require(cfg.clip_len >= 1, ErrCode::config, "clip_len must be positive");
  require(cfg.part_size >= 1, ErrCode::config, "part_size must be positive");
  require(cfg.feature_dim >= 1, ErrCode::config, "feature_dim must be positive");
  require(cfg.checkpoint_every >= 0, ErrCode::config, "checkpoint_every must be >= 0");
}

ModelConfig model_config_for(const TrainConfig& cfg, const Dataset& data) {
  const DatasetManifest& m = data.manifest();
  require(cfg.clip_len == m.clip_len, ErrCode::config, "config clip_len ", cfg.clip_len,
          " does not match dataset clip_len ", m.clip_len);
  ModelConfig mc;
  mc.feature_dim = cfg.feature_dim;
  mc.clip_len = cfg.clip_len;
  mc.part_size = cfg.part_size;
  mc.height = m.height;
  mc.width = m.width;
  mc.channels = m.channels;
  mc.num_classes = std::max<int>(1, static_cast<int>(data.train_identities().size()));
  mc.strategy = cfg.strategy;
  mc.attention_scale = cfg.attention_scale;
  return mc;
}

TrainedState train(const TrainConfig& cfg, const Dataset& data, const TrainHooks& hooks,
                   const std::string& checkpoint_path) {
  validate_train_config(cfg);
  std::vector<uint32_t> ids = data.train_identities();
  require(static_cast<int>(ids.size()) >= cfg.batch_p, ErrCode::config,
          "train split has ", ids.size(), " identities, PK sampling needs P=", cfg.batch_p);

  TrainedState state;
  state.config = cfg;
  ModelConfig mc = model_config_for(cfg, data);
  state.model = std::make_unique<LogaModel<float>>(mc, cfg.seed);
  state.optimizer = std::make_unique<AdamW<float>>(state.model->store(), 0.9, 0.999, 1e-8,
                                                   cfg.weight_decay);

  // identity -> classifier label
  std::vector<long> label_of(ids.empty() ? 0 : ids.back() + 1, -1);
  for (size_t i = 0; i < ids.size(); ++i) label_of[ids[i]] = static_cast<long>(i);

  long train_clips = static_cast<long>(data.clip_ids(Split::train).size());
  long batch_size = static_cast<long>(cfg.batch_p) * cfg.batch_k;
  long steps_per_epoch = std::max<long>(1, (train_clips + batch_size - 1) / batch_size);

  PkBatchSampler sampler(data, cfg.batch_p, cfg.batch_k, cfg.seed);
  Rng train_rng(mix_seed(cfg.seed, kTagTrain));
  long global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = scheduled_lr(cfg.learning_rate, cfg.lr_decay_factor, cfg.lr_decay_every, epoch);
    double sum_loss = 0, sum_id = 0, sum_trip = 0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      std::vector<uint32_t> batch = sampler.next_batch();
      std::vector<const std::vector<float>*> px;
      std::vector<long> labels;
      px.reserve(batch.size());
      labels.reserve(batch.size());
      for (uint32_t id : batch) {
        const Clip& c = data.clip(id);
        px.push_back(&c.pixels);
        labels.push_back(label_of[c.identity]);
      }

      auto descriptors = state.model->forward_batch(px, Mode::train);
      std::vector<NodePtr<float>> xs;
      xs.reserve(descriptors.size());
      for (auto& d : descriptors) xs.push_back(d.x);

      Rng trip_rng(mix_seed(cfg.seed, kTagTriplet, static_cast<uint64_t>(global_step)));
      auto loss = batch_loss(xs, labels, state.model->classifier(),
                             static_cast<float>(cfg.margin), trip_rng, cfg.mining);
      double total = static_cast<double>(loss.total->value[0]);
      if (!std::isfinite(total)) {
        std::ostringstream os;
        for (uint32_t id : batch) os << ' ' << id;
        raise(ErrCode::numeric, "non-finite loss at epoch ", epoch, " step ", step,
              " (batch clip ids:", os.str(), ")");
      }

      state.model->store().zero_grads();
      backward(loss.total);
      state.optimizer->step(state.model->store(), lr);

      sum_loss += total;
      sum_id += loss.id_component;
      sum_trip += loss.triplet_component;
      if (hooks.on_step)
        hooks.on_step({epoch, static_cast<int>(step), global_step, loss.id_component,
                       loss.triplet_component, total, loss.missing_triplets});
      ++global_step;
    }
    state.epoch = epoch + 1;
    if (hooks.on_epoch)
      hooks.on_epoch({epoch, sum_loss / steps_per_epoch, sum_id / steps_per_epoch,
                      sum_trip / steps_per_epoch, lr});
    if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      state.rng_state = train_rng.state();
      state.rng_inc = train_rng.inc();
      save_checkpoint(checkpoint_path + ".epoch" + std::to_string(epoch + 1), state);
    }
  }

  state.rng_state = train_rng.state();
  state.rng_inc = train_rng.inc();
  if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, state);
  return state;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const Dataset& data,
                                      int num_seeds,
                                      const std::function<void(const std::string&)>& progress) {
  require(num_seeds >= 1, ErrCode::config, "ablation needs at least one seed");
  std::vector<AblationRow> rows(kNumStrategies);
  for (int si = 0; si < kNumStrategies; ++si) rows[si].strategy = strategy_at(si);

  for (int rep = 0; rep < num_seeds; ++rep) {
    for (int si = 0; si < kNumStrategies; ++si) {
      TrainConfig cfg = base;
      cfg.strategy = strategy_at(si);
      cfg.seed = base.seed + static_cast<uint64_t>(rep);
      cfg.checkpoint_every = 0;
      TrainedState state = train(cfg, data);
      EvalResult res = evaluate(*state.model, data);
      rows[si].maps.push_back(res.map);
      rows[si].rank1s.push_back(res.cmc.empty() ? 0.0 : res.cmc[0]);
      if (progress) {
        std::ostringstream os;
        os << strategy_name(cfg.strategy) << " seed " << cfg.seed << ": mAP " << res.map
           << " rank-1 " << (res.cmc.empty() ? 0.0 : res.cmc[0]);
        progress(os.str());
      }
    }
  }
  for (auto& row : rows) {
    for (double v : row.maps) row.mean_map += v;
    for (double v : row.rank1s) row.mean_rank1 += v;
    row.mean_map /= row.maps.size();
    row.mean_rank1 /= row.rank1s.size();
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s   (%zu seed%s)\n", "strategy", "mAP",
                "rank-1", rows.empty() ? size_t(0) : rows[0].maps.size(),
                (!rows.empty() && rows[0].maps.size() == 1) ? "" : "s");
  os << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-16s %8.4f %8.4f\n", strategy_name(row.strategy),
                  row.mean_map, row.mean_rank1);
    os << line;
  }
  return os.str();
}

}  // namespace loga
