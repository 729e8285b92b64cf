#pragma once

#include <functional>
#include <memory>
#include <string>

#include "dataset.hpp"
#include "model.hpp"
#include "optimizer.hpp"

namespace loga {

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 5e-4;
  double lr_decay_factor = 0.1;
  int lr_decay_every = 60;  // epochs
  int epochs = 30;
  double margin = 0.3;
  int batch_p = 4;
  int batch_k = 8;
  int clip_len = 10;    // L, must match the dataset
  int part_size = 10;   // S
  int feature_dim = 64; // D
  Strategy strategy = Strategy::associative;
  TripletMining mining = TripletMining::random;
  bool attention_scale = false;
  uint64_t seed = 42;
  int checkpoint_every = 0;  // epochs between periodic saves, 0 = only final
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
TrainConfig train_config_from_file(const std::string& path);
void validate_train_config(const TrainConfig& cfg);

struct StepRecord {
  int epoch = 0;
  int step = 0;         // within the epoch
  long global_step = 0;
  double id_loss = 0;
  double triplet_loss = 0;
  double total = 0;
  int missing_triplets = 0;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double mean_id = 0;
  double mean_triplet = 0;
  double lr = 0;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Model + optimizer + bookkeeping, as trained or as restored from a
// checkpoint.
struct TrainedState {
  TrainConfig config;
  std::unique_ptr<LogaModel<float>> model;
  std::unique_ptr<AdamW<float>> optimizer;
  int epoch = 0;
  uint64_t rng_state = 0;
  uint64_t rng_inc = 0;
};

// Builds the model configuration a dataset implies for a train config
// (frame geometry from the manifest, classes from the train split).
ModelConfig model_config_for(const TrainConfig& cfg, const Dataset& data);

// The training loop: PK batches, batched forward, id + triplet loss,
// backprop, AdamW with the step-decay schedule. When checkpoint_path is
// non-empty the final state is saved there (plus periodic saves according to
// checkpoint_every). Raises ErrCode::numeric when the loss stops being
// finite.
TrainedState train(const TrainConfig& cfg, const Dataset& data, const TrainHooks& hooks = {},
                   const std::string& checkpoint_path = "");

struct AblationRow {
  Strategy strategy;
  std::vector<double> maps;    // one per seed
  std::vector<double> rank1s;
  double mean_map = 0;
  double mean_rank1 = 0;
};

// Trains and evaluates every strategy with seeds base.seed, base.seed+1, ...
// `progress` (nullable) receives one line per finished run.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const Dataset& data,
                                      int num_seeds,
                                      const std::function<void(const std::string&)>& progress = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace loga
