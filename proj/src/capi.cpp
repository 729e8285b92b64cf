#include "loga/loga.h"

#include <cstring>
#include <string>

#include "checkpoint.hpp"
#include "datagen.hpp"
#include "dataset.hpp"
#include "evaluate.hpp"
#include "gradcheck.hpp"
#include "train.hpp"

struct loga_dataset {
  loga::Dataset impl;
};

struct loga_model {
  loga::TrainedState state;
};

namespace {

thread_local std::string g_last_error;

loga_status map_code(loga::ErrCode code) {
  using loga::ErrCode;
  switch (code) {
    case ErrCode::invalid_arg: return LOGA_E_INVALID_ARG;
    case ErrCode::dim: return LOGA_E_DIM;
    case ErrCode::config: return LOGA_E_CONFIG;
    case ErrCode::data: return LOGA_E_DATA;
    case ErrCode::validation: return LOGA_E_VALIDATION;
    case ErrCode::io: return LOGA_E_IO;
    case ErrCode::version: return LOGA_E_VERSION;
    case ErrCode::checksum: return LOGA_E_CHECKSUM;
    case ErrCode::truncated: return LOGA_E_TRUNCATED;
    case ErrCode::contract: return LOGA_E_CONTRACT;
    case ErrCode::lookup: return LOGA_E_LOOKUP;
    case ErrCode::numeric: return LOGA_E_NUMERIC;
    case ErrCode::internal: return LOGA_E_INTERNAL;
  }
  return LOGA_E_INTERNAL;
}

template <class Fn>
loga_status guarded(Fn&& fn) {
  try {
    fn();
    return LOGA_OK;
  } catch (const loga::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LOGA_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LOGA_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

loga_status require_arg(bool ok, const char* what) {
  if (ok) return LOGA_OK;
  g_last_error = std::string("invalid argument: ") + what;
  return LOGA_E_INVALID_ARG;
}

}  // namespace

extern "C" {

const char* loga_status_name(loga_status status) {
  switch (status) {
    case LOGA_OK: return "ok";
    case LOGA_E_INVALID_ARG: return "invalid_arg";
    case LOGA_E_DIM: return "dimension_mismatch";
    case LOGA_E_CONFIG: return "config_error";
    case LOGA_E_DATA: return "data_error";
    case LOGA_E_VALIDATION: return "validation_error";
    case LOGA_E_IO: return "io_error";
    case LOGA_E_VERSION: return "version_error";
    case LOGA_E_CHECKSUM: return "checksum_error";
    case LOGA_E_TRUNCATED: return "truncated_error";
    case LOGA_E_CONTRACT: return "contract_error";
    case LOGA_E_LOOKUP: return "lookup_error";
    case LOGA_E_NUMERIC: return "numeric_error";
    case LOGA_E_INTERNAL: return "internal_error";
  }
  return "?";
}

const char* loga_last_error(void) { return g_last_error.c_str(); }

const char* loga_version(void) { return "1.0.0"; }

void loga_string_free(char* s) { delete[] s; }

loga_status loga_generate_dataset(const char* manifest_path, const char* out_dir) {
  if (auto st = require_arg(manifest_path && out_dir, "null path")) return st;
  return guarded([&] {
    loga::DatasetManifest m = loga::manifest_from_file(manifest_path);
    loga::generate_dataset(m, out_dir);
  });
}

loga_status loga_dataset_open(const char* dir, loga_dataset** out) {
  if (auto st = require_arg(dir && out, "null argument")) return st;
  *out = nullptr;
  return guarded([&] { *out = new loga_dataset{loga::load_dataset(dir)}; });
}

void loga_dataset_close(loga_dataset* dataset) { delete dataset; }

loga_status loga_dataset_info_get(const loga_dataset* dataset, loga_dataset_info* info) {
  if (auto st = require_arg(dataset && info, "null argument")) return st;
  return guarded([&] {
    const loga::DatasetManifest& m = dataset->impl.manifest();
    info->seed = m.seed;
    info->num_identities = m.num_identities;
    info->tracklets_per_identity = m.tracklets_per_identity;
    info->frames_per_tracklet = m.frames_per_tracklet;
    info->clip_len = m.clip_len;
    info->height = m.height;
    info->width = m.width;
    info->channels = m.channels;
    info->num_cameras = m.num_cameras;
    info->num_clips = static_cast<int32_t>(dataset->impl.clips().size());
    info->train_clips = static_cast<int32_t>(dataset->impl.clip_ids(loga::Split::train).size());
    info->query_tracklets =
        static_cast<int32_t>(dataset->impl.tracklet_ids(loga::Split::query).size());
    info->gallery_tracklets =
        static_cast<int32_t>(dataset->impl.tracklet_ids(loga::Split::gallery).size());
  });
}

loga_status loga_train(const char* config_path, const char* data_dir, const char* ckpt_out,
                       uint64_t seed, int have_seed, loga_log_fn log, void* user) {
  if (auto st = require_arg(data_dir && ckpt_out, "null path")) return st;
  return guarded([&] {
    loga::TrainConfig cfg =
        config_path ? loga::train_config_from_file(config_path) : loga::TrainConfig{};
    if (have_seed) cfg.seed = seed;
    loga::Dataset data = loga::load_dataset(data_dir);
    loga::TrainHooks hooks;
    if (log) {
      hooks.on_epoch = [log, user](const loga::EpochRecord& r) {
        char line[192];
        std::snprintf(line, sizeof(line),
                      "epoch %d loss %.6f (id %.6f triplet %.6f) lr %.2e", r.epoch, r.mean_loss,
                      r.mean_id, r.mean_triplet, r.lr);
        log(line, user);
      };
      hooks.on_step = [log, user](const loga::StepRecord& r) {
        char line[224];
        std::snprintf(line, sizeof(line),
                      "{\"step\":%ld,\"epoch\":%d,\"id_loss\":%.6f,\"triplet_loss\":%.6f,"
                      "\"total\":%.6f,\"missing_triplets\":%d}",
                      r.global_step, r.epoch, r.id_loss, r.triplet_loss, r.total,
                      r.missing_triplets);
        log(line, user);
      };
    }
    loga::train(cfg, data, hooks, ckpt_out);
  });
}

loga_status loga_model_load(const char* ckpt_path, loga_model** out) {
  if (auto st = require_arg(ckpt_path && out, "null argument")) return st;
  *out = nullptr;
  return guarded([&] { *out = new loga_model{loga::load_checkpoint(ckpt_path)}; });
}

void loga_model_free(loga_model* model) { delete model; }

loga_status loga_evaluate(const loga_model* model, const loga_dataset* dataset,
                          loga_eval_result* result) {
  if (auto st = require_arg(model && dataset && result, "null argument")) return st;
  return guarded([&] {
    loga::EvalResult res = loga::evaluate(*model->state.model, dataset->impl);
    static_assert(LOGA_CMC_RANKS == loga::kCmcRanks);
    for (int k = 0; k < LOGA_CMC_RANKS; ++k) result->cmc[k] = res.cmc[static_cast<size_t>(k)];
    result->map = res.map;
    result->num_queries = static_cast<int32_t>(res.per_query_ap.size());
    result->skipped_queries = res.skipped_queries;
  });
}

loga_status loga_inspect(const loga_model* model, const loga_dataset* dataset,
                         const uint32_t* clip_ids, size_t num_clips, int amplify, char** out) {
  if (auto st = require_arg(model && dataset && out && (clip_ids || num_clips == 0),
                            "null argument"))
    return st;
  *out = nullptr;
  return guarded([&] {
    std::vector<uint32_t> ids(clip_ids, clip_ids + num_clips);
    *out = dup_string(loga::inspect(*model->state.model, dataset->impl, ids, amplify != 0));
  });
}

loga_status loga_gradcheck(const char* dtype, uint64_t seed, char** report, int* passed) {
  if (auto st = require_arg(report != nullptr, "null report")) return st;
  *report = nullptr;
  return guarded([&] {
    loga::GradCheckReport rep = loga::gradcheck_run(dtype ? dtype : "float64", seed);
    *report = dup_string(loga::format_gradcheck_report(rep));
    if (passed) *passed = rep.passed ? 1 : 0;
  });
}

loga_status loga_ablate(const char* config_path, const char* data_dir, int num_seeds,
                        uint64_t base_seed, loga_log_fn log, void* user, char** table) {
  if (auto st = require_arg(data_dir && table, "null argument")) return st;
  *table = nullptr;
  return guarded([&] {
    loga::TrainConfig cfg =
        config_path ? loga::train_config_from_file(config_path) : loga::TrainConfig{};
    cfg.seed = base_seed;
    loga::Dataset data = loga::load_dataset(data_dir);
    auto progress = [log, user](const std::string& line) {
      if (log) log(line.c_str(), user);
    };
    auto rows = loga::run_ablation(cfg, data, num_seeds, progress);
    *table = dup_string(loga::format_ablation_table(rows));
  });
}

}  // extern "C"
