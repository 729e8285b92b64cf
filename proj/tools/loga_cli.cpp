// Command-line front end over the loga C API.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loga/loga.h"

namespace {

int fail(loga_status st, const char* what) {
  std::fprintf(stderr, "error: %s failed: %s (%s)\n", what, loga_last_error(),
               loga_status_name(st));
  return 1;
}

void print_log_line(const char* line, void*) { std::printf("%s\n", line); }

struct DatasetHandle {
  loga_dataset* ds = nullptr;
  ~DatasetHandle() { loga_dataset_close(ds); }
};

struct ModelHandle {
  loga_model* m = nullptr;
  ~ModelHandle() { loga_model_free(m); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LOGA video tracklet representation learning"};
  app.require_subcommand(1);

  // generate-data
  std::string gen_manifest, gen_out = "dataset";
  auto* gen = app.add_subcommand("generate-data", "Render a synthetic benchmark dataset");
  gen->add_option("manifest", gen_manifest, "JSON manifest")->required();
  gen->add_option("--out", gen_out, "output directory (default: dataset)");

  // train
  std::string train_config, train_data, train_out = "model.ckpt";
  uint64_t train_seed = 0;
  bool train_have_seed = false, train_verbose = false;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("config", train_config, "JSON train config")->required();
  tr->add_option("data", train_data, "dataset directory")->required();
  tr->add_option("--out", train_out, "checkpoint output path (default: model.ckpt)");
  tr->add_option("--seed", train_seed, "override the config seed")
      ->each([&](const std::string&) { train_have_seed = true; });
  tr->add_flag("--verbose", train_verbose, "log every step instead of epoch summaries");

  // eval
  std::string eval_ckpt, eval_data, eval_ranks = "1,5,10,20";
  auto* ev = app.add_subcommand("eval", "Evaluate retrieval (CMC / mAP)");
  ev->add_option("ckpt", eval_ckpt, "checkpoint")->required();
  ev->add_option("data", eval_data, "dataset directory")->required();
  ev->add_option("--ranks", eval_ranks, "comma-separated CMC ranks to print (max 20)");

  // inspect
  std::string ins_ckpt, ins_data;
  std::vector<uint32_t> ins_clips;
  bool ins_amplify = false;
  auto* ins = app.add_subcommand("inspect", "Dump per-frame importance scores");
  ins->add_option("ckpt", ins_ckpt, "checkpoint")->required();
  ins->add_option("data", ins_data, "dataset directory")->required();
  ins->add_option("--clips", ins_clips, "clip ids")->required()->delimiter(',');
  ins->add_flag("--x1000", ins_amplify, "amplify scores by 1000");

  // gradcheck
  std::string gc_dtype = "float64";
  uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Verify gradients against finite differences");
  gc->add_option("--dtype", gc_dtype, "float64 (default) or float32");
  gc->add_option("--seed", gc_seed, "rng seed");

  // ablate
  std::string abl_data, abl_config;
  int abl_seeds = 1;
  uint64_t abl_seed = 42;
  auto* abl = app.add_subcommand("ablate", "Train and compare all assembling strategies");
  abl->add_option("data", abl_data, "dataset directory")->required();
  abl->add_option("--config", abl_config, "JSON train config");
  abl->add_option("--seeds", abl_seeds, "number of seeds (default 1)");
  abl->add_option("--seed", abl_seed, "base seed (default 42)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    if (auto st = loga_generate_dataset(gen_manifest.c_str(), gen_out.c_str()))
      return fail(st, "generate-data");
    DatasetHandle d;
    if (auto st = loga_dataset_open(gen_out.c_str(), &d.ds)) return fail(st, "dataset reload");
    loga_dataset_info info;
    if (auto st = loga_dataset_info_get(d.ds, &info)) return fail(st, "dataset info");
    std::printf("wrote %s: %d clips (%d identities x %d tracklets), %dx%dx%d frames, L=%d\n",
                gen_out.c_str(), info.num_clips, info.num_identities,
                info.tracklets_per_identity, info.channels, info.height, info.width,
                info.clip_len);
    std::printf("splits: %d train clips, %d query tracklets, %d gallery tracklets\n",
                info.train_clips, info.query_tracklets, info.gallery_tracklets);
    return 0;
  }

  if (tr->parsed()) {
    loga_log_fn log = print_log_line;
    if (auto st = loga_train(train_config.empty() ? nullptr : train_config.c_str(),
                             train_data.c_str(), train_out.c_str(), train_seed,
                             train_have_seed ? 1 : 0, train_verbose ? log : nullptr, nullptr))
      return fail(st, "train");
    if (!train_verbose) std::printf("trained; checkpoint written to %s\n", train_out.c_str());
    return 0;
  }

  if (ev->parsed()) {
    ModelHandle m;
    DatasetHandle d;
    if (auto st = loga_model_load(eval_ckpt.c_str(), &m.m)) return fail(st, "load checkpoint");
    if (auto st = loga_dataset_open(eval_data.c_str(), &d.ds)) return fail(st, "open dataset");
    loga_eval_result res;
    if (auto st = loga_evaluate(m.m, d.ds, &res)) return fail(st, "eval");
    std::printf("mAP %.4f over %d queries", res.map, res.num_queries);
    if (res.skipped_queries) std::printf(" (%d skipped: no valid match)", res.skipped_queries);
    std::printf("\n");
    std::string ranks = eval_ranks;
    for (char& c : ranks)
      if (c == ',') c = ' ';
    int k;
    const char* p = ranks.c_str();
    int consumed;
    while (std::sscanf(p, "%d%n", &k, &consumed) == 1) {
      p += consumed;
      if (k >= 1 && k <= LOGA_CMC_RANKS)
        std::printf("rank-%d %.4f\n", k, res.cmc[k - 1]);
      else
        std::fprintf(stderr, "rank %d out of range 1..%d\n", k, LOGA_CMC_RANKS);
    }
    return 0;
  }

  if (ins->parsed()) {
    ModelHandle m;
    DatasetHandle d;
    if (auto st = loga_model_load(ins_ckpt.c_str(), &m.m)) return fail(st, "load checkpoint");
    if (auto st = loga_dataset_open(ins_data.c_str(), &d.ds)) return fail(st, "open dataset");
    char* text = nullptr;
    if (auto st = loga_inspect(m.m, d.ds, ins_clips.data(), ins_clips.size(),
                               ins_amplify ? 1 : 0, &text))
      return fail(st, "inspect");
    std::fputs(text, stdout);
    loga_string_free(text);
    return 0;
  }

  if (gc->parsed()) {
    char* report = nullptr;
    int passed = 0;
    if (auto st = loga_gradcheck(gc_dtype.c_str(), gc_seed, &report, &passed))
      return fail(st, "gradcheck");
    std::fputs(report, stdout);
    loga_string_free(report);
    return passed ? 0 : 2;
  }

  if (abl->parsed()) {
    char* table = nullptr;
    if (auto st = loga_ablate(abl_config.empty() ? nullptr : abl_config.c_str(),
                              abl_data.c_str(), abl_seeds, abl_seed, print_log_line, nullptr,
                              &table))
      return fail(st, "ablate");
    std::fputs(table, stdout);
    loga_string_free(table);
    return 0;
  }

  return 0;
}
