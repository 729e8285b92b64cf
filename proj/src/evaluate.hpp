#pragma once

#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"

namespace loga {

struct EvalResult {
  std::vector<double> cmc;           // rank-k accuracy, k = 1..20
  double map = 0;                    // mean average precision
  std::vector<double> per_query_ap;  // one entry per evaluated query
  int skipped_queries = 0;           // queries with no valid gallery match
};

constexpr int kCmcRanks = 20;

// Tracklet descriptor: every clip of the tracklet runs through the model in
// eval mode and the clip descriptors are averaged.
std::vector<float> extract_descriptor(const LogaModel<float>& model, const Dataset& data,
                                      uint32_t tracklet_gid);

// Cross-camera retrieval: every query tracklet is ranked against the gallery
// by cosine similarity (ties break by gallery order); gallery entries sharing
// both identity and camera with the query are excluded. Queries with no
// remaining correct match are skipped and counted.
EvalResult evaluate(const LogaModel<float>& model, const Dataset& data);

// Pure metric core, exposed for oracle tests: similarity[q][g], query and
// gallery labels/cameras.
EvalResult rank_and_score(const std::vector<std::vector<double>>& similarity,
                          const std::vector<std::pair<uint32_t, uint32_t>>& query_id_cam,
                          const std::vector<std::pair<uint32_t, uint32_t>>& gallery_id_cam);

// Score dump for the listed clips (the Fig.-5-style inspection): one CSV
// record per frame with w_local, w_global and the ground-truth corruption
// flag. amplify=true scales the weights by 1000 for readability.
std::string inspect(const LogaModel<float>& model, const Dataset& data,
                    const std::vector<uint32_t>& clip_ids, bool amplify);

double cosine_similarity_values(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace loga
