#include "evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace loga {

double cosine_similarity_values(const std::vector<float>& a, const std::vector<float>& b) {
  require(a.size() == b.size(), ErrCode::dim, "cosine: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0 ? dot / denom : 0.0;
}

std::vector<float> extract_descriptor(const LogaModel<float>& model, const Dataset& data,
                                      uint32_t tracklet_gid) {
  std::vector<uint32_t> clip_ids = data.tracklet_clips(tracklet_gid);
  require(!clip_ids.empty(), ErrCode::data, "empty tracklet ", tracklet_gid);
  std::vector<float> acc(static_cast<size_t>(model.config().feature_dim), 0.0f);
  for (uint32_t cid : clip_ids) {
    auto desc = model.forward_clip(data.clip(cid).pixels, Mode::eval);
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += desc.x->value[static_cast<long>(i)];
  }
  for (float& v : acc) v /= static_cast<float>(clip_ids.size());
  return acc;
}

EvalResult rank_and_score(const std::vector<std::vector<double>>& similarity,
                          const std::vector<std::pair<uint32_t, uint32_t>>& query_id_cam,
                          const std::vector<std::pair<uint32_t, uint32_t>>& gallery_id_cam) {
  size_t nq = query_id_cam.size(), ng = gallery_id_cam.size();
  require(similarity.size() == nq, ErrCode::dim, "similarity rows != queries");

  EvalResult res;
  res.cmc.assign(kCmcRanks, 0.0);
  std::vector<long> first_hit_ranks;

  for (size_t q = 0; q < nq; ++q) {
    require(similarity[q].size() == ng, ErrCode::dim, "similarity cols != gallery");
    auto [qid, qcam] = query_id_cam[q];

    // keep gallery entries that are not same-identity same-camera
    std::vector<size_t> kept;
    bool any_correct = false;
    for (size_t g = 0; g < ng; ++g) {
      auto [gid, gcam] = gallery_id_cam[g];
      if (gid == qid && gcam == qcam) continue;
      kept.push_back(g);
      if (gid == qid) any_correct = true;
    }
    if (!any_correct) {
      ++res.skipped_queries;
      continue;
    }
    // descending similarity, ties by gallery index ascending
    std::stable_sort(kept.begin(), kept.end(),
                     [&](size_t a, size_t b) { return similarity[q][a] > similarity[q][b]; });

    long first_hit = -1;
    int hits = 0;
    double ap = 0;
    for (size_t r = 0; r < kept.size(); ++r) {
      if (gallery_id_cam[kept[r]].first == qid) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        if (first_hit < 0) first_hit = static_cast<long>(r);
      }
    }
    res.per_query_ap.push_back(ap / hits);
    first_hit_ranks.push_back(first_hit);
  }

  size_t evaluated = res.per_query_ap.size();
  if (evaluated > 0) {
    for (long rank : first_hit_ranks)
      for (int k = static_cast<int>(rank); k < kCmcRanks; ++k) res.cmc[static_cast<size_t>(k)] += 1.0;
    for (double& v : res.cmc) v /= static_cast<double>(evaluated);
    res.map = std::accumulate(res.per_query_ap.begin(), res.per_query_ap.end(), 0.0) /
              static_cast<double>(evaluated);
  }
  return res;
}

EvalResult evaluate(const LogaModel<float>& model, const Dataset& data) {
  std::vector<uint32_t> queries = data.tracklet_ids(Split::query);
  std::vector<uint32_t> gallery = data.tracklet_ids(Split::gallery);
  require(!queries.empty(), ErrCode::data, "dataset has no query split");
  require(!gallery.empty(), ErrCode::data, "dataset has no gallery split");

  auto id_cam_of = [&](uint32_t tid) {
    const Clip& c = data.clip(data.tracklet_clips(tid).front());
    return std::make_pair(c.identity, c.camera);
  };

  std::vector<std::vector<float>> qdesc, gdesc;
  std::vector<std::pair<uint32_t, uint32_t>> qmeta, gmeta;
  for (uint32_t t : queries) {
    qdesc.push_back(extract_descriptor(model, data, t));
    qmeta.push_back(id_cam_of(t));
  }
  for (uint32_t t : gallery) {
    gdesc.push_back(extract_descriptor(model, data, t));
    gmeta.push_back(id_cam_of(t));
  }

  std::vector<std::vector<double>> sim(qdesc.size(), std::vector<double>(gdesc.size()));
  for (size_t q = 0; q < qdesc.size(); ++q)
    for (size_t g = 0; g < gdesc.size(); ++g)
      sim[q][g] = cosine_similarity_values(qdesc[q], gdesc[g]);

  return rank_and_score(sim, qmeta, gmeta);
}

std::string inspect(const LogaModel<float>& model, const Dataset& data,
                    const std::vector<uint32_t>& clip_ids, bool amplify) {
  std::vector<ScoreRecord> records;
  for (uint32_t cid : clip_ids) {
    const Clip& c = data.clip(cid);  // ErrCode::lookup on unknown id
    auto [w_local, w_global] = model.scores_for_clip(c.pixels, Mode::eval);
    for (size_t f = 0; f < w_local.size(); ++f) {
      ScoreRecord r;
      r.clip_id = cid;
      r.frame = static_cast<uint32_t>(f);
      r.w_local = w_local[f];
      r.w_global = w_global[f];
      r.flag = c.flags[f];
      records.push_back(r);
    }
  }
  return format_score_records(records, amplify);
}

}  // namespace loga
