#pragma once

// Exhaustive-ranking retrieval-metric oracle: each kept gallery item's
// position is the count of items strictly better (or equal-similarity with a
// smaller index). No sorting, independent of the library's ranking path.

#include <utility>
#include <vector>

#include "evaluate.hpp"
#include "oracles.hpp"

namespace oracles {

using IdCam = std::pair<uint32_t, uint32_t>;

inline loga::EvalResult brute_force_metrics(const std::vector<std::vector<double>>& sim,
                                            const std::vector<IdCam>& queries,
                                            const std::vector<IdCam>& gallery) {
  loga::EvalResult res;
  res.cmc.assign(loga::kCmcRanks, 0.0);
  std::vector<long> first_hits;
  for (size_t q = 0; q < queries.size(); ++q) {
    std::vector<size_t> kept;
    for (size_t g = 0; g < gallery.size(); ++g)
      if (!(gallery[g].first == queries[q].first && gallery[g].second == queries[q].second))
        kept.push_back(g);
    bool any = false;
    for (size_t g : kept)
      if (gallery[g].first == queries[q].first) any = true;
    if (!any) {
      ++res.skipped_queries;
      continue;
    }
    std::vector<int> relevance(kept.size(), 0);
    for (size_t a : kept) {
      size_t pos = 0;
      for (size_t b : kept) {
        if (b == a) continue;
        if (sim[q][b] > sim[q][a] || (sim[q][b] == sim[q][a] && b < a)) ++pos;
      }
      relevance[pos] = gallery[a].first == queries[q].first ? 1 : 0;
    }
    res.per_query_ap.push_back(average_precision(relevance));
    long first = -1;
    for (size_t r = 0; r < relevance.size(); ++r)
      if (relevance[r]) {
        first = static_cast<long>(r);
        break;
      }
    first_hits.push_back(first);
  }
  if (!res.per_query_ap.empty()) {
    for (long rank : first_hits)
      for (int k = static_cast<int>(rank); k < loga::kCmcRanks; ++k)
        res.cmc[static_cast<size_t>(k)] += 1.0;
    for (double& v : res.cmc) v /= static_cast<double>(res.per_query_ap.size());
    for (double ap : res.per_query_ap) res.map += ap;
    res.map /= static_cast<double>(res.per_query_ap.size());
  }
  return res;
}

}  // namespace oracles
