#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kmp/eval/metrics.hpp"
#include "kmp/model/dataset.hpp"
#include "kmp/model/kmpnet.hpp"

namespace kmp {

// xc: visual stripes only; xg: graph pools only; concat: both.
enum class EmbeddingSource { kVisual, kGraph, kConcat };

EmbeddingSource parse_embedding_source(std::string_view text);
std::string_view to_string(EmbeddingSource source);

struct EmbeddingSet {
  std::vector<std::vector<double>> vectors;
  std::vector<EmbeddingMeta> meta;
};

// Unit-norm sequence embeddings of the listed tracklets (inference mode).
// The visual source never runs the graph branch.
EmbeddingSet embed_tracklets(const KmpNet& net, const Dataset& dataset,
                             const std::vector<std::size_t>& indices, EmbeddingSource source);

struct EvalOptions {
  EmbeddingSource source = EmbeddingSource::kVisual;
  RankingOptions ranking;
};

struct EvalResult {
  EmbeddingSet query;
  EmbeddingSet gallery;
  DistanceMatrix distances;
  RankingResult ranking;
};

// Ranks the gallery split for every query tracklet.
EvalResult evaluate(const KmpNet& net, const Dataset& dataset, const EvalOptions& options = {});

// "metric value" rows with 6 decimals: top1, top5, top10, mAP, queries,
// excluded.
std::string format_metrics(const RankingResult& ranking);

}  // namespace kmp
