#include "kmp/eval/evaluate.hpp"

#include <cstdio>

#include "kmp/error.hpp"
#include "kmp/numerics/parallel.hpp"

namespace kmp {

EmbeddingSource parse_embedding_source(std::string_view text) {
  if (text == "xc" || text == "x_c" || text == "visual") return EmbeddingSource::kVisual;
  if (text == "xg" || text == "x_g" || text == "graph") return EmbeddingSource::kGraph;
  if (text == "concat") return EmbeddingSource::kConcat;
  throw ConfigError("unknown embedding source '" + std::string(text) + "' (xc, xg, concat)");
}

std::string_view to_string(EmbeddingSource source) {
  switch (source) {
    case EmbeddingSource::kVisual:
      return "xc";
    case EmbeddingSource::kGraph:
      return "xg";
    case EmbeddingSource::kConcat:
      return "concat";
  }
  return "?";
}

EmbeddingSet embed_tracklets(const KmpNet& net, const Dataset& dataset,
                             const std::vector<std::size_t>& indices, EmbeddingSource source) {
  if (source != EmbeddingSource::kVisual && !net.has_graph_branch()) {
    throw ConfigError("embedding source '" + std::string(to_string(source)) +
                      "' needs a model with a graph branch");
  }
  EmbeddingSet set;
  set.vectors.resize(indices.size());
  set.meta.resize(indices.size());
  parallel_for(indices.size(), [&](std::size_t i) {
    const std::size_t idx = indices[i];
    const Tracklet& tr = dataset.tracklets.at(idx);
    Tensor frames = dataset.frames_tensor(idx);
    std::vector<Tensor> parts;
    if (source == EmbeddingSource::kVisual) {
      parts = net.visual_embeddings(frames);
    } else {
      KmpOutput out = net.forward(frames, tr.track, false);
      if (source == EmbeddingSource::kConcat) parts = out.visual_embeddings;
      parts.insert(parts.end(), out.graph_embeddings.begin(), out.graph_embeddings.end());
    }
    set.vectors[i] = sequence_embedding(parts, idx);
    set.meta[i] = {idx, tr.identity, tr.camera};
  });
  return set;
}

EvalResult evaluate(const KmpNet& net, const Dataset& dataset, const EvalOptions& options) {
  const auto query_idx = dataset.indices(Split::kQuery);
  const auto gallery_idx = dataset.indices(Split::kGallery);
  if (query_idx.empty() || gallery_idx.empty()) {
    throw ConfigError("evaluate: dataset has no query or gallery tracklets");
  }
  EvalResult r;
  r.query = embed_tracklets(net, dataset, query_idx, options.source);
  r.gallery = embed_tracklets(net, dataset, gallery_idx, options.source);
  r.distances = cosine_distance_matrix(r.query.vectors, r.gallery.vectors);
  r.ranking = cmc_and_map(r.distances, r.query.meta, r.gallery.meta, options.ranking);
  return r;
}

std::string format_metrics(const RankingResult& ranking) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "top1 %.6f\ntop5 %.6f\ntop10 %.6f\nmAP %.6f\nqueries %zu\nexcluded %zu\n",
                ranking.top(1), ranking.top(5), ranking.top(10), ranking.map, ranking.scored(),
                ranking.excluded.size());
  return buf;
}

}  // namespace kmp
