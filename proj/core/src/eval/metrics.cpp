#include "kmp/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kmp/error.hpp"
#include "kmp/numerics/parallel.hpp"

namespace kmp {

namespace {

constexpr double kUnitTolerance = 1e-9;

void require_unit(const std::vector<double>& v, const char* side, std::size_t index) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(std::abs(std::sqrt(sq) - 1.0) <= kUnitTolerance)) {
    throw DomainError(std::string("cosine_distance_matrix: ") + side + " " + std::to_string(index) +
                      " has norm " + std::to_string(std::sqrt(sq)) + ", expected unit length");
  }
}

}  // namespace

std::vector<double> sequence_embedding(std::span<const Tensor> per_frame, std::size_t tracklet_id) {
  if (per_frame.empty()) throw DimensionError("sequence_embedding: no embeddings");
  const std::size_t frames = per_frame[0].rank() == 2 ? per_frame[0].dim(0) : 0;
  if (frames == 0) throw DimensionError("sequence_embedding: need [T, D] inputs with T >= 1");
  std::size_t total = 0;
  for (const Tensor& e : per_frame) {
    if (e.rank() != 2 || e.dim(0) != frames) {
      throw DimensionError("sequence_embedding: inconsistent shape " + shape_str(e.shape()));
    }
    total += e.dim(1);
  }
  std::vector<double> out(total, 0.0);
  std::size_t offset = 0;
  for (const Tensor& e : per_frame) {
    const std::size_t d = e.dim(1);
    const auto data = e.data();
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < d; ++c) out[offset + c] += data[t * d + c];
    }
    offset += d;
  }
  double sq = 0.0;
  for (double& x : out) {
    x /= static_cast<double>(frames);
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DomainError("sequence_embedding: tracklet " + std::to_string(tracklet_id) +
                      " has a zero or non-finite mean embedding");
  }
  for (double& x : out) x /= norm;
  return out;
}

DistanceMatrix cosine_distance_matrix(const std::vector<std::vector<double>>& queries,
                                      const std::vector<std::vector<double>>& gallery) {
  for (std::size_t i = 0; i < queries.size(); ++i) require_unit(queries[i], "query", i);
  for (std::size_t i = 0; i < gallery.size(); ++i) require_unit(gallery[i], "gallery", i);
  DistanceMatrix d;
  d.rows = queries.size();
  d.cols = gallery.size();
  d.values.resize(d.rows * d.cols);
  parallel_for(d.rows, [&](std::size_t q) {
    for (std::size_t g = 0; g < d.cols; ++g) {
      if (queries[q].size() != gallery[g].size()) {
        throw DimensionError("cosine_distance_matrix: embedding sizes differ");
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < queries[q].size(); ++c) dot += queries[q][c] * gallery[g][c];
      d.values[q * d.cols + g] = 1.0 - dot;
    }
  });
  return d;
}

double RankingResult::top(std::size_t rank) const {
  if (rank == 0 || cmc.empty()) return 0.0;
  return cmc[std::min(rank, cmc.size()) - 1];
}

RankingResult cmc_and_map(const DistanceMatrix& dist, std::span<const EmbeddingMeta> queries,
                          std::span<const EmbeddingMeta> gallery, const RankingOptions& options) {
  if (dist.rows != queries.size() || dist.cols != gallery.size()) {
    throw DimensionError("cmc_and_map: distance matrix is " + std::to_string(dist.rows) + "x" +
                         std::to_string(dist.cols) + " for " + std::to_string(queries.size()) +
                         " queries and " + std::to_string(gallery.size()) + " gallery items");
  }
  if (queries.empty() || gallery.empty())
    throw DimensionError("cmc_and_map: empty query or gallery");
  const std::size_t Q = queries.size(), G = gallery.size();
  RankingResult r;
  r.order.resize(Q);
  r.ap.assign(Q, 0.0);
  std::vector<std::size_t> first_hit(Q, 0);  // 1-based, 0 = none

  parallel_for(Q, [&](std::size_t q) {
    std::vector<std::size_t> idx;
    idx.reserve(G);
    for (std::size_t g = 0; g < G; ++g) {
      if (gallery[g].tracklet == queries[q].tracklet) continue;
      if (options.cross_camera && gallery[g].identity == queries[q].identity &&
          gallery[g].camera == queries[q].camera) {
        continue;
      }
      idx.push_back(g);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dist(q, a) < dist(q, b); });
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t rank = 0; rank < idx.size(); ++rank) {
      if (gallery[idx[rank]].identity != queries[q].identity) continue;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
      if (hits == 1) first_hit[q] = rank + 1;
    }
    if (hits > 0) r.ap[q] = precision_sum / static_cast<double>(hits);
    r.order[q] = std::move(idx);
  });

  std::vector<std::size_t> hits_at(G + 1, 0);
  double ap_sum = 0.0;
  for (std::size_t q = 0; q < Q; ++q) {
    if (first_hit[q] == 0) {
      r.excluded.push_back(q);
      continue;
    }
    ++hits_at[first_hit[q]];
    ap_sum += r.ap[q];
  }
  const std::size_t scored = r.scored();
  r.cmc.assign(G, 0.0);
  if (scored > 0) {
    std::size_t running = 0;
    for (std::size_t rank = 1; rank <= G; ++rank) {
      running += hits_at[rank];
      r.cmc[rank - 1] = static_cast<double>(running) / static_cast<double>(scored);
    }
    r.map = ap_sum / static_cast<double>(scored);
  }
  return r;
}

double expected_random_ap(std::size_t gallery_size, std::size_t relevant) {
  if (gallery_size == 0 || relevant == 0 || relevant > gallery_size) {
    throw DomainError("expected_random_ap: need 1 <= relevant <= gallery size");
  }
  const double G = static_cast<double>(gallery_size), R = static_cast<double>(relevant);
  double harmonic = 0.0;
  for (std::size_t i = 1; i <= gallery_size; ++i) harmonic += 1.0 / static_cast<double>(i);
  if (gallery_size == 1) return 1.0;
  return (harmonic + (R - 1.0) / (G - 1.0) * (G - harmonic)) / G;
}

}  // namespace kmp
