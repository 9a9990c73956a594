#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kmp/numerics/tensor.hpp"

namespace kmp {

struct EmbeddingMeta {
  std::size_t tracklet = 0;
  std::size_t identity = 0;
  std::size_t camera = 0;
};

// Concatenates the per-frame embeddings (each [T, D_i]) along features,
// averages over frames and L2-normalizes. Throws DomainError naming the
// tracklet when the mean vector is zero.
std::vector<double> sequence_embedding(std::span<const Tensor> per_frame, std::size_t tracklet_id);

struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t q, std::size_t g) const { return values[q * cols + g]; }
};

// d = 1 - <q, g>. Every input must have unit norm within 1e-9, otherwise a
// DomainError is thrown.
DistanceMatrix cosine_distance_matrix(const std::vector<std::vector<double>>& queries,
                                      const std::vector<std::vector<double>>& gallery);

struct RankingResult {
  // Per query, gallery indices in ranked order (self matches removed, and
  // same-camera matches too when cross-camera filtering is on).
  std::vector<std::vector<std::size_t>> order;
  // Per query AP; queries without a relevant gallery item hold 0 and are
  // listed in `excluded`.
  std::vector<double> ap;
  std::vector<std::size_t> excluded;
  // cmc[r] = fraction of scored queries whose first match is at rank <= r + 1.
  std::vector<double> cmc;
  double map = 0.0;

  std::size_t scored() const { return ap.size() - excluded.size(); }
  double top(std::size_t rank) const;
};

struct RankingOptions {
  // MARS-style filter: drop gallery items sharing identity and camera with
  // the query.
  bool cross_camera = false;
};

// Gallery sorted by ascending distance with ties broken by lower gallery
// index. AP is the mean of precision@rank over the ranks of relevant items;
// a gallery item with the query's own tracklet id is never ranked.
RankingResult cmc_and_map(const DistanceMatrix& dist, std::span<const EmbeddingMeta> queries,
                          std::span<const EmbeddingMeta> gallery,
                          const RankingOptions& options = {});

// Expected AP of a uniformly random ranking of G items, R of them relevant.
double expected_random_ap(std::size_t gallery_size, std::size_t relevant);

}  // namespace kmp
