#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "labeltune/label_tuning.hpp"
#include "labeltune/matrix.hpp"

namespace labeltune {

struct RefinementConfig {
    std::size_t max_iters = 10;
    // Weight of the initial label embedding in each centroid update, in [0, 1].
    double anchor_weight = 0.5;
    std::size_t cap = 10000;
    // Seeded sample of `cap` pool rows instead of the first `cap`.
    std::optional<std::uint64_t> sample_seed;

    void validate() const;
};

struct RefinementResult {
    TunedLabels labels;  // Y = refined centroids, Y0 = the input label embeddings
    std::size_t iterations = 0;  // centroid updates performed
    bool converged = false;      // an assignment pass reproduced the previous one
    std::vector<std::vector<std::size_t>> assignments;  // one per update
};

// Anchored k-means over unlabeled embeddings with centroids initialized at Y0:
// assign each point to its highest dot-product centroid (lowest index on ties),
// then move every non-empty centroid to
//   anchor_weight * Y0_k + (1 - anchor_weight) * mean(assigned points).
// Empty centroids keep their value. Stops when assignments repeat.
RefinementResult refine_labels(const EmbeddingMatrix& y0, const EmbeddingMatrix& unlabeled,
                               const RefinementConfig& config);

}  // namespace labeltune
