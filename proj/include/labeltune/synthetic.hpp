#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "labeltune/matrix.hpp"

namespace labeltune {

struct ClusterSpec {
    std::size_t num_labels = 3;
    std::size_t dim = 8;
    std::size_t points_per_cluster = 100;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticTask {
    EmbeddingMatrix x;
    std::vector<std::size_t> z;
    EmbeddingMatrix true_label_embeddings;
};

// Centers are the first K standard basis vectors; points are center plus
// isotropic Gaussian noise (Box-Muller). Points are grouped by cluster.
SyntheticTask make_separable_task(const ClusterSpec& spec);

// Gaussian clusters around arbitrary centers, grouped by cluster.
SyntheticTask make_gaussian_clusters(const EmbeddingMatrix& centers, std::size_t points_per_cluster, double noise_sigma,
                                     std::uint64_t seed);

// Drops round(fraction_k * count_k) examples of each label k, chosen by a
// seeded shuffle; surviving examples keep their relative order.
SyntheticTask make_unbalanced_variant(const SyntheticTask& task, std::span<const double> removal_fractions,
                                      std::uint64_t seed);

// n labels drawn uniformly from 0..K-1.
std::vector<std::size_t> uniform_random_labels(std::size_t n, std::size_t num_labels, std::uint64_t seed);

// n labels with exact balance: n / K of each (n must be divisible by K), in a seeded order.
std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t num_labels, std::uint64_t seed);

// Matrix with i.i.d. standard normal entries scaled by `scale`.
EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, double scale, std::uint64_t seed);

// Copy of m plus a random direction of Frobenius norm `norm`.
EmbeddingMatrix perturb(const EmbeddingMatrix& m, double norm, std::uint64_t seed);

// Rows drawn uniformly from the unit sphere.
EmbeddingMatrix random_unit_rows(std::size_t rows, std::size_t dim, std::uint64_t seed);

}  // namespace labeltune
