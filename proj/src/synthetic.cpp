#include "labeltune/synthetic.hpp"

#include <cmath>

#include "labeltune/rng.hpp"
#include "labeltune/similarity.hpp"

namespace labeltune {

SyntheticTask make_gaussian_clusters(const EmbeddingMatrix& centers, std::size_t points_per_cluster, double noise_sigma,
                                     std::uint64_t seed) {
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("make_gaussian_clusters: noise sigma must be non-negative");
    if (centers.rows() == 0) throw InvalidArgument("make_gaussian_clusters: no centers");
    Rng rng(seed);
    const std::size_t dim = centers.cols();
    std::vector<double> data;
    data.reserve(centers.rows() * points_per_cluster * dim);
    std::vector<std::size_t> z;
    z.reserve(centers.rows() * points_per_cluster);
    for (std::size_t k = 0; k < centers.rows(); ++k) {
        const auto c = centers.row(k);
        for (std::size_t p = 0; p < points_per_cluster; ++p) {
            for (std::size_t j = 0; j < dim; ++j) {
                // sigma = 0 must reproduce the center exactly, so skip the draw
                data.push_back(noise_sigma == 0.0 ? c[j] : c[j] + noise_sigma * rng.normal());
            }
            z.push_back(k);
        }
    }
    return {EmbeddingMatrix(z.size(), dim, std::move(data)), std::move(z), centers};
}

SyntheticTask make_separable_task(const ClusterSpec& spec) {
    if (spec.num_labels == 0) throw InvalidArgument("make_separable_task: need at least one label");
    if (spec.num_labels > spec.dim) {
        throw InvalidArgument("make_separable_task: " + std::to_string(spec.num_labels) +
                              " orthogonal centers do not fit in dim " + std::to_string(spec.dim));
    }
    EmbeddingMatrix centers(spec.num_labels, spec.dim);
    for (std::size_t k = 0; k < spec.num_labels; ++k) centers.set(k, k, 1.0);
    return make_gaussian_clusters(centers, spec.points_per_cluster, spec.noise_sigma, spec.seed);
}

SyntheticTask make_unbalanced_variant(const SyntheticTask& task, std::span<const double> removal_fractions,
                                      std::uint64_t seed) {
    const std::size_t num_labels = task.true_label_embeddings.rows();
    if (removal_fractions.size() != num_labels) {
        throw InvalidArgument("make_unbalanced_variant: need one removal fraction per label");
    }
    for (double f : removal_fractions) {
        if (!(f >= 0.0 && f < 1.0)) throw InvalidArgument("make_unbalanced_variant: fractions must be in [0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < task.z.size(); ++i) by_label[task.z[i]].push_back(i);

    Rng rng(seed);
    std::vector<bool> drop(task.z.size(), false);
    for (std::size_t k = 0; k < num_labels; ++k) {
        auto members = by_label[k];
        rng.shuffle(std::span<std::size_t>(members));
        const auto remove =
            static_cast<std::size_t>(std::llround(removal_fractions[k] * static_cast<double>(members.size())));
        for (std::size_t r = 0; r < remove; ++r) drop[members[r]] = true;
    }
    std::vector<std::size_t> keep;
    std::vector<std::size_t> z;
    for (std::size_t i = 0; i < task.z.size(); ++i) {
        if (drop[i]) continue;
        keep.push_back(i);
        z.push_back(task.z[i]);
    }
    return {select_rows(task.x, keep), std::move(z), task.true_label_embeddings};
}

std::vector<std::size_t> uniform_random_labels(std::size_t n, std::size_t num_labels, std::uint64_t seed) {
    if (num_labels == 0) throw InvalidArgument("uniform_random_labels: need at least one label");
    Rng rng(seed);
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = static_cast<std::size_t>(rng.below(num_labels));
    return out;
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t num_labels, std::uint64_t seed) {
    if (num_labels == 0 || n % num_labels != 0) {
        throw InvalidArgument("balanced_labels: n must be a positive multiple of the label count");
    }
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i % num_labels;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(out));
    return out;
}

EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, double scale, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> data(rows * dim);
    for (double& v : data) v = scale * rng.normal();
    return EmbeddingMatrix(rows, dim, std::move(data));
}

EmbeddingMatrix perturb(const EmbeddingMatrix& m, double norm, std::uint64_t seed) {
    const EmbeddingMatrix direction = random_matrix(m.rows(), m.cols(), 1.0, seed);
    const double length = frobenius_distance(direction, EmbeddingMatrix(m.rows(), m.cols()));
    std::vector<double> data = m.data();
    if (length > 0.0) {
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += norm * direction.data()[i] / length;
    }
    return EmbeddingMatrix(m.rows(), m.cols(), std::move(data));
}

EmbeddingMatrix random_unit_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    return normalize_rows(random_matrix(rows, dim, 1.0, seed));
}

}  // namespace labeltune
