#include "labeltune/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labeltune/zeroshot.hpp"

namespace labeltune {

void RefinementConfig::validate() const {
    if (max_iters == 0) throw InvalidArgument("RefinementConfig: max_iters must be positive");
    if (!(anchor_weight >= 0.0 && anchor_weight <= 1.0)) {
        throw InvalidArgument("RefinementConfig: anchor weight must be in [0, 1]");
    }
    if (cap == 0) throw InvalidArgument("RefinementConfig: cap must be positive");
}

RefinementResult refine_labels(const EmbeddingMatrix& y0, const EmbeddingMatrix& unlabeled,
                               const RefinementConfig& config) {
    config.validate();
    if (y0.cols() != unlabeled.cols()) throw InvalidArgument("refine_labels: dimension mismatch");
    if (y0.rows() == 0) throw InvalidArgument("refine_labels: no labels");

    EmbeddingMatrix pool = unlabeled;
    if (pool.rows() > config.cap) {
        std::vector<std::size_t> keep(pool.rows());
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        if (config.sample_seed) {
            Rng rng(*config.sample_seed);
            rng.shuffle(std::span<std::size_t>(keep));
            keep.resize(config.cap);
            std::sort(keep.begin(), keep.end());
        } else {
            keep.resize(config.cap);
        }
        pool = select_rows(pool, keep);
    }
    if (pool.rows() < y0.rows()) {
        throw InvalidArgument("refine_labels: " + std::to_string(pool.rows()) + " unlabeled examples for " +
                              std::to_string(y0.rows()) + " labels");
    }

    const std::size_t num_labels = y0.rows();
    const std::size_t dim = y0.cols();
    const double alpha = config.anchor_weight;
    EmbeddingMatrix centroids = y0;
    RefinementResult result{TunedLabels(y0, y0, std::nullopt, {}), 0, false, {}};

    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        auto assignment = predict_labels(pool, centroids);
        if (!result.assignments.empty() && assignment == result.assignments.back()) {
            result.converged = true;
            break;
        }
        result.iterations = iter + 1;

        std::vector<double> sums(num_labels * dim, 0.0);
        std::vector<std::size_t> counts(num_labels, 0);
        for (std::size_t i = 0; i < pool.rows(); ++i) {
            const auto x = pool.row(i);
            double* s = sums.data() + assignment[i] * dim;
            for (std::size_t c = 0; c < dim; ++c) s[c] += x[c];
            ++counts[assignment[i]];
        }
        for (std::size_t k = 0; k < num_labels; ++k) {
            if (counts[k] == 0) continue;
            const auto anchor = y0.row(k);
            auto row = centroids.row_mut(k);
            const auto n = static_cast<double>(counts[k]);
            for (std::size_t c = 0; c < dim; ++c) {
                row[c] = alpha == 1.0 ? anchor[c] : alpha * anchor[c] + (1.0 - alpha) * (sums[k * dim + c] / n);
            }
        }
        result.assignments.push_back(std::move(assignment));
    }

    Provenance provenance{{"method", "label-refinement"},
                          {"iterations", std::to_string(result.iterations)},
                          {"converged", result.converged ? "true" : "false"},
                          {"unlabeled_examples", std::to_string(pool.rows())}};
    result.labels = TunedLabels(std::move(centroids), y0, std::nullopt, std::move(provenance));
    return result;
}

}  // namespace labeltune
