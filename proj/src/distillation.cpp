#include "labeltune/distillation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "labeltune/metrics.hpp"
#include "labeltune/similarity.hpp"
#include "labeltune/zeroshot.hpp"

namespace labeltune {

SilverSet::SilverSet(EmbeddingMatrix x, ProbabilityMatrix teacher) : x_(std::move(x)), teacher_(std::move(teacher)) {
    if (x_.rows() != teacher_.rows()) {
        throw InvalidArgument("SilverSet: " + std::to_string(x_.rows()) + " inputs but " +
                              std::to_string(teacher_.rows()) + " teacher rows");
    }
    if (teacher_.cols() == 0) throw InvalidArgument("SilverSet: teacher has no labels");
    for (std::size_t i = 0; i < teacher_.rows(); ++i) {
        double sum = 0.0;
        for (double p : teacher_.row(i)) sum += p;
        if (std::abs(sum - 1.0) > row_sum_tolerance) {
            throw InvalidArgument("SilverSet: teacher row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
    }
}

SilverSet SilverSet::subset(std::span<const std::size_t> indices) const {
    std::vector<double> p;
    p.reserve(indices.size() * num_labels());
    for (std::size_t i : indices) {
        const auto r = teacher_.row(i);
        p.insert(p.end(), r.begin(), r.end());
    }
    return SilverSet(select_rows(x_, indices), ProbabilityMatrix(indices.size(), num_labels(), std::move(p)));
}

Teacher label_embedding_teacher(EmbeddingMatrix teacher_labels) {
    return [labels = std::move(teacher_labels)](const EmbeddingMatrix& x) {
        return softmax_rows(score_matrix(x, labels));
    };
}

SilverSet build_silver_set(const Teacher& teacher, const EmbeddingMatrix& unlabeled, const SilverOptions& options) {
    if (unlabeled.rows() == 0) throw EmptyInput("build_silver_set: no unlabeled examples");
    if (options.cap == 0) throw InvalidArgument("build_silver_set: cap must be positive");
    std::vector<std::size_t> keep(unlabeled.rows());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (keep.size() > options.cap) {
        if (options.sample_seed) {
            Rng rng(*options.sample_seed);
            rng.shuffle(std::span<std::size_t>(keep));
            keep.resize(options.cap);
            std::sort(keep.begin(), keep.end());
        } else {
            keep.resize(options.cap);
        }
    }
    EmbeddingMatrix x = keep.size() == unlabeled.rows() ? unlabeled : select_rows(unlabeled, keep);
    ProbabilityMatrix p = teacher(x);
    return SilverSet(std::move(x), std::move(p));
}

double distillation_objective(const EmbeddingMatrix& y, const SilverSet& silver, const EmbeddingMatrix& y0,
                              double lambda, const std::optional<DropoutMask>& mask, Regularizer regularizer) {
    return detail::cross_entropy_step(silver.x(), silver.teacher(), y, y0, lambda, mask ? &*mask : nullptr, regularizer,
                                      false)
        .loss;
}

EmbeddingMatrix distillation_gradient(const EmbeddingMatrix& y, const SilverSet& silver, const EmbeddingMatrix& y0,
                                      double lambda, const std::optional<DropoutMask>& mask, Regularizer regularizer) {
    return detail::cross_entropy_step(silver.x(), silver.teacher(), y, y0, lambda, mask ? &*mask : nullptr, regularizer,
                                      true)
        .gradient;
}

TunedLabels distill_labels(const SilverSet& silver, const EmbeddingMatrix& y0, const TuningConfig& config) {
    if (y0.rows() != silver.num_labels()) {
        throw InvalidArgument("distill_labels: teacher has " + std::to_string(silver.num_labels()) +
                              " labels, Y0 has " + std::to_string(y0.rows()));
    }
    return detail::descend(silver.x(), silver.teacher(), y0, config, {{"method", "distillation"}});
}

std::vector<std::size_t> teacher_argmax(const SilverSet& silver) {
    std::vector<std::size_t> out(silver.size());
    for (std::size_t i = 0; i < silver.size(); ++i) out[i] = argmax(silver.teacher().row(i));
    return out;
}

DistillationSelection select_distillation_config(const SilverSet& silver, const EmbeddingMatrix& y0,
                                                 const std::vector<TuningConfig>& grid, std::size_t folds,
                                                 std::uint64_t seed) {
    if (grid.empty()) throw InvalidArgument("select_distillation_config: empty grid");
    if (folds < 2) throw InvalidArgument("select_distillation_config: need at least 2 folds");
    if (silver.size() < folds) throw InvalidArgument("select_distillation_config: fewer silver examples than folds");

    std::vector<std::size_t> order(silver.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> fold_of(silver.size());
    for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = p % folds;

    std::vector<SilverSet> train, held_out;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> tr, ho;
        for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? ho : tr).push_back(i);
        train.push_back(silver.subset(tr));
        held_out.push_back(silver.subset(ho));
    }

    std::vector<double> mean(grid.size(), 0.0);
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        try {
            for (std::size_t f = 0; f < folds; ++f) {
                const TunedLabels student = distill_labels(train[f], y0, grid[c]);
                const auto pred = predict_labels(held_out[f].x(), student.y());
                mean[c] += agreement(pred, teacher_argmax(held_out[f]));
            }
            mean[c] /= static_cast<double>(folds);
        } catch (const DivergenceError&) {
            mean[c] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        if (!best || mean[c] > mean[*best]) best = c;
    }
    if (!best) throw DivergenceError(0, grid.front().learning_rate);
    TunedLabels model = distill_labels(silver, y0, grid[*best]);
    return DistillationSelection{grid[*best], *best, std::move(mean), std::move(model)};
}

}  // namespace labeltune
